#!/usr/bin/env python3
"""
Exception hierarchy for the dendrite dynamics toolkit
Domain errors map to CLI exit code 2, diagnostic errors to exit code 3
"""

from typing import Optional, Tuple


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit"""

    kind = "toolkit_error"

    def to_dict(self) -> dict:
        """Machine-readable form used by the CLI error line"""
        return {"error": self.kind, "message": str(self)}


class DomainError(ToolkitError, ValueError):
    """A precondition of an operation was violated"""

    kind = "domain_error"


class DendriteFormatError(DomainError):
    """Dendrite data is not a finite metric tree"""

    kind = "dendrite_format"

    def __init__(self, message: str, edge: Optional[Tuple] = None):
        super().__init__(message)
        self.edge = edge

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.edge is not None:
            data["edge"] = list(self.edge)
        return data


class GapConditionError(DomainError):
    """Support of a holed sequence has two indices closer than the gap"""

    kind = "gap_condition"

    def __init__(self, n: int, m: int, gap: int):
        super().__init__(f"support indices {n} and {m} are closer than gap {gap}")
        self.pair = (n, m)
        self.gap = gap

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["pair"] = list(self.pair)
        return data


class EmptyLanguageError(DomainError):
    """Subshift specification admits no infinite sequence"""

    kind = "empty_language"


class ConfigurationError(ToolkitError, ValueError):
    """Parameters are individually valid but inconsistent together"""

    kind = "configuration"


class DiagnosticError(ToolkitError):
    """A numeric or diagnostic procedure could not produce a trustworthy result"""

    kind = "diagnostic"


class RecognizabilityError(DiagnosticError):
    """Substitution block positions are ambiguous at the requested depth"""

    kind = "recognizability"


class OrbitNotCapturedError(DiagnosticError):
    """Orbit never entered a slot interior within the scan horizon"""

    kind = "orbit_not_captured"

    def __init__(self, horizon: int):
        super().__init__(f"orbit did not enter any slot interior within horizon {horizon}")
        self.horizon = horizon

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["horizon"] = self.horizon
        return data


class DecompositionError(DiagnosticError):
    """A constructed decomposition violates one of its cell properties"""

    kind = "decomposition"
