#!/usr/bin/env python3
"""
File formats
JSON dendrite, map and point-spec formats plus the CSV/ndjson writers used by
every CLI subcommand.

Edge ids in map files index the canonical edge order: every edge written as
[min id, max id, length], sorted. Interior positions t are measured from the
lower vertex id.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import pandas as pd

from src.services.dendrite import TAU_PT, Dendrite, DPoint, Subdendrite
from src.services.disjointness import PeriodicStructure, StructureLevel
from src.services.dynamics import DendriteMap
from src.services.errors import DendriteFormatError, DomainError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def _read_json(path: PathLike) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DomainError(f"file not found: {path}")
    except json.JSONDecodeError as err:
        raise DomainError(f"{path} is not valid JSON: {err}")


# ----------------------------------------------------------------------
# dendrites and points
# ----------------------------------------------------------------------

def dendrite_from_dict(data: dict, tau: float = TAU_PT) -> Dendrite:
    """
    Build a dendrite from ``{"vertices": n, "edges": [[u, v, length], ...]}``.

    Raises:
        DendriteFormatError: on missing keys or tree violations
    """
    if not isinstance(data, dict) or "vertices" not in data or "edges" not in data:
        raise DendriteFormatError("dendrite data needs 'vertices' and 'edges'")
    return Dendrite(data["vertices"], data["edges"], tau)


def load_dendrite(path: PathLike, tau: float = TAU_PT) -> Dendrite:
    X = dendrite_from_dict(_read_json(path), tau)
    logger.debug(f"loaded dendrite {path}: {X.n_vertices} vertices")
    return X


def dump_dendrite(X: Dendrite, out: Optional[PathLike] = None) -> str:
    return write_document(X.to_dict(), out)


def parse_point(X: Dendrite, spec: Union[str, Sequence]) -> DPoint:
    """
    Point from a point-spec: ``[vertex]`` or ``[edge, t]`` (a JSON string or a list).

    Raises:
        DomainError: on malformed specs or points off X
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            raise DomainError(f"point spec {spec!r} is not JSON")
    if not isinstance(spec, (list, tuple)) or len(spec) not in (1, 2):
        raise DomainError(f"point spec {spec!r} must be [vertex] or [edge, t]")
    if len(spec) == 1:
        return X.vertex(int(spec[0]))
    edge, t = int(spec[0]), float(spec[1])
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"position t={t} outside [0, 1]")
    return X.point(edge, t)


# ----------------------------------------------------------------------
# maps
# ----------------------------------------------------------------------

def map_from_dict(data: dict, base_dir: Optional[PathLike] = None, tau: float = TAU_PT) -> DendriteMap:
    """
    Build a map from the JSON map format; ``dendrite`` is inline data or a file
    path relative to ``base_dir``.

    Raises:
        DomainError: on missing vertex images or malformed entries
    """
    if not isinstance(data, dict) or "dendrite" not in data or "vertex_images" not in data:
        raise DomainError("map data needs 'dendrite' and 'vertex_images'")
    source = data["dendrite"]
    if isinstance(source, str):
        path = Path(source)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        X = load_dendrite(path, tau)
    else:
        X = dendrite_from_dict(source, tau)

    images = data["vertex_images"]
    try:
        vertex_images = [parse_point(X, images[str(v)]) for v in range(X.n_vertices)]
    except KeyError as err:
        raise DomainError(f"vertex {err.args[0]} has no image")
    subdivisions = []
    for entry in data.get("subdivisions", []):
        if len(entry) != 3:
            raise DomainError(f"subdivision {entry!r} must be [edge, t, point-spec]")
        subdivisions.append((int(entry[0]), float(entry[1]), parse_point(X, entry[2])))
    return DendriteMap(X, vertex_images, subdivisions)


def load_map(path: PathLike, tau: float = TAU_PT) -> DendriteMap:
    f = map_from_dict(_read_json(path), Path(path).parent, tau)
    logger.debug(f"loaded map {path}: {len(f.subdivisions())} subdivision knots")
    return f


def dump_map(f: DendriteMap, out: Optional[PathLike] = None) -> str:
    return write_document(f.to_dict(), out)


def load_dendrite_or_map(path: PathLike, tau: float = TAU_PT) -> Union[Dendrite, DendriteMap]:
    """A map file yields a DendriteMap, a dendrite file a Dendrite"""
    data = _read_json(path)
    if isinstance(data, dict) and "vertex_images" in data:
        return map_from_dict(data, Path(path).parent, tau)
    return dendrite_from_dict(data, tau)


# ----------------------------------------------------------------------
# tables
# ----------------------------------------------------------------------

def to_frame(rows: Iterable[dict], columns: Optional[List[str]] = None) -> pd.DataFrame:
    rows = list(rows)
    if not rows:
        return pd.DataFrame({c: [] for c in columns or []})
    return pd.DataFrame(rows, columns=columns)


def write_csv(table: Union[pd.DataFrame, Iterable[dict]], out: Optional[PathLike] = None,
              columns: Optional[List[str]] = None) -> str:
    """
    Write a header row plus data rows, floats with 17 significant digits.

    Returns:
        str: the CSV text that was written
    """
    frame = table if isinstance(table, pd.DataFrame) else to_frame(table, columns)
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def write_document(data: dict, out: Optional[PathLike] = None) -> str:
    """Indented JSON document to a file or stdout"""
    text = json.dumps(data, indent=2) + "\n"
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def write_ndjson(records: Iterable[dict], out: Optional[PathLike] = None) -> str:
    text = "".join(json.dumps(record, sort_keys=True, default=str) + "\n" for record in records)
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


# ----------------------------------------------------------------------
# subdendrites and periodic structures
# ----------------------------------------------------------------------

def subdendrite_from_dict(X: Dendrite, data: dict) -> Subdendrite:
    """``{"segments": [[edge, lo, hi], ...], "vertices": [...]}`` as a normalized subdendrite"""
    segments = {}
    for entry in data.get("segments", []):
        if len(entry) != 3:
            raise DomainError(f"segment {entry!r} must be [edge, lo, hi]")
        e, lo, hi = int(entry[0]), float(entry[1]), float(entry[2])
        if not 0 <= e < X.n_edges or not 0.0 <= lo <= hi <= 1.0:
            raise DomainError(f"segment {entry!r} is not on the dendrite")
        segments[e] = (lo, hi)
    return X.subdendrite(segments, [int(v) for v in data.get("vertices", [])])


def subdendrite_to_dict(Y: Subdendrite) -> dict:
    return {"segments": [[e, lo, hi] for e, lo, hi in Y.segments], "vertices": sorted(Y.vertices)}


def structure_from_dict(X: Dendrite, data: dict) -> PeriodicStructure:
    """
    ``{"label": ..., "levels": [{"segments": ..., "vertices": ..., "n": 3}, ...]}``

    Raises:
        DomainError: on a malformed structure
    """
    if not isinstance(data, dict) or not data.get("levels"):
        raise DomainError("structure data needs a nonempty 'levels' list")
    levels = [StructureLevel(subdendrite_from_dict(X, level), int(level.get("n", 0))) for level in data["levels"]]
    S = PeriodicStructure(levels, X.whole(), data.get("label", ""))
    S.validate(X)
    return S


def load_structure(X: Dendrite, path: PathLike) -> PeriodicStructure:
    return structure_from_dict(X, _read_json(path))


def structure_to_dict(S: PeriodicStructure) -> dict:
    levels = [dict(subdendrite_to_dict(level.D), n=level.n) for level in S.levels]
    return {"label": S.label, "levels": levels}


def dump_structure(S: PeriodicStructure, out: Optional[PathLike] = None) -> str:
    return write_document(structure_to_dict(S), out)
