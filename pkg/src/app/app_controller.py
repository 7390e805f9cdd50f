#!/usr/bin/env python3
"""
Main Application Controller
Coordinates the services for every experiment and keeps run statistics
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.app_config import AppConfig, config as default_config
from src.services.arith import sieve
from src.services.decomposition import (
    CellIndex,
    ConstantObservable,
    DistanceObservable,
    cell_graph,
    cell_rows,
    decompose,
    step_function,
)
from src.services.dendrite import Dendrite, DPoint
from src.services.disjointness import (
    PeriodicStructure,
    bound_experiment,
    sarnak_sum,
    verify_structure,
)
from src.services.dynamics import DendriteMap, OmegaApprox, entropy_estimate, omega_limit, trajectory
from src.services.errors import DomainError
from src.services.gehman import (
    OdometerApprox,
    build_gehman,
    build_odometer,
    dyadic_structure,
    odometer_map,
    parse_spec,
    shift_map,
    verify_conjugacy,
    word_complexity,
)
from src.services.io_formats import load_dendrite_or_map, load_map, load_structure, parse_point

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["id", "name", "value", "bound", "margin", "passed"]

# sarnak writes every N up to this size, decades beyond it
DENSE_CHECKPOINTS = 10_000


@dataclass
class ExperimentConfig:
    """Serializable description of one run; identical configs give identical output bytes"""

    command: str
    map_file: Optional[str] = None
    dendrite_file: Optional[str] = None
    point: Optional[str] = None
    delta: Optional[float] = None
    eps: Optional[float] = None
    N: Optional[int] = None
    checkpoints: List[int] = field(default_factory=list)
    seed: int = 0
    out: Optional[str] = None
    record: Optional[str] = None
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def option(self, name: str, default: Any = None) -> Any:
        value = self.options.get(name)
        return default if value is None else value


@dataclass
class RunResult:
    """
    Output of one run.

    Attributes:
        rows: Table written as CSV
        checks: Pass/fail entries {id, name, value, bound, margin, passed}
        document: Emitted instead of rows: a Dendrite, DendriteMap or PeriodicStructure
            written in its file format, or the cell graph dict of decompose
    """

    command: str
    rows: List[dict] = field(default_factory=list)
    columns: Optional[List[str]] = None
    checks: List[dict] = field(default_factory=list)
    document: Any = None
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check["passed"] for check in self.checks)

    def to_record(self) -> dict:
        return {"command": self.command, "passed": self.passed, "checks": self.checks, "config": self.config}


def make_check(check_id: str, name: str, value: float, bound: Optional[float] = None,
               passed: Optional[bool] = None, upper: bool = True) -> dict:
    """Check entry; with a bound and no explicit verdict, passes when value <= bound (or >= when not upper)"""
    margin = None
    if bound is not None:
        margin = bound - value if upper else value - bound
        if passed is None:
            passed = margin >= 0
    return {"id": check_id, "name": name, "value": value, "bound": bound, "margin": margin, "passed": bool(passed)}


class ExperimentController:
    """Application controller that runs experiments against the services"""

    def __init__(self, app_config: Optional[AppConfig] = None):
        self.config = app_config or default_config
        self.overrides: Dict[str, Any] = {}
        self.statistics = {
            'runs_started': 0,
            'runs_completed': 0,
            'runs_failed': 0,
            'checks_passed': 0,
            'checks_failed': 0,
            'start_time': None,
            'last_run': None
        }
        self.callbacks = {
            'on_run_started': [],
            'on_run_completed': [],
            'on_check_failed': [],
            'on_error': []
        }
        self._tables = {}

    # ------------------------------------------------------------------
    # callbacks and configuration
    # ------------------------------------------------------------------

    def add_callback(self, event: str, callback: Callable):
        """
        Add callback function for events

        Args:
            event (str): Event name
            callback (Callable): Callback function
        """
        if event in self.callbacks:
            self.callbacks[event].append(callback)

    def trigger_callback(self, event: str, data: Dict):
        """
        Trigger callbacks for an event

        Args:
            event (str): Event name
            data (Dict): Event data
        """
        for callback in self.callbacks.get(event, []):
            try:
                callback(data)
            except Exception as e:
                logger.error(f"Callback error for {event}: {str(e)}")

    def update_config(self, **overrides):
        """
        Override configuration values for subsequent runs (flags beat environment)

        Raises:
            DomainError: on an unknown configuration key
        """
        current = self.get_config()
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in current:
                raise DomainError(f"unknown configuration key {key}")
            if current[key] == value:
                continue
            logger.info(f"CONFIG UPDATE: {key} changed from {current[key]} to {value}")
            self.overrides[key] = value

    def get_config(self) -> Dict:
        """Get current configuration"""
        merged = self.config.get_config_dict()
        merged.update(self.overrides)
        return merged

    def setting(self, key: str) -> Any:
        return self.get_config()[key]

    # ------------------------------------------------------------------
    # shared inputs
    # ------------------------------------------------------------------

    def table(self, N: int):
        """Sieve with bound >= N, cached across runs"""
        cached = [t for bound, t in self._tables.items() if bound >= N]
        if cached:
            return cached[0]
        table = sieve(N)
        self._tables[N] = table
        return table

    @staticmethod
    def _require(ec: ExperimentConfig, *names: str):
        missing = [name for name in names if getattr(ec, name) is None]
        if missing:
            raise DomainError(f"{ec.command} needs --{', --'.join(m.replace('_file', '') for m in missing)}")

    def observable(self, X: Dendrite, spec: str, delta: Optional[float] = None) -> Tuple[Callable, str]:
        """
        Observable from ``const``, ``step:<cell>`` (needs delta) or ``dist:<point-spec>``

        Raises:
            DomainError: on an unknown spec
        """
        kind, _, arg = spec.partition(":")
        if kind == "const":
            return ConstantObservable(float(arg) if arg else 1.0), spec
        if kind == "dist":
            return DistanceObservable(X, parse_point(X, arg)), spec
        if kind == "step":
            if delta is None:
                raise DomainError("step observables need --delta")
            cells = decompose(X, delta)
            return step_function(X, cells, int(arg), CellIndex(X, cells)), spec
        raise DomainError(f"unknown observable {spec!r}")

    def structure_inputs(self, ec: ExperimentConfig) -> Tuple[DendriteMap, PeriodicStructure, OmegaApprox, DPoint]:
        """
        Map, structure, L sample and base point of a structure run: either a
        dyadic candidate (``dyadic`` option) or a map file with a structure file.
        """
        dyadic = ec.option("dyadic")
        if dyadic:
            spec = parse_spec(dyadic)
            depth, k = int(ec.option("depth", 10)), int(ec.option("k", 1))
            if ec.option("host", "odometer") == "odometer":
                host = build_odometer(depth, spec)
                f = odometer_map(host)
                x = host.leaf(0)
                L = self._omega(f, x, samples=2 ** (depth + 1))
            else:
                host = build_gehman(spec, depth)
                f = shift_map(host)
                x = host.leaves[0]
                L = OmegaApprox(host.leaves, 0, len(host.leaves), 0.0)
            S = dyadic_structure(spec, host, k)
            if ec.point is not None:
                x = parse_point(f.dendrite, ec.point)
            return f, S, L, x

        self._require(ec, "map_file", "point")
        structure_file = ec.option("structure")
        if structure_file is None:
            raise DomainError(f"{ec.command} needs --structure or --dyadic")
        f = load_map(ec.map_file, self.setting('tau_pt'))
        S = load_structure(f.dendrite, structure_file)
        x = parse_point(f.dendrite, ec.point)
        return f, S, self._omega(f, x), x

    def _omega(self, f: DendriteMap, x: DPoint, samples: Optional[int] = None) -> OmegaApprox:
        return omega_limit(f, x, self.setting('omega_burn_in'),
                           max(self.setting('omega_samples'), samples or 0),
                           self.setting('omega_eps'), self.setting('cycle_horizon'))

    # ------------------------------------------------------------------
    # runs
    # ------------------------------------------------------------------

    def run_sieve(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "N")
        table = sieve(ec.N)
        emit = ec.option("emit", "mertens")
        n = np.arange(1, ec.N + 1)
        if emit == "mu":
            rows = [{"n": int(i), "mu": int(v)} for i, v in zip(n, table.mu[1:])]
        elif emit == "lambda":
            rows = [{"n": int(i), "lambda": int(v)} for i, v in zip(n, table.lam[1:])]
        elif emit == "mertens":
            rows = [{"N": int(i), "M": int(v)} for i, v in zip(n, table.mertens_series())]
        else:
            raise DomainError(f"unknown sieve output {emit!r}")
        return RunResult("sieve", rows)

    def run_decompose(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "dendrite_file", "delta")
        X = load_dendrite_or_map(ec.dendrite_file, self.setting('tau_pt'))
        if isinstance(X, DendriteMap):
            X = X.dendrite
        cells = decompose(X, ec.delta)
        rows = cell_rows(X, cells)
        largest = max(row["boundary_size"] for row in rows)
        checks = [
            make_check("decompose.boundary", "max boundary size", largest, 2),
            make_check("decompose.diameter", "max cell diameter", max(row["diameter"] for row in rows), ec.delta,
                       passed=all(row["diameter"] < ec.delta for row in rows)),
        ]
        document = cell_graph(X, cells) if ec.option("graph") else None
        return RunResult("decompose", rows, ["cell_id", "diameter", "boundary_size", "boundary_points"],
                         checks, document)

    def run_orbit(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "map_file", "point", "N")
        f = load_map(ec.map_file, self.setting('tau_pt'))
        x = parse_point(f.dendrite, ec.point)
        path = trajectory(f, x, ec.N, self.setting('cycle_horizon'))
        rows = [{"n": n, "point": json.dumps(path.point(n).to_spec())} for n in range(ec.N + 1)]
        return RunResult("orbit", rows, ["n", "point"])

    def run_omega(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "map_file", "point")
        f = load_map(ec.map_file, self.setting('tau_pt'))
        x = parse_point(f.dendrite, ec.point)
        if ec.eps is not None:
            self.update_config(omega_eps=ec.eps)
        L = self._omega(f, x)
        rows = [{"index": i, "point": json.dumps(p.to_spec())} for i, p in enumerate(L.points)]
        return RunResult("omega", rows, ["index", "point"])

    def run_entropy(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "map_file", "eps")
        f = load_map(ec.map_file, self.setting('tau_pt'))
        estimate = entropy_estimate(f, ec.eps, int(ec.option("n_max", 12)), self.setting('entropy_grid_density'),
                                    self.setting('entropy_max_grid'))
        rows = [dict(row, estimate=estimate.estimate) for row in estimate.table]
        return RunResult("entropy", rows, ["n", "separated", "grid_size", "spacing", "estimate"])

    def run_sarnak(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "map_file", "point", "N")
        f = load_map(ec.map_file, self.setting('tau_pt'))
        x = parse_point(f.dendrite, ec.point)
        phi, name = self.observable(f.dendrite, ec.option("obs", "const"), ec.delta)
        series = sarnak_sum(f, x, phi, self.table(ec.N), ec.N, ec.checkpoints or default_checkpoints(ec.N), name,
                            self.setting('cycle_horizon'))
        return RunResult("sarnak", [{"N": n, "S_N": s} for n, s in series.checkpoints], ["N", "S_N"])

    def run_verify_structure(self, ec: ExperimentConfig) -> RunResult:
        f, S, L, _ = self.structure_inputs(ec)
        eps = ec.eps if ec.eps is not None else self.setting('structure_eps')
        report = verify_structure(f, S, L, eps)
        checks = [make_check(f"structure.L{row['level']}.C{row['condition']}", f"level {row['level']} condition "
                             f"{row['condition']}", row["margin"], None, row["passed"]) for row in report.rows]
        return RunResult("verify-structure", report.rows,
                         ["level", "alpha", "condition", "passed", "margin", "detail"], checks)

    def run_bound(self, ec: ExperimentConfig) -> RunResult:
        self._require(ec, "N", "delta")
        f, S, _, x = self.structure_inputs(ec)
        X = f.dendrite
        cells = decompose(X, ec.delta)
        report = bound_experiment(f, x, cells, S, self.table(ec.N), ec.N, ec.option("level"), ec.checkpoints or None,
                                  self.setting('n0_horizon'), self.setting('cycle_horizon'))
        tolerance = self.setting('bound_tolerance')
        periodic_tolerance = self.setting('periodic_tolerance')
        checks = [
            make_check("bound.total", "max sum |A_N^j|", report.max_total, report.bound + tolerance),
            make_check("bound.boundary_slots", "max boundary-type slots", report.max_boundary_slots, 2),
            make_check("bound.periodic", "max periodic-type |A_N^j|", report.max_periodic, periodic_tolerance),
            make_check("bound.split", "splitting identity error", report.split_error, 1e-10),
        ]
        rows = [dict(row, level=report.level, alpha=report.alpha, n0=report.n0) for row in report.slot_rows]
        return RunResult("bound", rows, ["level", "alpha", "n0", "cell_id", "slot", "type", "A_N"], checks)

    def run_gehman(self, ec: ExperimentConfig) -> RunResult:
        spec = parse_spec(ec.option("spec", "full"))
        depth = int(ec.option("depth", 4))
        emit = ec.option("emit", "report")
        if ec.option("host", "prefix") == "odometer":
            host: Any = build_odometer(depth, spec)
            f = odometer_map(host)
        else:
            host = build_gehman(spec, depth)
            f = shift_map(host) if depth >= 2 else None
        if emit == "dendrite":
            return RunResult("gehman", document=host.dendrite)
        if emit == "map":
            if f is None:
                raise DomainError("the shift map needs depth >= 2")
            return RunResult("gehman", document=f)
        if emit == "structure":
            return RunResult("gehman", document=dyadic_structure(spec, host, int(ec.option("k", 1))))
        if emit != "report":
            raise DomainError(f"unknown gehman output {emit!r}")
        if isinstance(host, OdometerApprox):
            rows = [{"quantity": "leaves", "value": 2 ** depth}]
            return RunResult("gehman", rows, ["quantity", "value"])

        counts = word_complexity(spec, depth)
        rows = [{"quantity": f"p({n})", "value": p} for n, p in enumerate(counts, start=1)]
        leaves = len(host.dendrite.endpoint_vertices()) - 1
        rows.append({"quantity": "leaves", "value": leaves})
        checks = [make_check("gehman.leaves", "leaf count equals p(n)", leaves, None, leaves == counts[-1])]
        if f is not None:
            conjugacy = verify_conjugacy(host, f)
            rows += [{"quantity": "conjugacy_checks", "value": conjugacy.checks},
                     {"quantity": "conjugacy_passed", "value": int(conjugacy.passed)},
                     {"quantity": "image_covers_previous_level", "value": int(conjugacy.image_covers_previous_level)}]
            checks.append(make_check("gehman.conjugacy", "address shift conjugacy", conjugacy.checks, None,
                                     conjugacy.passed))
        return RunResult("gehman", rows, ["quantity", "value"], checks)

    def report(self, results: Sequence[dict]) -> RunResult:
        """
        Consolidated pass/fail table over prior result records; an empty set gives an empty table.
        """
        rows = []
        for record in results:
            for check in record.get("checks", []):
                rows.append({column: check.get(column) for column in REPORT_COLUMNS})
        checks = [dict(row) for row in rows]
        return RunResult("report", rows, REPORT_COLUMNS, checks)

    # ------------------------------------------------------------------
    # dispatch
    # ------------------------------------------------------------------

    RUNNERS = {
        "sieve": "run_sieve",
        "decompose": "run_decompose",
        "orbit": "run_orbit",
        "omega": "run_omega",
        "entropy": "run_entropy",
        "sarnak": "run_sarnak",
        "verify-structure": "run_verify_structure",
        "bound": "run_bound",
        "gehman": "run_gehman",
    }

    def execute(self, ec: ExperimentConfig, results: Optional[Sequence[dict]] = None) -> RunResult:
        """
        Run one experiment, update statistics and fire callbacks

        Raises:
            DomainError: on an unknown command; service errors propagate
        """
        if ec.command != "report" and ec.command not in self.RUNNERS:
            raise DomainError(f"unknown command {ec.command!r}")
        if self.statistics['start_time'] is None:
            self.statistics['start_time'] = datetime.now()
        self.statistics['runs_started'] += 1
        self.trigger_callback('on_run_started', {'command': ec.command})

        try:
            if ec.command == "report":
                result = self.report(results or [])
            else:
                result = getattr(self, self.RUNNERS[ec.command])(ec)
        except Exception as e:
            self.statistics['runs_failed'] += 1
            self.trigger_callback('on_error', {'command': ec.command, 'error': str(e)})
            raise

        result.config = dict(ec.to_dict(), settings=self.get_config())
        passed = sum(1 for check in result.checks if check["passed"])
        self.statistics['checks_passed'] += passed
        self.statistics['checks_failed'] += len(result.checks) - passed
        self.statistics['runs_completed'] += 1
        self.statistics['last_run'] = datetime.now()
        for check in result.checks:
            if not check["passed"]:
                self.trigger_callback('on_check_failed', dict(check, command=ec.command))
        self.trigger_callback('on_run_completed', {'command': ec.command, 'passed': result.passed})

        if ec.record:
            Path(ec.record).parent.mkdir(parents=True, exist_ok=True)
            with open(ec.record, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(result.to_record(), sort_keys=True, default=str) + "\n")
        logger.info(f"{ec.command}: {len(result.rows)} rows, {passed}/{len(result.checks)} checks passed")
        return result

    def get_statistics(self) -> Dict:
        return dict(self.statistics)


def load_records(paths: Sequence[str]) -> List[dict]:
    """
    Read ndjson result records

    Raises:
        DomainError: if a file is missing or a line is not JSON
    """
    records = []
    for path in paths:
        if not Path(path).exists():
            raise DomainError(f"result file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            for number, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        records.append(json.loads(line))
                    except json.JSONDecodeError:
                        raise DomainError(f"{path}:{number} is not a JSON record")
    return records


def default_checkpoints(N: int) -> List[int]:
    """Every N' <= N for small N, otherwise powers of ten plus N itself"""
    if N <= DENSE_CHECKPOINTS:
        return list(range(1, N + 1))
    decades = [10 ** e for e in range(1, len(str(N))) if 10 ** e <= N]
    return sorted(set(decades + [N]))
