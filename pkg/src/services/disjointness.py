#!/usr/bin/env python3
"""
Disjointness Service
Sarnak sums along dendrite-map orbits, verification of nested periodic
structures, the fixed-point complement analysis and the per-slot bound
experiment on step observables.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.services.arith import SieveTable, check_gap, running_averages
from src.services.decomposition import Cell, CellIndex
from src.services.dendrite import Dendrite, DPoint, Subdendrite
from src.services.dynamics import (
    DEFAULT_CYCLE_HORIZON,
    DendriteMap,
    OmegaApprox,
    OrbitPath,
    preimages,
    trajectory,
)
from src.services.errors import DiagnosticError, DomainError, GapConditionError, OrbitNotCapturedError

logger = logging.getLogger(__name__)

DEFAULT_STRUCTURE_EPS = 1e-3
DEFAULT_N0_HORIZON = 10_000

Observable = Callable[[DPoint], float]


@dataclass(frozen=True)
class StructureLevel:
    D: Subdendrite
    n: int


@dataclass
class PeriodicStructure:
    """
    Nested candidates D_1, D_2, ... with n_k >= 2 and cumulative periods
    alpha_k = n_1 ... n_k; ``base`` plays the role of D_0 with alpha_0 = 1.
    """

    levels: List[StructureLevel]
    base: Optional[Subdendrite] = None
    label: str = ""

    @property
    def alphas(self) -> List[int]:
        result, alpha = [], 1
        for level in self.levels:
            alpha *= level.n
            result.append(alpha)
        return result

    def alpha(self, k: int) -> int:
        return 1 if k == 0 else self.alphas[k - 1]

    def D(self, k: int) -> Subdendrite:
        return self.base if k == 0 else self.levels[k - 1].D

    def validate(self, X: Dendrite):
        """
        Raises:
            DomainError: on an empty candidate or a level with n < 2
        """
        for k, level in enumerate(self.levels, start=1):
            if level.n < 2:
                raise DomainError(f"level {k} has n={level.n}; every level needs n >= 2")
            if level.D.is_empty:
                raise DomainError(f"level {k} candidate is empty")
            for e, _, _ in level.D.segments:
                if not 0 <= e < X.n_edges:
                    raise DomainError(f"level {k} candidate uses unknown edge {e}")


# ----------------------------------------------------------------------
# Sarnak sums
# ----------------------------------------------------------------------

@dataclass
class SumSeries:
    """S_N at the requested checkpoints"""

    checkpoints: List[Tuple[int, float]]
    observable: str
    start: int = 1

    def value(self, N: int) -> float:
        return dict(self.checkpoints)[N]


def orbit_values(path: OrbitPath, phi: Observable, N: int) -> np.ndarray:
    """phi(f^n x) for n = 0..N, evaluating phi once per stored orbit point"""
    stored = np.array([float(phi(p)) for p in path.points])
    return stored[path.indices(N)]


def sarnak_sum(f: DendriteMap, x: DPoint, phi: Observable, table: SieveTable, N: int,
               checkpoints: Optional[Sequence[int]] = None, observable: str = "phi",
               horizon: int = DEFAULT_CYCLE_HORIZON, path: Optional[OrbitPath] = None) -> SumSeries:
    """
    S_N(x, phi) = (1/N) sum_{n=1}^{N} mu(n) phi(f^n x) at every checkpoint.

    Args:
        checkpoints: Values N' <= N (default: N only)
        path (OrbitPath): Precomputed trajectory reused across observables

    Raises:
        DomainError: if N exceeds the sieve bound or a checkpoint is out of range
    """
    if not 1 <= N <= table.N:
        raise DomainError(f"N={N} outside the sieve range 1..{table.N}")
    checkpoints = sorted(set(checkpoints or []) | {N})
    if checkpoints[0] < 1 or checkpoints[-1] > N:
        raise DomainError(f"checkpoints must lie in 1..{N}")
    path = path or trajectory(f, x, N, horizon)
    values = orbit_values(path, phi, N)[1:]
    averages = running_averages(table.mu[1:N + 1] * values)
    return SumSeries([(c, float(averages[c - 1])) for c in checkpoints], observable)


# ----------------------------------------------------------------------
# structure verification
# ----------------------------------------------------------------------

def iterate_image(f: DendriteMap, Y: Subdendrite, k: int) -> Subdendrite:
    for _ in range(k):
        Y = f.image(Y)
    return Y


def inclusion_margin(X: Dendrite, A: Subdendrite, B: Subdendrite) -> float:
    """sup over A of d(., B); for a subdendrite B it is attained at an endpoint of A"""
    return max(X.distance_to(B, p) for p in X.endpoints(A))


def subdendrite_gap(X: Dendrite, A: Subdendrite, B: Subdendrite) -> float:
    """d(A, B), 0 when they meet"""
    if not X.intersect(A, B).is_empty:
        return 0.0
    a = X.first_point_map(A, X._anchor(B))
    return X.distance(a, X.first_point_map(B, a))


def _nearest_slot(X: Dendrite, slots: Sequence[Subdendrite], p: DPoint) -> Tuple[int, float]:
    distances = [X.distance_to(s, p) for s in slots]
    i = int(np.argmin(distances))
    return i, float(distances[i])


@dataclass
class StructureReport:
    passed: bool
    eps: float
    rows: List[dict] = field(default_factory=list)

    @property
    def failed_conditions(self) -> List[Tuple[int, int]]:
        return [(row["level"], row["condition"]) for row in self.rows if not row["passed"]]

    def condition_passed(self, condition: int, level: Optional[int] = None) -> bool:
        return all(row["passed"] for row in self.rows
                   if row["condition"] == condition and (level is None or row["level"] == level))


def verify_structure(f: DendriteMap, S: PeriodicStructure, L_sample: OmegaApprox,
                     eps: float = DEFAULT_STRUCTURE_EPS) -> StructureReport:
    """
    Check the five structure conditions at every level.

    1. f^alpha(D) is contained in D within eps
    2. the slots f^i(D), i < alpha, are pairwise disjoint with gap > eps
    3. every sample of L lies within eps of some slot
    4. the n_j images f^{i alpha_{j-1}}(D_j) lie in D_{j-1} within eps
    5. f moves the samples of slot i onto the samples of slot i+1 (Hausdorff
       matching, ties to the lower slot index)

    Raises:
        DomainError: on a malformed structure
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    X = f.dendrite
    S.validate(X)
    if S.base is None:
        S.base = X.whole()
    samples = list(L_sample.points)
    rows: List[dict] = []

    def record(k: int, alpha: int, condition: int, passed: bool, margin: float, detail: str = ""):
        rows.append({"level": k, "alpha": alpha, "condition": condition, "passed": bool(passed),
                     "margin": float(margin), "detail": detail})

    for k, level in enumerate(S.levels, start=1):
        alpha = S.alpha(k)
        slots = [level.D]
        for _ in range(1, alpha):
            slots.append(f.image(slots[-1]))

        margin = inclusion_margin(X, f.image(slots[-1]), level.D)
        record(k, alpha, 1, margin <= eps, margin)

        gap, witness = np.inf, ""
        for i in range(alpha):
            for j in range(i + 1, alpha):
                g = subdendrite_gap(X, slots[i], slots[j])
                if g < gap:
                    gap, witness = g, f"slots {i} and {j}"
        record(k, alpha, 2, gap > eps, gap if np.isfinite(gap) else 0.0, witness)

        nearest = [_nearest_slot(X, slots, p) for p in samples]
        worst = max((d for _, d in nearest), default=np.inf)
        record(k, alpha, 3, worst <= eps, worst if np.isfinite(worst) else 0.0,
               "" if samples else "empty sample")

        parent = S.D(k - 1)
        image = level.D
        worst_nest = inclusion_margin(X, image, parent)
        for _ in range(1, level.n):
            image = iterate_image(f, image, S.alpha(k - 1))
            worst_nest = max(worst_nest, inclusion_margin(X, image, parent))
        record(k, alpha, 4, worst_nest <= eps, worst_nest)

        groups: List[List[DPoint]] = [[] for _ in range(alpha)]
        for p, (i, d) in zip(samples, nearest):
            if d <= eps:
                groups[i].append(p)
        shift_ok, shift_margin, detail = True, 0.0, ""
        for i in range(alpha):
            moved = [f.eval(p) for p in groups[i]]
            if not moved:
                shift_ok, detail = False, f"slot {i} holds no samples"
                break
            distances = [X.hausdorff(moved, g) for g in groups]
            target = int(np.argmin(distances))
            shift_margin = max(shift_margin, distances[(i + 1) % alpha])
            if target != (i + 1) % alpha or distances[target] > eps:
                shift_ok, detail = False, f"slot {i} maps to slot {target}"
                break
        record(k, alpha, 5, shift_ok, shift_margin, detail)

    report = StructureReport(all(row["passed"] for row in rows), eps, rows)
    logger.info(f"verify_structure: {S.label or 'structure'} "
                f"{'passed' if report.passed else 'failed ' + str(report.failed_conditions)}")
    return report


# ----------------------------------------------------------------------
# fixed-point complement
# ----------------------------------------------------------------------

@dataclass
class ComplementReport:
    """
    Slots l_k = L meets C_k for the components C_k of M minus Y_a.

    Attributes:
        sigma: slot index of f(l_k) per slot (None where undefined)
        is_n_cycle: sigma is one cycle through all n > 1 slots
    """

    fixed_point: DPoint
    depth: int
    preimage_count: int
    n_slots: int
    slots: List[List[DPoint]]
    sigma: List[Optional[int]]
    sigma_well_defined: bool
    is_n_cycle: bool
    slot_map_ok: bool
    slot_map_margin: float
    order_in_M: int
    samples_in_Y: int
    hull: Subdendrite
    flag: str = ""


def analyze_fixed_point_complement(f: DendriteMap, a: DPoint, L_sample: OmegaApprox, depth: int,
                                   eps: float = DEFAULT_STRUCTURE_EPS) -> ComplementReport:
    """
    Slot analysis of L around a fixed point a.

    Raises:
        DomainError: if a is not fixed or depth < 0
    """
    X = f.dendrite
    X.check_point(a)
    if not X.same_point(f.eval(a), a):
        raise DomainError(f"{a} is not a fixed point")
    if depth < 0:
        raise DomainError("depth must be non-negative")
    samples = list(L_sample.points)
    if not samples:
        raise DomainError("L sample is empty")

    F = preimages(f, a, depth).points
    Y = X.convex_hull(F)
    M = X.convex_hull(samples)
    components = X.components_minus(Y)

    by_component: Dict[int, List[DPoint]] = {}
    in_Y = 0
    for p in samples:
        c = X.component_of(Y, components, p)
        if c is None:
            in_Y += 1
        else:
            by_component.setdefault(c, []).append(p)
    order = sorted(by_component)
    slots = [by_component[c] for c in order]
    slot_of = {c: i for i, c in enumerate(order)}

    sigma: List[Optional[int]] = []
    for group in slots:
        targets = {slot_of.get(X.component_of(Y, components, f.eval(p)), -1) for p in group}
        sigma.append(targets.pop() if len(targets) == 1 and -1 not in targets else None)
    well_defined = all(s is not None for s in sigma)

    n = len(slots)
    is_cycle = False
    if well_defined and n > 1 and sorted(sigma) == list(range(n)):
        i, steps = 0, 0
        while True:
            i, steps = sigma[i], steps + 1
            if i == 0:
                break
        is_cycle = steps == n

    margin = 0.0
    if well_defined:
        for k, group in enumerate(slots):
            margin = max(margin, X.hausdorff([f.eval(p) for p in group], slots[sigma[k]]))
    flag = ""
    if not well_defined:
        flag = "sigma is not well defined on the slots"
    elif not is_cycle:
        flag = "not an n-cycle with n>1"

    report = ComplementReport(a, depth, len(F), n, slots, sigma, well_defined, is_cycle,
                              well_defined and margin <= eps, margin, X.order_in(M, a), in_Y, Y, flag)
    logger.info(f"analyze_fixed_point_complement: {n} slots, sigma={sigma}, cycle={is_cycle}")
    return report


def structure_from_complement(f: DendriteMap, report: ComplementReport, max_rounds: int = 50) -> PeriodicStructure:
    """
    One-level candidate J = closure of the union of f^{mn}(s_1), s_1 = [l_1],
    grown until the hull stops changing.

    Raises:
        DomainError: if sigma is not an n-cycle
    """
    if not report.is_n_cycle:
        raise DomainError("complement analysis did not find an n-cycle on the slots")
    X = f.dendrite
    n = report.n_slots
    J = X.convex_hull(report.slots[0])
    for _ in range(max_rounds):
        grown = X.join(J, iterate_image(f, J, n))
        if X.hausdorff(X.endpoints(grown), X.endpoints(J)) <= X.tau:
            break
        J = grown
    else:
        logger.warning(f"structure_from_complement: hull still growing after {max_rounds} rounds")
    return PeriodicStructure([StructureLevel(J, n)], X.whole(), f"complement of {report.fixed_point}")


# ----------------------------------------------------------------------
# bound experiment
# ----------------------------------------------------------------------

@dataclass
class BoundReport:
    """
    Per-cell split of S_N(x, psi_i) into the prefix term, the slot averages
    A_N^j and the remainder outside every slot.
    """

    level: int
    alpha: int
    n0: int
    entry_slot: int
    N: int
    bound: float
    slot_rows: List[dict] = field(default_factory=list)
    cell_rows: List[dict] = field(default_factory=list)
    series: Dict[Tuple[int, int], List[Tuple[int, float]]] = field(default_factory=dict)
    split_error: float = 0.0
    split_errors: Dict[int, float] = field(default_factory=dict)

    @property
    def max_total(self) -> float:
        return max((row["sum_abs_A"] for row in self.cell_rows), default=0.0)

    @property
    def max_boundary_slots(self) -> int:
        return max((row["boundary_slots"] for row in self.cell_rows), default=0)

    @property
    def max_periodic(self) -> float:
        return max((abs(row["A_N"]) for row in self.slot_rows if row["type"] == "periodic"), default=0.0)


def _interior_test(X: Dendrite, Y: Subdendrite) -> Callable[[DPoint], bool]:
    gates = X.boundary_points(Y)
    return lambda p: X.contains(Y, p) and not any(X.same_point(p, g) for g in gates)


def bound_experiment(f: DendriteMap, x: DPoint, cells: Sequence[Cell], S: PeriodicStructure, table: SieveTable,
                     N: int, level: Optional[int] = None, checkpoints: Optional[Sequence[int]] = None,
                     horizon: int = DEFAULT_N0_HORIZON, cycle_horizon: int = DEFAULT_CYCLE_HORIZON) -> BoundReport:
    """
    Per-slot averages A_N^j = (1/N) sum_{n=n0}^{N} mu(n) psi(f^n x) 1_{f^j(D)}(f^n x)
    for every step observable psi of the decomposition.

    A slot is boundary-type for a cell when it contains one of the cell's
    boundary points, periodic-type otherwise. Within a boundary-type slot the
    nonzero terms are checked to be at least alpha apart before the gap bound
    applies.

    Args:
        level (int): Structure level k (default: deepest)
        horizon (int): Scan length for the entry index n0

    Raises:
        DomainError: if N exceeds the sieve bound or the level is missing
        OrbitNotCapturedError: if the orbit enters no slot interior within horizon
        DiagnosticError: if a boundary-type slot violates the alpha gap
    """
    X = f.dendrite
    S.validate(X)
    if not 1 <= N <= table.N:
        raise DomainError(f"N={N} outside the sieve range 1..{table.N}")
    k = len(S.levels) if level is None else level
    if not 1 <= k <= len(S.levels):
        raise DomainError(f"structure has no level {k}")
    alpha = S.alpha(k)
    slots = [S.D(k)]
    for _ in range(1, alpha):
        slots.append(f.image(slots[-1]))
    interiors = [_interior_test(X, s) for s in slots]

    path = trajectory(f, x, max(N, horizon), cycle_horizon)
    n0 = entry = None
    for n in range(horizon + 1):
        p = path.point(n)
        hit = [j for j in range(alpha) if interiors[j](p)]
        if hit:
            n0, entry = n, hit[0]
            break
    if n0 is None:
        raise OrbitNotCapturedError(horizon)

    index = path.indices(N)
    membership = np.full(len(path.points), -1, dtype=np.int64)
    for i, p in enumerate(path.points):
        for j, slot in enumerate(slots):
            if X.contains(slot, p):
                membership[i] = j
                break
    slot_of_n = membership[index]
    tail = np.arange(N + 1) >= max(n0, 1)

    checkpoints = sorted(set(checkpoints or []) | {N})
    if checkpoints[0] < 1 or checkpoints[-1] > N:
        raise DomainError(f"checkpoints must lie in 1..{N}")
    marks = np.asarray(checkpoints)
    cell_index = CellIndex(X, cells)
    mu = table.mu[:N + 1].astype(float)
    touching: Dict[int, List[int]] = {}
    for s, p in enumerate(path.points):
        for i in cell_index.containing(p):
            touching.setdefault(i, []).append(s)
    report = BoundReport(k, alpha, n0, entry, N, 2.0 / alpha)

    for i, cell in enumerate(cells):
        stored = np.zeros(len(path.points))
        for s in touching.get(i, ()):
            stored[s] = cell_index.psi(i, path.points[s])
        boundary_slots = {j for j, slot in enumerate(slots) for b in cell.boundary if X.contains(slot, b)}
        if not np.any(stored):
            report.slot_rows.extend({"cell_id": i, "slot": j, "A_N": 0.0,
                                     "type": "boundary" if j in boundary_slots else "periodic"}
                                    for j in range(alpha))
            report.cell_rows.append({"cell_id": i, "prefix": 0.0, "outside": 0.0, "S_N": 0.0, "sum_abs_A": 0.0,
                                     "boundary_slots": len(boundary_slots), "bound": 2.0 / alpha})
            continue
        psi = stored[index]
        terms = mu * psi
        terms[0] = 0.0
        prefix = float(terms[~tail].sum()) / N

        total_abs, slot_sum = 0.0, 0.0
        slot_at = np.zeros(len(marks))
        for j in range(alpha):
            in_slot = tail & (slot_of_n == j)
            slot_terms = np.where(in_slot, terms, 0.0)
            kind = "boundary" if j in boundary_slots else "periodic"
            if kind == "boundary":
                hits = np.where(in_slot[1:] & (psi[1:] != 0), 1.0, 0.0)
                try:
                    check_gap(hits, alpha)
                except GapConditionError as err:
                    raise DiagnosticError(f"cell {i}, slot {j}: {err}") from err
            if np.any(slot_terms):
                averages = running_averages(slot_terms[1:])
                A = float(averages[-1])
                slot_at += averages[marks - 1]
                report.series[(i, j)] = [(c, float(averages[c - 1])) for c in checkpoints]
            else:
                A = 0.0
            total_abs += abs(A)
            slot_sum += A
            report.slot_rows.append({"cell_id": i, "slot": j, "type": kind, "A_N": A})

        outside = float(np.where(tail & (slot_of_n < 0), terms, 0.0).sum()) / N
        direct_at = running_averages(terms[1:])[marks - 1]
        prefix_at = np.cumsum(np.where(tail, 0.0, terms))[marks] / marks
        outside_at = np.cumsum(np.where(tail & (slot_of_n < 0), terms, 0.0))[marks] / marks
        errors = np.abs(direct_at - (prefix_at + slot_at + outside_at))
        for c, err in zip(checkpoints, errors):
            report.split_errors[c] = max(report.split_errors.get(c, 0.0), float(err))
        direct = float(direct_at[-1])
        report.cell_rows.append({
            "cell_id": i,
            "prefix": prefix,
            "outside": outside,
            "S_N": direct,
            "sum_abs_A": total_abs,
            "boundary_slots": len(boundary_slots),
            "bound": 2.0 / alpha,
        })

    report.split_error = max(report.split_errors.values(), default=0.0)
    logger.info(f"bound_experiment: level {k}, alpha {alpha}, n0 {n0}, max sum |A| {report.max_total:.3g}")
    return report
