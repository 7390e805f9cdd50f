#!/usr/bin/env python3
"""
Decomposition Service
Two-stage cell decompositions of a dendrite and the step observables built on them.

The coarse stage cuts edges at regular order-2 points so every cell is small.
The refinement stage cuts a cell with three or more boundary points at the
branch vertices of the hull of its boundary, leaving at most two boundary
points per cell.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from src.services.dendrite import Dendrite, DPoint, Subdendrite, point_key
from src.services.errors import DecompositionError, DomainError

logger = logging.getLogger(__name__)

Observable = Callable[[DPoint], float]


@dataclass(frozen=True)
class Cell:
    """Closed cell body with its boundary cut points; the open cell is body minus boundary"""

    body: Subdendrite
    boundary: Tuple[DPoint, ...]
    diameter: float

    def in_closure(self, X: Dendrite, p: DPoint) -> bool:
        return X.contains(self.body, p)

    def on_boundary(self, X: Dendrite, p: DPoint) -> bool:
        return any(X.same_point(p, b) for b in self.boundary)

    def in_interior(self, X: Dendrite, p: DPoint) -> bool:
        return self.in_closure(X, p) and not self.on_boundary(X, p)

    def sample_point(self, X: Dendrite) -> DPoint:
        """A point of the open cell"""
        for e, lo, hi in self.body.segments:
            if hi > lo:
                return X.point(e, 0.5 * (lo + hi))
        for v in sorted(self.body.vertices):
            p = DPoint.at(v)
            if not self.on_boundary(X, p):
                return p
        raise DomainError("cell has an empty interior")


def _split(X: Dendrite, body: Subdendrite, edge_cuts: Dict[int, List[float]],
           vertex_cuts: Set[int], outer_boundary: Sequence[DPoint]) -> List[Cell]:
    """
    Cut ``body`` at interior edge positions and at vertices, regrouping the
    resulting atoms across every uncut vertex.
    """
    atoms: List[Tuple[int, float, float]] = []
    for e, lo, hi in body.segments:
        positions = [lo] + sorted(t for t in edge_cuts.get(e, ()) if lo + X.tau < t < hi - X.tau) + [hi]
        atoms.extend((e, a, b) for a, b in zip(positions, positions[1:]))

    groups = nx.utils.UnionFind(range(len(atoms)))
    at_vertex: Dict[int, List[int]] = {}
    for i, (e, a, b) in enumerate(atoms):
        for t in (a, b):
            w = X._end_vertex(e, t)
            if w is not None and w not in vertex_cuts:
                at_vertex.setdefault(w, []).append(i)
    for members in at_vertex.values():
        for i in members[1:]:
            groups.union(members[0], i)

    grouped: Dict[int, List[int]] = {}
    for i in range(len(atoms)):
        grouped.setdefault(groups[i], []).append(i)

    cut_points: List[DPoint] = [DPoint.at(w) for w in sorted(vertex_cuts)]
    for e, ts in edge_cuts.items():
        cut_points.extend(X.point(e, t) for t in ts)

    cells = []
    for members in sorted(grouped.values(), key=lambda m: atoms[m[0]]):
        segments = {}
        vertices = set()
        for i in members:
            e, a, b = atoms[i]
            segments[e] = (a, b)
            for t in (a, b):
                w = X._end_vertex(e, t)
                if w is not None:
                    vertices.add(w)
        piece = X.subdendrite(segments, vertices)
        boundary = [p for p in list(outer_boundary) + cut_points if X.contains(piece, p)]
        unique: Dict[tuple, DPoint] = {}
        for p in boundary:
            unique.setdefault(point_key(p), p)
        cells.append(Cell(piece, tuple(unique.values()), X.diameter(piece)))
    if not atoms:
        cells.append(Cell(body, tuple(outer_boundary), 0.0))
    return cells


def coarse_decompose(X: Dendrite, delta: float) -> List[Cell]:
    """
    Coarse cells of diameter < delta cut at order-2 points.

    An edge touching a vertex of degree >= 2 is cut into k >= 2 equal pieces
    shorter than delta/2, so a cell around a vertex is a star of short pieces; an
    isolated edge is cut into pieces shorter than delta.

    Args:
        X (Dendrite): Dendrite to decompose
        delta (float): Diameter bound

    Returns:
        List[Cell]: coarse cells in canonical order

    Raises:
        DomainError: if delta <= 0
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    whole = X.whole()
    if not X.n_edges:
        return [Cell(whole, (), 0.0)]
    diameter = X.diameter()
    if diameter < delta:
        return [Cell(whole, (), diameter)]

    edge_cuts: Dict[int, List[float]] = {}
    for e, (u, v, length) in enumerate(X.edges):
        branchy = X.degree(u) >= 2 or X.degree(v) >= 2
        limit = delta / 2.0 if branchy else delta
        k = math.floor(length / limit) + 1
        if branchy:
            k = max(k, 2)
        edge_cuts[e] = [i / k for i in range(1, k)]
    cells = _split(X, whole, edge_cuts, set(), ())
    logger.debug(f"coarse_decompose: {len(cells)} cells for delta={delta}")
    return cells


def refine_cell(X: Dendrite, V: Cell) -> List[Cell]:
    """
    Split a coarse cell so every piece has at most two boundary points.

    T is the hull of the boundary; cutting at the branch vertices of T leaves
    arcs of T between consecutive cuts, each carrying the side branches that
    attach to its interior. Side branches attached at a branch vertex of T
    become cells of their own with that vertex as single boundary point.

    Raises:
        DecompositionError: if V has no boundary but is not the whole dendrite
    """
    p = len(V.boundary)
    if p == 0 and V.body != X.whole():
        raise DecompositionError("coarse cell without boundary points is not the whole dendrite")
    if p <= 2:
        return [V]
    T = X.convex_hull(V.boundary)
    branch = {w for w in T.vertices if X.order_in(T, DPoint.at(w)) >= 3}
    return _split(X, V.body, {}, branch, V.boundary)


@dataclass
class DecompositionReport:
    passed: bool
    cells: int
    violations: List[str] = field(default_factory=list)
    grid_points: int = 0
    incidence_deviations: int = 0


class CellIndex:
    """Lookup of the cells whose closure contains a point"""

    def __init__(self, X: Dendrite, cells: Sequence[Cell]):
        self.X = X
        self.cells = list(cells)
        self.by_edge: Dict[int, List[Tuple[float, float, int]]] = {}
        self.by_vertex: Dict[int, List[int]] = {}
        for i, cell in enumerate(self.cells):
            for e, lo, hi in cell.body.segments:
                self.by_edge.setdefault(e, []).append((lo, hi, i))
            for v in cell.body.vertices:
                self.by_vertex.setdefault(v, []).append(i)
        self.incidence: Dict[tuple, int] = {}
        self.boundary_points: Dict[tuple, DPoint] = {}
        for cell in self.cells:
            for b in cell.boundary:
                key = point_key(b)
                self.boundary_points.setdefault(key, b)
                self.incidence[key] = self.incidence.get(key, 0) + 1

    def containing(self, p: DPoint) -> List[int]:
        if p.vertex is not None:
            return list(self.by_vertex.get(p.vertex, ()))
        tau = self.X.tau
        return [i for lo, hi, i in self.by_edge.get(p.edge, ()) if lo - tau <= p.t <= hi + tau]

    def incidence_of(self, p: DPoint) -> int:
        return self.incidence.get(point_key(p), 1)

    def psi(self, i: int, p: DPoint) -> float:
        cell = self.cells[i]
        if not cell.in_closure(self.X, p):
            return 0.0
        for b in cell.boundary:
            if self.X.same_point(p, b):
                return 1.0 / self.incidence_of(b)
        return 1.0

    def psi_sum(self, p: DPoint) -> float:
        return sum(self.psi(i, p) for i in self.containing(p))


def verify_decomposition(X: Dendrite, cells: Sequence[Cell], delta: float) -> DecompositionReport:
    """
    Re-check cover, diameters, sparse overlap, boundary sizes and the partition of unity.

    Returns:
        DecompositionReport: passed is True only with zero violations
    """
    violations: List[str] = []
    index = CellIndex(X, cells)
    grid = X.grid(delta / 10.0) if X.n_edges else [DPoint.at(0)]

    for p in grid:
        if not index.containing(p):
            violations.append(f"cover: {p} lies in no cell")
    for i, cell in enumerate(cells):
        if cell.diameter >= delta:
            violations.append(f"diameter: cell {i} has diameter {cell.diameter:.6g} >= {delta}")
        if len(cell.boundary) > 2:
            violations.append(f"boundary: cell {i} has {len(cell.boundary)} boundary points")

    pairs: Set[Tuple[int, int]] = set()
    for members in index.by_vertex.values():
        pairs.update((a, b) for a in members for b in members if a < b)
    for intervals in index.by_edge.values():
        for lo, hi, i in intervals:
            for lo2, hi2, j in intervals:
                if i < j and lo <= hi2 + X.tau and lo2 <= hi + X.tau:
                    pairs.add((i, j))
    for i, j in sorted(pairs):
        common = X.intersect(cells[i].body, cells[j].body)
        if not common.is_empty and not common.is_point:
            violations.append(f"overlap: cells {i} and {j} share more than one point")

    for p in grid:
        total = index.psi_sum(p)
        if abs(total - 1.0) > 1e-12:
            violations.append(f"partition: psi sum {total:.17g} at {p}")

    deviations = sum(1 for key, count in index.incidence.items()
                     if count != X.order(index.boundary_points[key]))
    report = DecompositionReport(not violations, len(cells), violations, len(grid), deviations)
    if deviations:
        logger.info(f"decomposition: {deviations} boundary points use incidence count instead of order")
    return report


def decompose(X: Dendrite, delta: float) -> List[Cell]:
    """
    Coarse cells followed by refinement, re-verified before returning.

    Raises:
        DomainError: if delta <= 0
        DecompositionError: if any cell property fails
    """
    cells = [refined for coarse in coarse_decompose(X, delta) for refined in refine_cell(X, coarse)]
    report = verify_decomposition(X, cells, delta)
    if not report.passed:
        raise DecompositionError("; ".join(report.violations[:5]))
    logger.info(f"decompose: {len(cells)} cells for delta={delta}")
    return cells


# ----------------------------------------------------------------------
# observables
# ----------------------------------------------------------------------

@dataclass
class StepObservable:
    """psi_i: 1 on the open cell, 1/(incident cells) on its boundary, 0 elsewhere"""

    index: CellIndex
    cell_id: int

    def __call__(self, p: DPoint) -> float:
        return self.index.psi(self.cell_id, p)

    @property
    def cell(self) -> Cell:
        return self.index.cells[self.cell_id]


@dataclass
class DistanceObservable:
    """Arc-length distance to a base point (1-Lipschitz)"""

    X: Dendrite
    base: DPoint
    lipschitz: float = 1.0

    def __call__(self, p: DPoint) -> float:
        return self.X.distance(p, self.base)


@dataclass
class ConstantObservable:
    value: float = 1.0
    lipschitz: float = 0.0

    def __call__(self, p: DPoint) -> float:
        return self.value


def step_function(X: Dendrite, cells: Sequence[Cell], i: int, index: Optional[CellIndex] = None) -> StepObservable:
    """
    Step observable of cell i.

    Raises:
        DomainError: if the cell index is out of range or the cell has empty interior
    """
    if not 0 <= i < len(cells):
        raise DomainError(f"cell index {i} out of range")
    cells[i].sample_point(X)
    return StepObservable(index or CellIndex(X, cells), i)


@dataclass
class Approximation:
    """phi_0 = sum c_i psi_i with its error bound and measured grid error"""

    coefficients: List[float]
    samples: List[DPoint]
    index: CellIndex
    bound: Optional[float]
    measured_error: float

    def __call__(self, p: DPoint) -> float:
        return sum(self.coefficients[i] * self.index.psi(i, p) for i in self.index.containing(p))


def approximate(X: Dendrite, phi: Observable, cells: Sequence[Cell], lipschitz: Optional[float] = None,
                spacing: Optional[float] = None) -> Approximation:
    """
    Step approximation of phi by its values at interior samples.

    Args:
        phi: Observable evaluable on X
        lipschitz (float): Lipschitz constant of phi, if known; defaults to phi.lipschitz
        spacing (float): Grid spacing for the measured error (default: smallest diameter / 10)

    Returns:
        Approximation: bound is lipschitz * max cell diameter when a constant is known
    """
    index = CellIndex(X, cells)
    samples = [cell.sample_point(X) for cell in cells]
    coefficients = [float(phi(y)) for y in samples]
    if lipschitz is None:
        lipschitz = getattr(phi, "lipschitz", None)
    max_diameter = max(cell.diameter for cell in cells)
    bound = lipschitz * max_diameter if lipschitz is not None else None

    approximation = Approximation(coefficients, samples, index, bound, 0.0)
    if X.n_edges:
        positive = [cell.diameter for cell in cells if cell.diameter > 0]
        step = spacing or (min(positive) / 10.0 if positive else X.total_length() / 100.0)
        grid = X.grid(step)
    else:
        grid = [DPoint.at(0)]
    approximation.measured_error = max(abs(phi(p) - approximation(p)) for p in grid)
    return approximation


def cell_rows(X: Dendrite, cells: Sequence[Cell]) -> List[dict]:
    """Cell report rows: cell_id, diameter, boundary_size, boundary_points"""
    return [
        {
            "cell_id": i,
            "diameter": cell.diameter,
            "boundary_size": len(cell.boundary),
            "boundary_points": " ".join(str(b) for b in cell.boundary),
        }
        for i, cell in enumerate(cells)
    ]


def cell_graph(X: Dendrite, cells: Sequence[Cell]) -> dict:
    """Edge-colored description: every cell segment tagged with its cell id"""
    return {
        "vertices": X.n_vertices,
        "edges": [[u, v, length] for u, v, length in X.edges],
        "segments": [
            {"edge": e, "lo": lo, "hi": hi, "cell": i}
            for i, cell in enumerate(cells)
            for e, lo, hi in cell.body.segments
        ],
        "boundary": [
            {"cell": i, "point": b.to_spec()} for i, cell in enumerate(cells) for b in cell.boundary
        ],
    }
