#!/usr/bin/env python3
"""
Dynamics Service
Piecewise-linear dendrite maps and the orbit-level computations built on them:
orbits with cycle detection, omega-limit nets, fixed and periodic points,
preimages, pair classification and separated-set entropy estimates.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.services.dendrite import Dendrite, DPoint, Subdendrite, point_key, random_point
from src.services.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_CYCLE_HORIZON = 10_000
DEFAULT_BURN_IN = 1000
DEFAULT_SAMPLES = 10_000
DEFAULT_OMEGA_EPS = 1e-3
DEFAULT_GRID_DENSITY = 4.5
DEFAULT_MAX_GRID = 2_000_000


@dataclass(frozen=True)
class _Lap:
    """Image arc of one knot interval, as ordered edge pieces with cumulative lengths"""

    start: DPoint
    end: DPoint
    edges: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    total: float
    start_packed: Tuple[int, float]


class DendriteMap:
    """
    Continuous self-map of a dendrite given by vertex images and optional
    subdivision points; every knot interval runs along the arc between the
    images of its ends at constant speed.
    """

    def __init__(self, dendrite: Dendrite, vertex_images: Sequence[DPoint],
                 subdivisions: Optional[Iterable[Tuple[int, float, DPoint]]] = None):
        """
        Args:
            dendrite (Dendrite): Base dendrite X
            vertex_images: Image point of every vertex, indexed by vertex id
            subdivisions: (edge, t, image) triples with 0 < t < 1

        Raises:
            DomainError: on missing images, points off X or bad positions
        """
        X = dendrite
        self.dendrite = X
        images = list(vertex_images)
        if len(images) != X.n_vertices:
            raise DomainError(f"expected {X.n_vertices} vertex images, got {len(images)}")
        for p in images:
            X.check_point(p)
        self.vertex_images: Tuple[DPoint, ...] = tuple(images)

        extra: Dict[int, List[Tuple[float, DPoint]]] = {}
        for e, t, image in subdivisions or ():
            e, t = int(e), float(t)
            if not 0 <= e < X.n_edges:
                raise DomainError(f"subdivision on unknown edge {e}")
            if not 0.0 < t < 1.0:
                raise DomainError(f"subdivision position {t} on edge {e} must lie in (0, 1)")
            X.check_point(image)
            extra.setdefault(e, []).append((t, image))

        self._knots: List[np.ndarray] = []
        self._knot_images: List[List[DPoint]] = []
        self._laps: List[List[_Lap]] = []
        for e, (u, v, _) in enumerate(X.edges):
            knots = [0.0]
            knot_images = [images[u]]
            for t, image in sorted(extra.get(e, []), key=lambda item: item[0]):
                if t - knots[-1] <= X.tau or 1.0 - t <= X.tau:
                    continue
                knots.append(t)
                knot_images.append(image)
            knots.append(1.0)
            knot_images.append(images[v])
            self._knots.append(np.asarray(knots))
            self._knot_images.append(knot_images)
            self._laps.append([self._make_lap(a, b) for a, b in zip(knot_images, knot_images[1:])])

    def _make_lap(self, a: DPoint, b: DPoint) -> _Lap:
        X = self.dendrite
        pieces, _ = X._path_pieces(a, b)
        edges = np.array([e for e, _, _ in pieces], dtype=np.int64)
        t0 = np.array([s for _, s, _ in pieces], dtype=float)
        t1 = np.array([s for _, _, s in pieces], dtype=float)
        lengths = np.abs(t1 - t0) * X._edge_len[edges] if pieces else np.zeros(0)
        ends = np.cumsum(lengths)
        packed = X.pack([a])
        return _Lap(a, b, edges, t0, t1, ends - lengths, ends, float(ends[-1]) if pieces else 0.0,
                    (int(packed[0][0]), float(packed[1][0])))

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------

    def knots(self, edge: int) -> np.ndarray:
        return self._knots[edge]

    def subdivisions(self) -> List[Tuple[int, float, DPoint]]:
        result = []
        for e, knots in enumerate(self._knots):
            for k in range(1, len(knots) - 1):
                result.append((e, float(knots[k]), self._knot_images[e][k]))
        return result

    def eval(self, p: DPoint) -> DPoint:
        if p.vertex is not None:
            return self.vertex_images[p.vertex]
        knots = self._knots[p.edge]
        k = int(np.searchsorted(knots, p.t, side="right")) - 1
        k = min(max(k, 0), len(knots) - 2)
        if abs(p.t - knots[k]) <= self.dendrite.tau:
            return self._knot_images[p.edge][k]
        s = (p.t - knots[k]) / (knots[k + 1] - knots[k])
        return self._along(self._laps[p.edge][k], s)

    __call__ = eval

    def _along(self, lap: _Lap, s: float) -> DPoint:
        if lap.total <= 0.0:
            return lap.start
        target = s * lap.total
        j = min(int(np.searchsorted(lap.ends, target, side="left")), len(lap.ends) - 1)
        step = (target - lap.starts[j]) / self.dendrite.edge_length(int(lap.edges[j]))
        lo, hi = min(lap.t0[j], lap.t1[j]), max(lap.t0[j], lap.t1[j])
        t = lap.t0[j] + step if lap.t1[j] > lap.t0[j] else lap.t0[j] - step
        return self.dendrite.point(int(lap.edges[j]), min(max(t, lo), hi))

    def eval_many(self, edges: np.ndarray, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorized eval on packed (edge, t) arrays"""
        out_edges = np.empty_like(edges)
        out_ts = np.empty_like(ts)
        for e in np.unique(edges):
            mask = np.nonzero(edges == e)[0]
            knots = self._knots[e]
            t = ts[mask]
            k = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
            s = (t - knots[k]) / (knots[k + 1] - knots[k])
            for kk in np.unique(k):
                sub = mask[k == kk]
                lap = self._laps[e][kk]
                out_edges[sub], out_ts[sub] = self._along_many(lap, s[k == kk])
        return out_edges, out_ts

    def _along_many(self, lap: _Lap, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if lap.total <= 0.0:
            return np.full(len(s), lap.start_packed[0]), np.full(len(s), lap.start_packed[1])
        target = s * lap.total
        j = np.minimum(np.searchsorted(lap.ends, target, side="left"), len(lap.ends) - 1)
        step = (target - lap.starts[j]) / self.dendrite._edge_len[lap.edges[j]]
        t = lap.t0[j] + np.sign(lap.t1[j] - lap.t0[j]) * step
        return lap.edges[j], np.clip(t, 0.0, 1.0)

    def lipschitz(self) -> float:
        """Largest constant speed over all knot intervals"""
        best = 0.0
        for e, laps in enumerate(self._laps):
            knots = self._knots[e]
            length = self.dendrite.edge_length(e)
            for k, lap in enumerate(laps):
                best = max(best, lap.total / ((knots[k + 1] - knots[k]) * length))
        return best

    def image(self, Y: Subdendrite) -> Subdendrite:
        """Exact image f(Y): the hull of the images of Y's breakpoints and interior knots"""
        X = self.dendrite
        points = X.breakpoints(Y)
        for e, lo, hi in Y.segments:
            points.extend(X.point(e, float(t)) for t in self._knots[e][1:-1] if lo < t < hi)
        return X.convex_hull([self.eval(p) for p in points])

    def to_dict(self) -> dict:
        return {
            "dendrite": self.dendrite.to_dict(),
            "vertex_images": {str(v): p.to_spec() for v, p in enumerate(self.vertex_images)},
            "subdivisions": [[e, t, p.to_spec()] for e, t, p in self.subdivisions()],
        }


def compose(f: DendriteMap, g: DendriteMap) -> DendriteMap:
    """
    Exact PL composition f o g.

    New knots sit where an image arc of g crosses a vertex or a knot of f.
    """
    X = g.dendrite
    subdivisions = []
    for e in range(X.n_edges):
        knots = g._knots[e]
        for k, lap in enumerate(g._laps[e]):
            a, b = knots[k], knots[k + 1]
            if k > 0:
                subdivisions.append((e, float(a), f.eval(g._knot_images[e][k])))
            if lap.total <= 0.0:
                continue
            for j in range(len(lap.edges)):
                e2 = int(lap.edges[j])
                t0, t1 = lap.t0[j], lap.t1[j]
                lo, hi = min(t0, t1), max(t0, t1)
                length = X.edge_length(e2)
                crossings = [(lap.starts[j] + abs(t - t0) * length, X.point(e2, float(t)))
                             for t in f._knots[e2][1:-1] if lo + X.tau < t < hi - X.tau]
                if j > 0:
                    crossings.append((lap.starts[j], X.point(e2, float(t0))))
                for position, q in crossings:
                    t = a + (position / lap.total) * (b - a)
                    if a + X.tau < t < b - X.tau:
                        subdivisions.append((e, float(t), f.eval(q)))
    images = [f.eval(p) for p in g.vertex_images]
    return DendriteMap(X, images, subdivisions)


def power(f: DendriteMap, k: int) -> DendriteMap:
    if k < 0:
        raise DomainError("iterate index must be non-negative")
    result = identity_map(f.dendrite)
    for _ in range(k):
        result = compose(f, result)
    return result


# ----------------------------------------------------------------------
# standard maps
# ----------------------------------------------------------------------

def identity_map(X: Dendrite) -> DendriteMap:
    return DendriteMap(X, [DPoint.at(v) for v in range(X.n_vertices)])


def tent_map() -> DendriteMap:
    """Tent map on the path 0 - M - 1 with two edges of length 1/2"""
    X = Dendrite(3, [(0, 1, 0.5), (1, 2, 0.5)])
    return DendriteMap(X, [DPoint.at(0), DPoint.at(2), DPoint.at(0)])


def branch_rotation(k: int, length: float = 1.0) -> DendriteMap:
    """k-star with hub 0 whose branches are cyclically permuted"""
    if k < 2:
        raise DomainError("a branch rotation needs at least two branches")
    X = Dendrite(k + 1, [(0, i, length) for i in range(1, k + 1)])
    return DendriteMap(X, [DPoint.at(0)] + [DPoint.at(i % k + 1) for i in range(1, k + 1)])


def random_map(X: Dendrite, seed: Optional[int] = None) -> DendriteMap:
    rng = np.random.default_rng(seed)
    return DendriteMap(X, [random_point(X, rng) for _ in range(X.n_vertices)])


# ----------------------------------------------------------------------
# fixed points, periodic points, preimages
# ----------------------------------------------------------------------

@dataclass
class FixedPointSet:
    """Isolated fixed points plus degenerate segments of fixed points"""

    points: List[DPoint]
    segments: List[Tuple[int, float, float]] = field(default_factory=list)
    entire_space: bool = False


def _dedupe(X: Dendrite, points: Iterable[DPoint], tol: float) -> List[DPoint]:
    kept: List[DPoint] = []
    for p in sorted(points, key=lambda q: q.sort_key()):
        if not any(X.same_point(p, q, tol) for q in kept):
            kept.append(p)
    return kept


def fixed_points(f: DendriteMap, tol: float = 1e-9) -> FixedPointSet:
    """
    Solve f(p) = p lap by lap.

    On every knot interval the image parameter along each piece of the image arc
    lying on the same edge is linear in the domain parameter, so each pair gives
    one linear equation (or a whole segment when it is degenerate).

    Args:
        f (DendriteMap): Map to analyze
        tol (float): Distance tolerance for accepting a solution

    Returns:
        FixedPointSet: never empty for a valid map
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    X = f.dendrite
    found: List[DPoint] = [DPoint.at(v) for v in range(X.n_vertices)
                           if X.same_point(f.vertex_images[v], DPoint.at(v), tol)]
    segments: List[Tuple[int, float, float]] = []

    for e in range(X.n_edges):
        knots = f._knots[e]
        length = X.edge_length(e)
        for k, lap in enumerate(f._laps[e]):
            a, b = knots[k], knots[k + 1]
            width = b - a
            if lap.total <= 0.0:
                A = lap.start
                if A.edge == e and a - tol <= A.t <= b + tol:
                    found.append(A)
                continue
            for j in np.nonzero(lap.edges == e)[0]:
                sign = 1.0 if lap.t1[j] > lap.t0[j] else -1.0
                s_lo, s_hi = lap.starts[j] / lap.total, lap.ends[j] / lap.total
                coef = sign * lap.total / length - width
                rhs = a - lap.t0[j] + sign * lap.starts[j] / length
                if abs(coef) <= 1e-12:
                    if abs(rhs) <= 1e-12:
                        lo, hi = a + max(s_lo, 0.0) * width, a + min(s_hi, 1.0) * width
                        segments.append((e, float(lo), float(hi)))
                        found.extend([X.point(e, float(lo)), X.point(e, float(hi))])
                    continue
                s = rhs / coef
                if s_lo - 1e-12 <= s <= s_hi + 1e-12 and -1e-12 <= s <= 1.0 + 1e-12:
                    p = X.point(e, float(a + min(max(s, 0.0), 1.0) * width))
                    if X.same_point(f.eval(p), p, tol):
                        found.append(p)

    covered: Dict[int, float] = {}
    for e, lo, hi in segments:
        covered[e] = covered.get(e, 0.0) + (hi - lo)
    entire = all(covered.get(e, 0.0) >= 1.0 - tol for e in range(X.n_edges)) and len(found) > 0
    if not X.n_edges:
        entire = bool(found)
    points = _dedupe(X, found, tol)
    logger.debug(f"fixed_points: {len(points)} points, {len(segments)} segments")
    return FixedPointSet(points, sorted(segments), entire)


def periodic_points(f: DendriteMap, max_period: int, tol: float = 1e-9) -> List[Tuple[DPoint, int]]:
    """
    Points with least period at most ``max_period``, as (point, least period) pairs.

    Raises:
        DomainError: if max_period < 1
    """
    if max_period < 1:
        raise DomainError("max_period must be at least 1")
    X = f.dendrite
    result: List[Tuple[DPoint, int]] = []
    iterate = f
    for k in range(1, max_period + 1):
        if k > 1:
            iterate = compose(f, iterate)
        for p in fixed_points(iterate, tol).points:
            q, period = p, k
            for d in range(1, k + 1):
                q = f.eval(q)
                if X.same_point(q, p, tol):
                    period = d
                    break
            if period == k and not any(X.same_point(p, r, tol) for r, _ in result):
                result.append((p, k))
    return sorted(result, key=lambda item: (item[1], item[0].sort_key()))


@dataclass
class PreimageSet:
    points: List[DPoint]
    collapsed: bool = False


def preimage_step(f: DendriteMap, q: DPoint) -> PreimageSet:
    """All p with f(p) = q, by inverting every lap; collapsed laps contribute their ends"""
    X = f.dendrite
    points: List[DPoint] = []
    collapsed = False
    for v in range(X.n_vertices):
        if X.same_point(f.vertex_images[v], q):
            points.append(DPoint.at(v))
    for e in range(X.n_edges):
        knots = f._knots[e]
        for k, lap in enumerate(f._laps[e]):
            a, b = knots[k], knots[k + 1]
            if lap.total <= 0.0:
                if X.same_point(lap.start, q):
                    collapsed = True
                    points.extend([X.point(e, float(a)), X.point(e, float(b))])
                continue
            positions = []
            for j in range(len(lap.edges)):
                e2 = int(lap.edges[j])
                t0, t1 = lap.t0[j], lap.t1[j]
                if q.vertex is not None:
                    if X._end_vertex(e2, t0) == q.vertex:
                        positions.append(lap.starts[j])
                    if X._end_vertex(e2, t1) == q.vertex:
                        positions.append(lap.ends[j])
                elif e2 == q.edge and min(t0, t1) - X.tau <= q.t <= max(t0, t1) + X.tau:
                    positions.append(lap.starts[j] + abs(q.t - t0) * X.edge_length(e2))
            for position in positions:
                points.append(X.point(e, float(a + (position / lap.total) * (b - a))))
    unique = {}
    for p in points:
        unique.setdefault(point_key(p), p)
    return PreimageSet(sorted(unique.values(), key=lambda p: p.sort_key()), collapsed)


def preimages(f: DendriteMap, p: DPoint, depth: int) -> PreimageSet:
    """Union of f^-k(p) for k <= depth"""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    f.dendrite.check_point(p)
    found = {point_key(p): p}
    frontier = [p]
    collapsed = False
    for _ in range(depth):
        next_frontier = []
        for q in frontier:
            step = preimage_step(f, q)
            collapsed = collapsed or step.collapsed
            for r in step.points:
                key = point_key(r)
                if key not in found:
                    found[key] = r
                    next_frontier.append(r)
        frontier = next_frontier
        if not frontier:
            break
    return PreimageSet(sorted(found.values(), key=lambda q: q.sort_key()), collapsed)


# ----------------------------------------------------------------------
# orbits
# ----------------------------------------------------------------------

@dataclass
class OrbitPath:
    """
    Orbit x, f(x), f^2(x), ... stored once.

    When a cycle was detected ``points`` holds the preperiod followed by one
    period and later indices wrap around; otherwise it holds the explicit orbit.
    """

    points: List[DPoint]
    preperiod: int
    period: Optional[int] = None

    def index(self, n: int) -> int:
        if self.period is None or n < self.preperiod:
            return n
        return self.preperiod + (n - self.preperiod) % self.period

    def indices(self, N: int) -> np.ndarray:
        """Storage index of f^n(x) for n = 0..N"""
        n = np.arange(N + 1, dtype=np.int64)
        if self.period is None:
            return n
        return np.where(n < self.preperiod, n, self.preperiod + (n - self.preperiod) % self.period)

    def point(self, n: int) -> DPoint:
        return self.points[self.index(n)]


def find_cycle(f: DendriteMap, x: DPoint, limit: int, tol: Optional[float] = None) -> Optional[Tuple[int, int]]:
    """Floyd cycle detection; returns (preperiod, period) or None within ``limit`` steps"""
    X = f.dendrite
    same = lambda p, q: X.same_point(p, q, tol)
    tortoise, hare = f.eval(x), f.eval(f.eval(x))
    steps = 1
    while not same(tortoise, hare):
        steps += 1
        if steps > limit:
            return None
        tortoise, hare = f.eval(tortoise), f.eval(f.eval(hare))
    preperiod = 0
    tortoise = x
    while not same(tortoise, hare):
        tortoise, hare = f.eval(tortoise), f.eval(hare)
        preperiod += 1
        if preperiod > limit:
            return None
    period = 1
    hare = f.eval(tortoise)
    while not same(tortoise, hare):
        hare = f.eval(hare)
        period += 1
        if period > limit:
            return None
    return preperiod, period


def trajectory(f: DendriteMap, x: DPoint, N: int, horizon: int = DEFAULT_CYCLE_HORIZON,
               tol: Optional[float] = None) -> OrbitPath:
    """
    Orbit up to index N; eventually periodic orbits are stored as preperiod plus one cycle.

    Args:
        f (DendriteMap): Map
        x (DPoint): Starting point
        N (int): Last orbit index needed
        horizon (int): Step budget for cycle detection
    """
    if N < 0:
        raise DomainError("N must be non-negative")
    f.dendrite.check_point(x)
    cycle = find_cycle(f, x, max(1, min(N, horizon)), tol) if N > 0 else None
    if cycle is not None:
        preperiod, period = cycle
        points = [x]
        for _ in range(preperiod + period - 1):
            points.append(f.eval(points[-1]))
        return OrbitPath(points, preperiod, period)
    if N > horizon:
        logger.info(f"no cycle within {horizon} steps; iterating {N} steps explicitly")
    points = [x]
    for _ in range(N):
        points.append(f.eval(points[-1]))
    return OrbitPath(points, N, None)


def orbit(f: DendriteMap, x: DPoint, N: int) -> List[DPoint]:
    """[x, f(x), ..., f^N(x)]"""
    path = trajectory(f, x, N)
    return [path.point(n) for n in range(N + 1)]


@dataclass
class OmegaApprox:
    points: List[DPoint]
    burn_in: int
    samples: int
    resolution: float
    finite_cycle: bool = False
    period: Optional[int] = None


def greedy_net(X: Dendrite, points: Sequence[DPoint], eps: float) -> List[DPoint]:
    """Keep a point only when it is farther than eps from every point kept before it"""
    if not points:
        return []
    children, heights = X.rooted_many(points)
    kept: List[int] = []
    for i in range(len(points)):
        if kept:
            idx = np.asarray(kept)
            if X.rooted_distance(children[idx], heights[idx], children[i], heights[i]).min() <= eps:
                continue
        kept.append(i)
    return [points[i] for i in kept]


def omega_limit(f: DendriteMap, x: DPoint, B: int = DEFAULT_BURN_IN, M: int = DEFAULT_SAMPLES,
                eps: float = DEFAULT_OMEGA_EPS, horizon: int = DEFAULT_CYCLE_HORIZON) -> OmegaApprox:
    """
    eps-net of the orbit points with indices in [B, B + M].

    Raises:
        DomainError: if B or M is below 1 or eps is not positive
    """
    if B < 1 or M < 1:
        raise DomainError("burn-in and sample count must be at least 1")
    if eps <= 0:
        raise DomainError("resolution must be positive")
    path = trajectory(f, x, B + M, horizon)
    slots = path.indices(B + M)[B:]
    _, first = np.unique(slots, return_index=True)
    candidates = [path.points[slots[i]] for i in sorted(first)]
    net = greedy_net(f.dendrite, candidates, eps)
    logger.debug(f"omega_limit: {len(candidates)} distinct tail points, net of {len(net)}")
    return OmegaApprox(net, B, M, eps, path.period is not None, path.period)


@dataclass
class PairClassification:
    label: str
    min_distance: float
    tail_max: float
    tail_min: float
    tail_separations: int
    horizon: int


def classify_pair(f: DendriteMap, x: DPoint, y: DPoint, horizon: int,
                  delta_prox: float, delta_asym: float) -> PairClassification:
    """
    Finite-horizon evidence for the pair (x, y); labels are candidates only.

    The tail window is the second half of [0, horizon].
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    if delta_prox <= 0 or delta_asym <= 0:
        raise DomainError("thresholds must be positive")
    X = f.dendrite
    px, py = trajectory(f, x, horizon), trajectory(f, y, horizon)
    cx, hx = X.rooted_many([px.point(n) for n in range(horizon + 1)])
    cy, hy = X.rooted_many([py.point(n) for n in range(horizon + 1)])
    d = X.rooted_distance(cx, hx, cy, hy)
    tail = d[horizon // 2:]
    min_distance, tail_max, tail_min = float(d.min()), float(tail.max()), float(tail.min())
    separations = int(np.count_nonzero(tail > delta_asym))

    if min_distance < delta_prox and tail_max <= delta_asym:
        label = "asymptotic"
    elif tail_min < delta_prox and separations >= 2:
        label = "li_yorke_candidate"
    elif min_distance < delta_prox:
        label = "proximal_only"
    else:
        label = "neither"
    return PairClassification(label, min_distance, tail_max, tail_min, separations, horizon)


@dataclass
class NestedArcResult:
    found: bool
    k: Optional[int]
    p: Optional[int]
    horizon: int


def nested_arc_search(f: DendriteMap, a: DPoint, x: DPoint, y: DPoint, horizon: int,
                      tol: float = 1e-9) -> NestedArcResult:
    """Smallest k + p <= 2*horizon with [a, f^k(x)] contained in [a, f^p(y)]; not-found is no claim"""
    X = f.dendrite
    ox = [trajectory(f, x, horizon).point(n) for n in range(horizon + 1)]
    oy = [trajectory(f, y, horizon).point(n) for n in range(horizon + 1)]
    da_x = X.pairwise_distances([a], ox)[0]
    da_y = X.pairwise_distances([a], oy)[0]
    between = X.pairwise_distances(ox, oy)
    nested = da_x[:, None] + between <= da_y[None, :] + tol
    hits = np.argwhere(nested)
    if not len(hits):
        return NestedArcResult(False, None, None, horizon)
    k, p = min(hits.tolist(), key=lambda kp: (kp[0] + kp[1], kp[0]))
    return NestedArcResult(True, int(k), int(p), horizon)


# ----------------------------------------------------------------------
# entropy
# ----------------------------------------------------------------------

@dataclass
class EntropyEstimate:
    """Greedy lower-bound estimate with its per-n table"""

    estimate: float
    table: List[Dict[str, float]]
    epsilon: float
    grid_density: float
    capped: bool = False


def _separated_count(X: Dendrite, children: np.ndarray, heights: np.ndarray, eps: float) -> int:
    """
    Greedy maximal (n, eps)-separated subset of orbit arrays of shape (n, G).

    |h_i - h_i'| <= d_i, so a candidate can only be rejected by kept points whose
    heights fall in neighbouring eps-buckets at the keyed times.
    """
    n, count = heights.shape
    key_times = sorted({0, n - 1, (n - 1) // 2})
    keys = np.floor(heights[key_times] / eps).astype(np.int64).T
    offsets = list(itertools.product((-1, 0, 1), repeat=len(key_times)))
    buckets: Dict[tuple, List[int]] = {}
    kept = 0
    for i in range(count):
        key = tuple(keys[i])
        near: List[int] = []
        for offset in offsets:
            near.extend(buckets.get(tuple(k + o for k, o in zip(key, offset)), ()))
        if near:
            idx = np.asarray(near)
            d = X.rooted_distance(children[:, idx], heights[:, idx], children[:, i:i + 1], heights[:, i:i + 1])
            if not np.all(d.max(axis=0) > eps):
                continue
        buckets.setdefault(key, []).append(i)
        kept += 1
    return kept


def _window_slope(table: List[Dict[str, float]], n_max: int) -> float:
    """Least-squares slope of log sep(n) over [ceil(n_max / 2), n_max], clipped at 0"""
    window = table[math.ceil(n_max / 2) - 1:]
    ns = np.array([row["n"] for row in window], dtype=float)
    logs = np.log([row["separated"] for row in window])
    if np.all(logs == logs[0]):
        return 0.0
    centered = ns - ns.mean()
    return max(0.0, float(np.dot(centered, logs - logs.mean()) / np.dot(centered, centered)))


def _sample_table(f: DendriteMap, eps: float, n_max: int, points: Sequence[DPoint]) -> List[Dict[str, float]]:
    X = f.dendrite
    edges, ts = X.pack(points)
    children = np.empty((n_max, len(points)), dtype=np.int64)
    heights = np.empty((n_max, len(points)), dtype=float)
    for i in range(n_max):
        children[i], heights[i] = X.rooted_packed(edges, ts)
        if i < n_max - 1:
            edges, ts = f.eval_many(edges, ts)
    table = []
    for n in range(1, n_max + 1):
        separated = _separated_count(X, children[:n], heights[:n], eps)
        table.append({"n": n, "separated": separated, "grid_size": len(points), "spacing": 0.0})
        logger.debug(f"entropy: n={n} sample={len(points)} sep={separated}")
    return table


def entropy_estimate(f: DendriteMap, eps: float, n_max: int, grid_density: float = DEFAULT_GRID_DENSITY,
                     max_grid: int = DEFAULT_MAX_GRID, points: Optional[Sequence[DPoint]] = None) -> EntropyEstimate:
    """
    Separated-set entropy estimate.

    The grid at step n has spacing eps / (grid_density * Lambda_n) with
    Lambda_n = max over i < n of Lip(f^i). The estimate is the least-squares slope
    of log sep(n) over n in [ceil(n_max / 2), n_max], clipped at 0.

    With ``points`` the separated sets are taken inside that fixed sample
    instead of the grid; each sep(n) is still a lower bound.

    Raises:
        DomainError: if eps <= 0, n_max < 2 or ``points`` is empty
        ConfigurationError: if grid_density < 4 (grid coarser than eps / 4)
    """
    if eps <= 0 or n_max < 2:
        raise DomainError("entropy_estimate needs eps > 0 and n_max >= 2")
    if grid_density < 4:
        raise ConfigurationError(f"grid_density {grid_density} gives spacing above eps/4")
    X = f.dendrite
    if not X.n_edges:
        table = [{"n": n, "separated": 1, "grid_size": 1, "spacing": 0.0} for n in range(1, n_max + 1)]
        return EntropyEstimate(0.0, table, eps, grid_density)
    if points is not None:
        points = list(points)
        if not points:
            raise DomainError("entropy sample is empty")
        table = _sample_table(f, eps, n_max, points)
        return EntropyEstimate(_window_slope(table, n_max), table, eps, grid_density)

    lips = [1.0]
    iterate = f
    for _ in range(1, n_max - 1):
        lips.append(max(lips[-1], iterate.lipschitz()))
        iterate = compose(f, iterate)
    lips.append(max(lips[-1], iterate.lipschitz()))

    table = []
    capped = False
    for n in range(1, n_max + 1):
        spacing = eps / (grid_density * max(1.0, lips[n - 1]))
        estimated = X.total_length() / spacing
        if estimated > max_grid:
            spacing = X.total_length() / max_grid
            capped = True
            logger.warning(f"entropy grid for n={n} capped at {max_grid} points; sep({n}) is a weaker lower bound")
        grid = X.grid(spacing)
        edges, ts = X.pack(grid)
        children = np.empty((n, len(grid)), dtype=np.int64)
        heights = np.empty((n, len(grid)), dtype=float)
        for i in range(n):
            children[i], heights[i] = X.rooted_packed(edges, ts)
            if i < n - 1:
                edges, ts = f.eval_many(edges, ts)
        separated = _separated_count(X, children, heights, eps)
        table.append({"n": n, "separated": separated, "grid_size": len(grid), "spacing": spacing})
        logger.debug(f"entropy: n={n} grid={len(grid)} sep={separated}")

    return EntropyEstimate(_window_slope(table, n_max), table, eps, grid_density, capped)
