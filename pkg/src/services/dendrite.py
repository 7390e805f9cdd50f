#!/usr/bin/env python3
"""
Dendrite Core Service
Finite metric-tree model of dendrites: points, arcs, first point maps,
convex hulls and the components of a complement.

All distance queries run on a copy of the tree rooted at vertex 0. A point is
reduced to its rooted coordinates (child vertex of its edge, height above the
root) and lowest common ancestors come from an Euler tour with a sparse table,
so distances between whole point arrays are computed with numpy.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from src.services.errors import DendriteFormatError, DomainError

logger = logging.getLogger(__name__)

# Point equality tolerance in normalized edge coordinates
TAU_PT = 1e-9

Piece = Tuple[int, float, float]


@dataclass(frozen=True)
class DPoint:
    """A vertex (``vertex`` set) or an interior edge point (``edge`` and 0 < t < 1)"""

    vertex: Optional[int] = None
    edge: Optional[int] = None
    t: float = 0.0

    def __post_init__(self):
        if (self.vertex is None) == (self.edge is None):
            raise DomainError("a point is either a vertex or an interior edge position")
        if self.edge is not None and not 0.0 < self.t < 1.0:
            raise DomainError(f"interior position t={self.t} must lie in (0, 1); use the vertex form")

    @classmethod
    def at(cls, vertex: int) -> "DPoint":
        return cls(vertex=int(vertex))

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def sort_key(self) -> Tuple[int, int, float]:
        if self.vertex is not None:
            return (0, self.vertex, 0.0)
        return (1, self.edge, self.t)

    def to_spec(self) -> list:
        """Point-spec form used by the JSON formats: [vertex] or [edge, t]"""
        if self.vertex is not None:
            return [self.vertex]
        return [self.edge, self.t]

    def __str__(self) -> str:
        if self.vertex is not None:
            return f"v{self.vertex}"
        return f"e{self.edge}@{self.t:.17g}"


@dataclass(frozen=True)
class Subdendrite:
    """
    Closed connected subset of a dendrite.

    Attributes:
        segments: sorted (edge, t_lo, t_hi) intervals; t_lo == t_hi only for a single interior point
        vertices: vertices contained in the set
    """

    segments: Tuple[Piece, ...] = ()
    vertices: FrozenSet[int] = frozenset()

    @cached_property
    def _by_edge(self) -> Dict[int, Tuple[float, float]]:
        return {e: (lo, hi) for e, lo, hi in self.segments}

    def segment(self, edge: int) -> Optional[Tuple[float, float]]:
        return self._by_edge.get(edge)

    @property
    def is_empty(self) -> bool:
        return not self.segments and not self.vertices

    @property
    def is_point(self) -> bool:
        if any(hi > lo for _, lo, hi in self.segments):
            return False
        return len(self.segments) + len(self.vertices) == 1

    def single_point(self) -> DPoint:
        if not self.is_point:
            raise DomainError("subdendrite is not a single point")
        if self.vertices:
            return DPoint.at(next(iter(self.vertices)))
        e, lo, _ = self.segments[0]
        return DPoint(edge=e, t=lo)

    def contains(self, p: DPoint, tau: float = TAU_PT) -> bool:
        if p.vertex is not None:
            return p.vertex in self.vertices
        seg = self._by_edge.get(p.edge)
        return seg is not None and seg[0] - tau <= p.t <= seg[1] + tau


@dataclass(frozen=True)
class Component:
    """Closure of one component of X minus Y, with its gate point on Y"""

    body: Subdendrite
    attachment: DPoint
    edge: int
    direction: int  # +1 leaves the attachment toward t = 1


def point_key(p: DPoint, digits: int = 9) -> tuple:
    """Hashable key for a canonical point, rounding interior positions"""
    if p.vertex is not None:
        return ("v", p.vertex)
    return ("e", p.edge, round(p.t, digits))


class Dendrite:
    """
    Finite metric tree with dense vertex ids 0..n-1.

    Edges are canonicalized to (min id, max id, length) and sorted; the edge id
    is the index into that order and t is measured from the lower vertex id.
    """

    def __init__(self, n_vertices: int, edges: Iterable[Sequence], tau: float = TAU_PT):
        """
        Validate and index a tree.

        Args:
            n_vertices (int): Number of vertices
            edges: Iterable of (u, v, length) triples
            tau (float): Point equality tolerance in normalized edge coordinates

        Raises:
            DendriteFormatError: on cycles, disconnection, bad ids or lengths
        """
        n_vertices = int(n_vertices)
        if n_vertices < 1:
            raise DendriteFormatError("a dendrite needs at least one vertex")
        self.n_vertices = n_vertices
        self.tau = float(tau)
        self.edges: Tuple[Tuple[int, int, float], ...] = self._validate(n_vertices, edges)

        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(n_vertices))
        self._edge_index: Dict[Tuple[int, int], int] = {}
        self._incident: List[List[int]] = [[] for _ in range(n_vertices)]
        for e, (u, v, length) in enumerate(self.edges):
            self.graph.add_edge(u, v, length=length, id=e)
            self._edge_index[(u, v)] = e
            self._incident[u].append(e)
            self._incident[v].append(e)

        self._edge_u = np.array([u for u, _, _ in self.edges], dtype=np.int64)
        self._edge_v = np.array([v for _, v, _ in self.edges], dtype=np.int64)
        self._edge_len = np.array([length for _, _, length in self.edges], dtype=float)
        self._root_tree()
        self._build_lca()

    @staticmethod
    def _validate(n_vertices: int, edges: Iterable[Sequence]) -> Tuple[Tuple[int, int, float], ...]:
        forest = nx.utils.UnionFind(range(n_vertices))
        seen: Set[Tuple[int, int]] = set()
        canonical = []
        for raw in edges:
            try:
                u, v, length = int(raw[0]), int(raw[1]), float(raw[2])
            except (TypeError, ValueError, IndexError):
                raise DendriteFormatError(f"edge {raw!r} is not a [u, v, length] triple", edge=tuple(raw) if isinstance(raw, (list, tuple)) else None)
            edge = (min(u, v), max(u, v), length)
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise DendriteFormatError(f"edge {list(edge)} references a vertex outside 0..{n_vertices - 1}", edge=edge)
            if u == v:
                raise DendriteFormatError(f"edge {list(edge)} is a self-loop", edge=edge)
            if not (math.isfinite(length) and length > 0):
                raise DendriteFormatError(f"edge {list(edge)} has non-positive length", edge=edge)
            if edge[:2] in seen:
                raise DendriteFormatError(f"edge {list(edge)} duplicates an earlier edge", edge=edge)
            if forest[u] == forest[v]:
                raise DendriteFormatError(f"edge {list(edge)} closes a cycle", edge=edge)
            seen.add(edge[:2])
            forest.union(u, v)
            canonical.append(edge)

        if len(canonical) != n_vertices - 1:
            stray = next(v for v in range(n_vertices) if forest[v] != forest[0])
            raise DendriteFormatError(f"vertex {stray} is not connected to vertex 0")
        return tuple(sorted(canonical))

    def _root_tree(self):
        n = self.n_vertices
        self.parent = np.full(n, -1, dtype=np.int64)
        self.parent_edge = np.full(n, -1, dtype=np.int64)
        self.hop = np.zeros(n, dtype=np.int64)
        self.height = np.zeros(n, dtype=float)
        self.children: List[List[int]] = [[] for _ in range(n)]

        order = [0]
        visited = np.zeros(n, dtype=bool)
        visited[0] = True
        for v in order:
            for e in self._incident[v]:
                u0, v0, length = self.edges[e]
                w = v0 if u0 == v else u0
                if visited[w]:
                    continue
                visited[w] = True
                self.parent[w] = v
                self.parent_edge[w] = e
                self.hop[w] = self.hop[v] + 1
                self.height[w] = self.height[v] + length
                self.children[v].append(w)
                order.append(w)

        self._edge_child = np.empty(len(self.edges), dtype=np.int64)
        for w in range(1, n):
            self._edge_child[self.parent_edge[w]] = w

        # packed slot of each vertex: an incident edge and the matching end
        self._slot_edge = np.zeros(n, dtype=np.int64)
        self._slot_t = np.zeros(n, dtype=float)
        for w in range(1, n):
            e = self.parent_edge[w]
            self._slot_edge[w] = e
            self._slot_t[w] = 0.0 if self.edges[e][0] == w else 1.0
        if self.edges:
            self._slot_edge[0] = self._incident[0][0]
            self._slot_t[0] = 0.0

    def _build_lca(self):
        euler: List[int] = [0]
        first = np.zeros(self.n_vertices, dtype=np.int64)
        stack = [(0, iter(self.children[0]))]
        while stack:
            v, remaining = stack[-1]
            child = next(remaining, None)
            if child is None:
                stack.pop()
                if stack:
                    euler.append(stack[-1][0])
            else:
                first[child] = len(euler)
                euler.append(child)
                stack.append((child, iter(self.children[child])))

        m = len(euler)
        log2 = np.zeros(m + 1, dtype=np.int64)
        for x in range(2, m + 1):
            log2[x] = log2[x // 2] + 1
        levels = int(log2[m]) + 1
        table = np.zeros((levels, m), dtype=np.int64)
        table[0] = np.asarray(euler, dtype=np.int64)
        for k in range(1, levels):
            span = 1 << (k - 1)
            left = table[k - 1, : m - span]
            right = table[k - 1, span:m]
            table[k, : m - span] = np.where(self.hop[left] <= self.hop[right], left, right)

        self._first = first
        self._log2 = log2
        self._pow2 = 1 << np.arange(levels, dtype=np.int64)
        self._sparse = table

    # ------------------------------------------------------------------
    # basic structure
    # ------------------------------------------------------------------

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self._edge_index[(min(u, v), max(u, v))]
        except KeyError:
            raise DomainError(f"no edge between vertices {u} and {v}")

    def edge_length(self, e: int) -> float:
        return self.edges[e][2]

    def incident_edges(self, v: int) -> List[int]:
        return list(self._incident[v])

    def degree(self, v: int) -> int:
        return self.graph.degree(v)

    def endpoint_vertices(self) -> List[int]:
        """E(X): vertices of degree 1"""
        return [v for v in range(self.n_vertices) if self.degree(v) == 1]

    def branch_vertices(self) -> List[int]:
        """B(X): vertices of degree at least 3"""
        return [v for v in range(self.n_vertices) if self.degree(v) >= 3]

    def total_length(self) -> float:
        return float(self._edge_len.sum())

    def vertex(self, v: int) -> DPoint:
        if not 0 <= v < self.n_vertices:
            raise DomainError(f"vertex {v} is not on the dendrite")
        return DPoint.at(v)

    def point(self, edge: int, t: float) -> DPoint:
        """Canonical point at position t of an edge, snapping to a vertex within tau"""
        if not 0 <= edge < self.n_edges:
            raise DomainError(f"edge {edge} is not on the dendrite")
        if t <= self.tau:
            return DPoint.at(self.edges[edge][0])
        if t >= 1.0 - self.tau:
            return DPoint.at(self.edges[edge][1])
        return DPoint(edge=int(edge), t=float(t))

    def check_point(self, p: DPoint):
        if p.vertex is not None:
            if not 0 <= p.vertex < self.n_vertices:
                raise DomainError(f"point {p} is not on the dendrite")
        elif not 0 <= p.edge < self.n_edges:
            raise DomainError(f"point {p} is not on the dendrite")

    def same_point(self, p: DPoint, q: DPoint, tol: Optional[float] = None) -> bool:
        if p == q:
            return True
        if tol is None:
            tol = self.tau * (float(self._edge_len.max()) if self.n_edges else 1.0)
        return self.distance(p, q) <= tol

    def to_dict(self) -> dict:
        return {"vertices": self.n_vertices, "edges": [[u, v, length] for u, v, length in self.edges]}

    # ------------------------------------------------------------------
    # rooted coordinates and distances
    # ------------------------------------------------------------------

    def lca(self, a, b):
        """Lowest common ancestors of vertex arrays a and b (any matching shapes)"""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        i = self._first[a]
        j = self._first[b]
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        k = self._log2[hi - lo + 1]
        left = self._sparse[k, lo]
        right = self._sparse[k, hi - self._pow2[k] + 1]
        return np.where(self.hop[left] <= self.hop[right], left, right)

    def rooted(self, p: DPoint) -> Tuple[int, float]:
        if p.vertex is not None:
            return p.vertex, float(self.height[p.vertex])
        u, _, length = self.edges[p.edge]
        child = int(self._edge_child[p.edge])
        s = p.t * length if child == u else (1.0 - p.t) * length
        return child, float(self.height[child] - s)

    def pack(self, points: Sequence[DPoint]) -> Tuple[np.ndarray, np.ndarray]:
        """Encode points as (edge, t) arrays; vertices use an incident edge end"""
        if not self.n_edges:
            raise DomainError("point arrays need a dendrite with at least one edge")
        edges = np.empty(len(points), dtype=np.int64)
        ts = np.empty(len(points), dtype=float)
        for i, p in enumerate(points):
            if p.vertex is not None:
                edges[i] = self._slot_edge[p.vertex]
                ts[i] = self._slot_t[p.vertex]
            else:
                edges[i] = p.edge
                ts[i] = p.t
        return edges, ts

    def unpack(self, edges: np.ndarray, ts: np.ndarray) -> List[DPoint]:
        return [self.point(int(e), float(t)) for e, t in zip(edges, ts)]

    def rooted_packed(self, edges: np.ndarray, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        child = self._edge_child[edges]
        length = self._edge_len[edges]
        s = np.where(child == self._edge_u[edges], ts * length, (1.0 - ts) * length)
        return child, self.height[child] - s

    def rooted_many(self, points: Sequence[DPoint]) -> Tuple[np.ndarray, np.ndarray]:
        coords = [self.rooted(p) for p in points]
        children = np.array([c for c, _ in coords], dtype=np.int64)
        heights = np.array([h for _, h in coords], dtype=float)
        return children, heights

    def rooted_distance(self, c1, h1, c2, h2):
        """d = h1 + h2 - 2 min(H[lca], h1, h2), elementwise with broadcasting"""
        meet = self.height[self.lca(c1, c2)]
        d = h1 + h2 - 2.0 * np.minimum(np.minimum(meet, h1), h2)
        return np.maximum(d, 0.0)

    def distance(self, p: DPoint, q: DPoint) -> float:
        c1, h1 = self.rooted(p)
        c2, h2 = self.rooted(q)
        return float(self.rooted_distance(c1, h1, c2, h2))

    def pairwise_distances(self, P: Sequence[DPoint], Q: Sequence[DPoint]) -> np.ndarray:
        c1, h1 = self.rooted_many(P)
        c2, h2 = self.rooted_many(Q)
        return self.rooted_distance(c1[:, None], h1[:, None], c2[None, :], h2[None, :])

    def hausdorff(self, P: Sequence[DPoint], Q: Sequence[DPoint]) -> float:
        if not P or not Q:
            return math.inf if (P or Q) else 0.0
        D = self.pairwise_distances(P, Q)
        return float(max(D.min(axis=1).max(), D.min(axis=0).max()))

    # ------------------------------------------------------------------
    # arcs
    # ------------------------------------------------------------------

    def _vertex_path(self, a: int, b: int) -> List[int]:
        w = int(self.lca(a, b))
        up, down = [], []
        while a != w:
            up.append(a)
            a = int(self.parent[a])
        while b != w:
            down.append(b)
            b = int(self.parent[b])
        return up + [w] + down[::-1]

    def _exits(self, p: DPoint) -> List[Tuple[int, float, Optional[Piece]]]:
        if p.vertex is not None:
            return [(p.vertex, 0.0, None)]
        u, v, length = self.edges[p.edge]
        return [(u, p.t * length, (p.edge, p.t, 0.0)), (v, (1.0 - p.t) * length, (p.edge, p.t, 1.0))]

    def _path_pieces(self, x: DPoint, y: DPoint) -> Tuple[List[Piece], List[int]]:
        """Ordered edge pieces (edge, t_from, t_to) from x to y, and the vertices passed"""
        if x == y:
            return [], ([x.vertex] if x.vertex is not None else [])
        if x.edge is not None and x.edge == y.edge:
            return [(x.edge, x.t, y.t)], []

        best = None
        for a, cost_a, piece_a in self._exits(x):
            for b, cost_b, piece_b in self._exits(y):
                w = int(self.lca(a, b))
                total = cost_a + self.height[a] + self.height[b] - 2.0 * self.height[w] + cost_b
                if best is None or total < best[0]:
                    best = (total, a, piece_a, b, piece_b)
        _, a, piece_a, b, piece_b = best

        pieces: List[Piece] = []
        if piece_a is not None:
            pieces.append(piece_a)
        path = self._vertex_path(a, b)
        for p, q in zip(path, path[1:]):
            e = self._edge_index[(min(p, q), max(p, q))]
            start = 0.0 if self.edges[e][0] == p else 1.0
            pieces.append((e, start, 1.0 - start))
        if piece_b is not None:
            e, t, end = piece_b
            pieces.append((e, end, t))
        return [pc for pc in pieces if pc[1] != pc[2]], path

    def arc(self, x: DPoint, y: DPoint) -> Tuple[Subdendrite, float]:
        """
        The unique arc [x, y] and its length d(x, y).

        Returns:
            Tuple[Subdendrite, float]: arc as a subdendrite and its length
        """
        self.check_point(x)
        self.check_point(y)
        pieces, path = self._path_pieces(x, y)
        if not pieces:
            return self.point_set(x), 0.0
        return self._from_pieces(pieces, path, (x, y)), self.distance(x, y)

    def _from_pieces(self, pieces: Sequence[Piece], path: Sequence[int], ends: Sequence[DPoint]) -> Subdendrite:
        segments: Dict[int, Tuple[float, float]] = {}
        for e, t0, t1 in pieces:
            lo, hi = min(t0, t1), max(t0, t1)
            if e in segments:
                lo, hi = min(lo, segments[e][0]), max(hi, segments[e][1])
            segments[e] = (lo, hi)
        vertices = set(path) | {p.vertex for p in ends if p.vertex is not None}
        return self.subdendrite(segments, vertices)

    def point_along(self, x: DPoint, y: DPoint, s: float) -> DPoint:
        """Point at fraction s of the arc length from x toward y"""
        pieces, _ = self._path_pieces(x, y)
        target = min(max(s, 0.0), 1.0) * sum(abs(t1 - t0) * self.edges[e][2] for e, t0, t1 in pieces)
        for e, t0, t1 in pieces:
            length = abs(t1 - t0) * self.edges[e][2]
            if target <= length:
                step = target / self.edges[e][2]
                return self.point(e, t0 + step if t1 > t0 else t0 - step)
            target -= length
        return y

    # ------------------------------------------------------------------
    # subdendrites
    # ------------------------------------------------------------------

    def subdendrite(self, segments: Mapping[int, Tuple[float, float]], vertices: Iterable[int] = ()) -> Subdendrite:
        """Normalized subdendrite: segment ends within tau of a vertex snap onto it"""
        verts = set(int(v) for v in vertices)
        normalized = []
        for e, (lo, hi) in segments.items():
            u, v, _ = self.edges[e]
            lo, hi = max(0.0, min(lo, hi)), min(1.0, max(lo, hi))
            if lo <= self.tau:
                lo = 0.0
            if hi >= 1.0 - self.tau:
                hi = 1.0
            if lo == 0.0:
                verts.add(u)
            if hi == 1.0:
                verts.add(v)
            if hi - lo <= self.tau:
                if lo == 0.0 or hi == 1.0:
                    continue
                lo = hi = 0.5 * (lo + hi)
            normalized.append((int(e), float(lo), float(hi)))
        return Subdendrite(tuple(sorted(normalized)), frozenset(verts))

    def whole(self) -> Subdendrite:
        return Subdendrite(tuple((e, 0.0, 1.0) for e in range(self.n_edges)), frozenset(range(self.n_vertices)))

    def point_set(self, p: DPoint) -> Subdendrite:
        if p.vertex is not None:
            return Subdendrite((), frozenset([p.vertex]))
        return Subdendrite(((p.edge, p.t, p.t),), frozenset())

    def _require_nonempty(self, Y: Subdendrite):
        if Y.is_empty:
            raise DomainError("subdendrite is empty")

    def _anchor(self, Y: Subdendrite) -> DPoint:
        if Y.vertices:
            return DPoint.at(min(Y.vertices))
        e, lo, _ = Y.segments[0]
        return self.point(e, lo)

    def _end_vertex(self, e: int, t: float) -> Optional[int]:
        if t == 0.0:
            return self.edges[e][0]
        if t == 1.0:
            return self.edges[e][1]
        return None

    def _covers_end(self, Y: Subdendrite, e: int, v: int) -> bool:
        seg = Y.segment(e)
        if seg is None or seg[1] <= seg[0]:
            return False
        return seg[0] == 0.0 if self.edges[e][0] == v else seg[1] == 1.0

    def contains(self, Y: Subdendrite, p: DPoint) -> bool:
        return Y.contains(p, self.tau)

    def first_point_map(self, Y: Subdendrite, x: DPoint) -> DPoint:
        """
        Retraction r_Y: x itself on Y, otherwise the gate point where every arc from x enters Y.

        Raises:
            DomainError: if Y is empty or x is not on the dendrite
        """
        self._require_nonempty(Y)
        self.check_point(x)
        if Y.contains(x, self.tau):
            return x
        target = self._anchor(Y)
        pieces, _ = self._path_pieces(x, target)
        for e, t0, t1 in pieces:
            seg = Y.segment(e)
            if seg is not None:
                lo, hi = seg
                if t0 <= t1:
                    enter = max(t0, lo)
                    if enter <= min(t1, hi) + self.tau:
                        return self.point(e, enter)
                else:
                    enter = min(t0, hi)
                    if enter >= max(t1, lo) - self.tau:
                        return self.point(e, enter)
            end = self._end_vertex(e, t1)
            if end is not None and end in Y.vertices:
                return DPoint.at(end)
        return target

    def distance_to(self, Y: Subdendrite, p: DPoint) -> float:
        return self.distance(p, self.first_point_map(Y, p))

    def convex_hull(self, F: Iterable[DPoint]) -> Subdendrite:
        """Smallest subdendrite containing F, built as the union of arcs [a, z] for a fixed a in F"""
        F = list(F)
        if not F:
            raise DomainError("convex hull of an empty set")
        for p in F:
            self.check_point(p)
        a = F[0]
        segments: Dict[int, Tuple[float, float]] = {}
        vertices: Set[int] = {p.vertex for p in F if p.vertex is not None}
        for z in F:
            pieces, path = self._path_pieces(a, z)
            vertices.update(path)
            for e, t0, t1 in pieces:
                lo, hi = min(t0, t1), max(t0, t1)
                if e in segments:
                    lo, hi = min(lo, segments[e][0]), max(hi, segments[e][1])
                segments[e] = (lo, hi)
        if not segments and not vertices:
            return self.point_set(a)
        return self.subdendrite(segments, vertices)

    def join(self, A: Subdendrite, B: Subdendrite) -> Subdendrite:
        """Hull of A union B"""
        return self.convex_hull(self.endpoints(A) + self.endpoints(B))

    def intersect(self, A: Subdendrite, B: Subdendrite) -> Subdendrite:
        segments = {}
        for e, lo, hi in A.segments:
            other = B.segment(e)
            if other is None:
                continue
            lo2, hi2 = max(lo, other[0]), min(hi, other[1])
            if lo2 <= hi2 + self.tau:
                segments[e] = (lo2, max(lo2, hi2))
        return self.subdendrite(segments, A.vertices & B.vertices)

    def endpoints(self, Y: Subdendrite) -> List[DPoint]:
        """E(Y): points of order one in Y (the point itself for a singleton)"""
        self._require_nonempty(Y)
        if Y.is_point:
            return [Y.single_point()]
        result = []
        for v in sorted(Y.vertices):
            if sum(1 for e in self._incident[v] if self._covers_end(Y, e, v)) == 1:
                result.append(DPoint.at(v))
        for e, lo, hi in Y.segments:
            if lo > 0.0:
                result.append(self.point(e, lo))
            if hi < 1.0:
                result.append(self.point(e, hi))
        return result

    def breakpoints(self, Y: Subdendrite) -> List[DPoint]:
        """Vertices of Y and the interior ends of its partial segments"""
        self._require_nonempty(Y)
        if Y.is_point:
            return [Y.single_point()]
        points = [DPoint.at(v) for v in sorted(Y.vertices)]
        for e, lo, hi in Y.segments:
            if lo > 0.0:
                points.append(self.point(e, lo))
            if hi < 1.0:
                points.append(self.point(e, hi))
        return points

    def length(self, Y: Subdendrite) -> float:
        return float(sum((hi - lo) * self.edges[e][2] for e, lo, hi in Y.segments))

    def components_minus(self, Y: Subdendrite) -> List[Component]:
        """
        Closures of the components of X minus Y, each with its attachment r_Y(component).

        Returns:
            List[Component]: empty when Y is the whole dendrite
        """
        self._require_nonempty(Y)
        components = []
        for v in sorted(Y.vertices):
            for e in self._incident[v]:
                seg = Y.segment(e)
                if seg is not None and seg[1] > seg[0]:
                    continue
                leaves_from_u = self.edges[e][0] == v
                components.append(self._branch(DPoint.at(v), e, 1 if leaves_from_u else -1, 0.0 if leaves_from_u else 1.0))
        for e, lo, hi in Y.segments:
            if lo > 0.0:
                components.append(self._branch(self.point(e, lo), e, -1, lo))
            if hi < 1.0:
                components.append(self._branch(self.point(e, hi), e, 1, hi))
        return components

    def _branch(self, attachment: DPoint, e: int, direction: int, t_start: float) -> Component:
        u, v, _ = self.edges[e]
        far = v if direction > 0 else u
        segments = {e: (t_start, 1.0) if direction > 0 else (0.0, t_start)}
        vertices = {far}
        stack = [far]
        while stack:
            w = stack.pop()
            for e2 in self._incident[w]:
                if e2 == e or e2 in segments:
                    continue
                a, b, _ = self.edges[e2]
                other = b if a == w else a
                segments[e2] = (0.0, 1.0)
                vertices.add(other)
                stack.append(other)
        return Component(self.subdendrite(segments, vertices), attachment, e, direction)

    def boundary_points(self, Y: Subdendrite) -> List[DPoint]:
        """Points of Y where X minus Y attaches (topological boundary of Y in X)"""
        seen: List[DPoint] = []
        for component in self.components_minus(Y):
            if component.attachment not in seen:
                seen.append(component.attachment)
        return seen

    def component_of(self, Y: Subdendrite, components: Sequence[Component], p: DPoint) -> Optional[int]:
        """Index of the component of X minus Y containing p; None for p on Y"""
        if Y.contains(p, self.tau):
            return None
        gate = self.first_point_map(Y, p)
        pieces, _ = self._path_pieces(gate, p)
        if not pieces:
            return None
        e, t0, t1 = pieces[0]
        direction = 1 if t1 > t0 else -1
        for i, component in enumerate(components):
            if component.edge == e and component.direction == direction and self.same_point(component.attachment, gate):
                return i
        return None

    def order(self, p: DPoint) -> int:
        """
        Number of components of X minus {p}.

        Raises:
            DomainError: if p is not on the dendrite
        """
        self.check_point(p)
        if p.vertex is not None:
            return self.degree(p.vertex)
        return 2

    def order_in(self, Y: Subdendrite, p: DPoint) -> int:
        """Order of p relative to the subdendrite Y (0 when p is not in Y or Y = {p})"""
        if not Y.contains(p, self.tau):
            return 0
        if p.vertex is not None:
            return sum(1 for e in self._incident[p.vertex] if self._covers_end(Y, e, p.vertex))
        lo, hi = Y.segment(p.edge)
        return int(lo < p.t - self.tau) + int(hi > p.t + self.tau)

    def grid(self, spacing: float, Y: Optional[Subdendrite] = None) -> List[DPoint]:
        """Points of Y (default X) with consecutive spacing at most ``spacing`` along every segment"""
        if spacing <= 0:
            raise DomainError("grid spacing must be positive")
        Y = self.whole() if Y is None else Y
        self._require_nonempty(Y)
        if Y.is_point:
            return [Y.single_point()]
        points: List[DPoint] = []
        emitted: Set[int] = set()
        for e, lo, hi in Y.segments:
            u, v, length = self.edges[e]
            if lo == 0.0:
                if u not in emitted:
                    points.append(DPoint.at(u))
                    emitted.add(u)
            else:
                points.append(self.point(e, lo))
            k = max(1, math.ceil((hi - lo) * length / spacing))
            for i in range(1, k):
                points.append(self.point(e, lo + (hi - lo) * i / k))
            if hi == 1.0:
                if v not in emitted:
                    points.append(DPoint.at(v))
                    emitted.add(v)
            else:
                points.append(self.point(e, hi))
        return points

    def diameter(self, Y: Optional[Subdendrite] = None) -> float:
        Y = self.whole() if Y is None else Y
        if not self.n_edges:
            return 0.0
        ends = self.endpoints(Y)
        if len(ends) < 2:
            return 0.0
        return float(self.pairwise_distances(ends, ends).max())

    def retraction_error(self, Y: Subdendrite) -> float:
        """sup over X of d(x, r_Y(x)); attained at endpoint vertices"""
        self._require_nonempty(Y)
        leaves = self.endpoint_vertices() or [0]
        return max(self.distance_to(Y, DPoint.at(v)) for v in leaves)


def random_dendrite(n: int, seed: Optional[int] = None) -> Dendrite:
    """
    Random tree on n vertices: vertex i attaches to a uniform earlier vertex.

    Args:
        n (int): Number of vertices (at least 1)
        seed: Seed for numpy's default generator

    Returns:
        Dendrite: edge lengths in (0, 1]
    """
    if n < 1:
        raise DomainError("random_dendrite needs n >= 1")
    rng = np.random.default_rng(seed)
    edges = []
    for v in range(1, n):
        parent = int(rng.integers(0, v))
        edges.append((parent, v, float(1.0 - rng.random())))
    return Dendrite(n, edges)


def random_point(X: Dendrite, rng: np.random.Generator, vertex_weight: float = 0.2) -> DPoint:
    """Uniform edge then uniform position; a uniform vertex with probability ``vertex_weight``"""
    if not X.n_edges or rng.random() < vertex_weight:
        return DPoint.at(int(rng.integers(0, X.n_vertices)))
    e = int(rng.integers(0, X.n_edges))
    return X.point(e, float(rng.uniform(0.0, 1.0)))
