#!/usr/bin/env python3
"""
Gehman Service
Finite-depth Gehman dendrites built as prefix trees of subshift languages,
the address shift as a dendrite map, word complexity, and the dyadic
block-position structures of constant-length substitutions.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.services.dendrite import Dendrite, DPoint, Subdendrite, point_key
from src.services.disjointness import PeriodicStructure, StructureLevel
from src.services.dynamics import DEFAULT_GRID_DENSITY, DEFAULT_MAX_GRID, DendriteMap, EntropyEstimate, entropy_estimate
from src.services.errors import (
    ConfigurationError, DiagnosticError, DomainError, EmptyLanguageError, RecognizabilityError,
)

logger = logging.getLogger(__name__)

ALPHABET = "01"
STEM_LENGTH = 1.0

NAMED_RULES = {
    "thue-morse": ("01", "10"),
    "period-doubling": ("01", "00"),
}

SURJECTIVITY_CAVEAT = (
    "finite-depth truncation: surjectivity is reported as the image containing "
    "every address of length at most depth - 1"
)


@dataclass(frozen=True)
class SubshiftSpec:
    """
    One-sided binary subshift given by forbidden words or a constant-length-2 substitution.

    Attributes:
        name: Label used in reports
        forbidden: Forbidden words (empty for the full shift)
        rule: Images of 0 and 1 for a substitution, None otherwise
    """

    name: str
    forbidden: Tuple[str, ...] = ()
    rule: Optional[Tuple[str, str]] = None

    def __post_init__(self):
        for word in self.forbidden:
            if not word or set(word) - set(ALPHABET):
                raise DomainError(f"forbidden word {word!r} is not a nonempty binary word")
        if self.rule is not None:
            if len(self.rule) != 2 or any(len(image) != 2 or set(image) - set(ALPHABET) for image in self.rule):
                raise DomainError(f"substitution {self.rule} is not constant-length 2 over {{0, 1}}")

    @property
    def is_substitution(self) -> bool:
        return self.rule is not None

    @property
    def primitive(self) -> bool:
        if self.rule is None:
            return False
        M = np.array([[image.count(a) for image in self.rule] for a in ALPHABET])
        return bool(np.all(M @ M > 0))

    def substitute(self, word: str) -> str:
        return word.translate(str.maketrans({"0": self.rule[0], "1": self.rule[1]}))


def parse_spec(text: str) -> SubshiftSpec:
    """
    Parse ``full``, ``thue-morse``, ``period-doubling``, ``forbid:<w1>,<w2>``
    or ``subst:<image of 0>,<image of 1>``.

    Raises:
        DomainError: on an unknown or malformed spec
    """
    text = text.strip()
    if text == "full":
        return SubshiftSpec("full")
    if text in NAMED_RULES:
        return SubshiftSpec(text, rule=NAMED_RULES[text])
    kind, _, body = text.partition(":")
    if kind == "forbid" and body:
        return SubshiftSpec(text, forbidden=tuple(w.strip() for w in body.split(",") if w.strip()))
    if kind == "subst" and body:
        images = tuple(w.strip() for w in body.split(","))
        if len(images) != 2:
            raise DomainError(f"substitution {body!r} needs images of 0 and 1")
        return SubshiftSpec(text, rule=images)
    raise DomainError(f"unknown subshift spec {text!r}")


# ----------------------------------------------------------------------
# languages
# ----------------------------------------------------------------------

def prefix_length(n: int) -> int:
    return max(2 ** 12, min(4 * 2 ** n, 2 ** 16), 64 * n)


def fixed_point_prefix(spec: SubshiftSpec, length: int) -> str:
    """
    Prefix of a fixed point of the substitution (or of its square), iterated
    until it is at least ``length`` symbols long.
    """
    if spec.rule is None:
        raise DomainError(f"{spec.name} is not a substitution")
    for power in (1, 2):
        for a in ALPHABET:
            word = a
            for _ in range(power):
                word = spec.substitute(word)
            if word[0] == a and len(word) > 1:
                word = a
                while len(word) < length:
                    for _ in range(power):
                        word = spec.substitute(word)
                return word
    raise DomainError(f"{spec.name} has no fixed point seed")


def _sft_core(forbidden: Sequence[str]) -> Tuple[int, set]:
    """(window, states) of the forbidden-word graph after pruning states with no infinite path"""
    window = max((len(w) for w in forbidden), default=1) - 1
    allowed = lambda word: not any(f in word for f in forbidden)
    states = {"".join(bits) for bits in _binary_words(window) if allowed("".join(bits))}
    changed = True
    while changed:
        changed = False
        for s in sorted(states):
            successors = [(s + a)[1:] if window else "" for a in ALPHABET if allowed(s + a)]
            if not any(t in states for t in successors):
                states.discard(s)
                changed = True
    return window, states


def _binary_words(n: int):
    if n <= 0:
        yield ""
        return
    for value in range(2 ** n):
        yield format(value, f"0{n}b")


def admissible_words(spec: SubshiftSpec, n: int) -> Tuple[List[str], int]:
    """
    Sorted length-n words of the subshift and their count p(n).

    Args:
        spec (SubshiftSpec): Subshift
        n (int): Word length, n >= 1

    Returns:
        Tuple[List[str], int]: words and p(n)

    Raises:
        DomainError: if n < 1
        EmptyLanguageError: if the subshift has no infinite sequence
    """
    if n < 1:
        raise DomainError("word length must be at least 1")

    if spec.rule is not None:
        prefix = fixed_point_prefix(spec, prefix_length(n))
        words = sorted({prefix[i:i + n] for i in range(len(prefix) - n + 1)})
    elif not spec.forbidden:
        words = list(_binary_words(n))
    else:
        window, core = _sft_core(spec.forbidden)
        if not core:
            raise EmptyLanguageError(f"{spec.name} admits no infinite sequence")
        words = []
        for w in _binary_words(n):
            if any(f in w for f in spec.forbidden):
                continue
            if window == 0:
                words.append(w)
            elif n >= window:
                if w[n - window:] in core:
                    words.append(w)
            elif any(s.startswith(w) for s in core):
                words.append(w)
    if not words:
        raise EmptyLanguageError(f"{spec.name} has no admissible words of length {n}")
    return words, len(words)


def word_complexity(spec: SubshiftSpec, n_max: int) -> List[int]:
    """p(1..n_max)"""
    if spec.rule is not None:
        prefix = fixed_point_prefix(spec, prefix_length(n_max))
        return [len({prefix[i:i + n] for i in range(len(prefix) - n + 1)}) for n in range(1, n_max + 1)]

    # path counts in the window graph, so long words are never enumerated
    window, core = _sft_core(spec.forbidden)
    if not core:
        raise EmptyLanguageError(f"{spec.name} admits no infinite sequence")
    allowed = lambda word: not any(f in word for f in spec.forbidden)
    counts = {s: 1 for s in _binary_words(window) if allowed(s)}
    result = [admissible_words(spec, n)[1] for n in range(1, min(window, n_max) + 1)]
    for n in range(max(window, 0) + 1, n_max + 1):
        following: Dict[str, int] = {}
        for s, c in counts.items():
            for a in ALPHABET:
                if allowed(s + a):
                    t = (s + a)[1:] if window else ""
                    following[t] = following.get(t, 0) + c
        counts = following
        result.append(sum(c for s, c in counts.items() if s in core))
    return result


# ----------------------------------------------------------------------
# prefix-tree realization
# ----------------------------------------------------------------------

@dataclass
class GehmanApprox:
    """
    Depth-n prefix tree of the admissible words with a stem below the hub.

    Degree-2 chain vertices are contracted; their addresses live at interior
    edge points. The hub has address "" and vertex 0, the stem base is vertex 1.
    """

    spec: SubshiftSpec
    depth: int
    dendrite: Dendrite
    words: List[str]
    addresses: Dict[str, DPoint]
    root: int = 0
    stem_base: int = 1
    _lookup: Dict[tuple, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup = {point_key(p): w for w, p in self.addresses.items()}

    def point(self, word: str) -> DPoint:
        try:
            return self.addresses[word]
        except KeyError:
            raise DomainError(f"{word!r} is not an address of the depth-{self.depth} approximation")

    def address_of(self, p: DPoint) -> Optional[str]:
        return self._lookup.get(point_key(p))

    @property
    def leaves(self) -> List[DPoint]:
        return [self.addresses[w] for w in self.words]

    def level(self, d: int) -> List[str]:
        return sorted(w for w in self.addresses if len(w) == d)


def _depth_offset(d: int) -> float:
    """Distance from the hub to depth d: edges entering depth d have length 2^-d"""
    return 1.0 - 2.0 ** -d


def build_gehman(spec: SubshiftSpec, n: int) -> GehmanApprox:
    """
    Prefix tree of the admissible n-words, chains contracted, stem attached at the hub.

    Raises:
        DomainError, EmptyLanguageError: propagated from admissible_words
    """
    words, _ = admissible_words(spec, n)
    nodes = {w[:d] for w in words for d in range(n + 1)}
    children: Dict[str, List[str]] = {}
    for w in nodes:
        if w:
            children.setdefault(w[:-1], []).append(w)
    kept = sorted((w for w in nodes if w == "" or len(w) == n or len(children.get(w, ())) == 2),
                  key=lambda w: (len(w), w))
    vertex = {w: i + 2 for i, w in enumerate(kept[1:])}
    vertex[""] = 0

    edges = [(0, 1, STEM_LENGTH)]
    addresses: Dict[str, DPoint] = {"": DPoint.at(0)}
    pending = []
    for w in kept[1:]:
        parent = w[:-1]
        while parent not in vertex:
            parent = parent[:-1]
        dp, dc = len(parent), len(w)
        length = _depth_offset(dc) - _depth_offset(dp)
        edges.append((vertex[parent], vertex[w], length))
        addresses[w] = DPoint.at(vertex[w])
        pending.append((parent, w, length))

    X = Dendrite(len(kept) + 1, edges)
    for parent, w, length in pending:
        e = X.edge_id(vertex[parent], vertex[w])
        for d in range(len(parent) + 1, len(w)):
            t = (_depth_offset(d) - _depth_offset(len(parent))) / length
            addresses[w[:d]] = X.point(e, t)

    logger.info(f"build_gehman: {spec.name} depth {n}, {len(words)} leaves, {X.n_vertices} vertices")
    return GehmanApprox(spec, n, X, words, addresses)


def shift_map(G: GehmanApprox) -> DendriteMap:
    """
    Address shift: the point at address u goes to the point at address u[1:];
    hub and stem go to the hub.

    Raises:
        DomainError: if depth < 2
        DiagnosticError: if a shifted address is missing from the language
    """
    if G.depth < 2:
        raise DomainError("shift_map needs depth >= 2")
    X = G.dendrite
    by_vertex = {p.vertex: w for w, p in G.addresses.items() if p.vertex is not None}

    def shifted(w: str) -> DPoint:
        if w[1:] not in G.addresses:
            raise DiagnosticError(f"shifted address {w[1:]!r} of {w!r} is not admissible at depth {G.depth}")
        return G.addresses[w[1:]]

    images = [G.addresses[""], G.addresses[""]]
    images += [shifted(by_vertex[v]) for v in range(2, X.n_vertices)]
    subdivisions = [(p.edge, p.t, shifted(w)) for w, p in G.addresses.items() if p.vertex is None]
    return DendriteMap(X, images, subdivisions)


@dataclass
class ConjugacyReport:
    passed: bool
    checks: int
    root_fixed: bool
    witness: Optional[str] = None
    expected: Optional[str] = None
    got: Optional[str] = None
    image_covers_previous_level: bool = False
    caveat: str = SURJECTIVITY_CAVEAT


def verify_conjugacy(G: GehmanApprox, f: DendriteMap) -> ConjugacyReport:
    """
    Exhaustive exact check that f moves address u to address u[1:] for every
    admissible u with 1 <= |u| <= depth, and fixes the hub.
    """
    root_fixed = f.eval(G.point("")) == G.point("")
    checks = 0
    witness = expected = got = None
    for w in sorted(G.addresses, key=lambda u: (len(u), u)):
        if not w:
            continue
        checks += 1
        image = f.eval(G.addresses[w])
        target = G.addresses.get(w[1:])
        if image != target:
            witness, expected, got = w, w[1:], G.address_of(image) or str(image)
            break

    whole_image = f.image(G.dendrite.whole())
    covers = all(whole_image.contains(G.addresses[w], G.dendrite.tau) for w in G.addresses if len(w) < G.depth)
    passed = witness is None and root_fixed
    if not passed:
        logger.warning(f"verify_conjugacy: failed at {witness!r} (expected {expected!r}, got {got!r})")
    return ConjugacyReport(passed, checks, root_fixed, witness, expected, got, covers)


# ----------------------------------------------------------------------
# entropy
# ----------------------------------------------------------------------

@dataclass
class EntropyComparison:
    complexity_table: List[Dict[str, float]]
    complexity_slope: float
    map_estimate: EntropyEstimate
    gap: float


def _trend_slope(ns: Sequence[int], logs: Sequence[float]) -> float:
    if max(logs) - min(logs) == 0.0:
        return 0.0
    return float(np.polyfit(np.asarray(ns, dtype=float), np.asarray(logs, dtype=float), 1)[0])


def entropy_compare(spec: SubshiftSpec, n_max: int, eps: float = 0.05, depth: Optional[int] = None,
                    map_steps: Optional[int] = None, grid_density: float = DEFAULT_GRID_DENSITY,
                    max_grid: int = DEFAULT_MAX_GRID) -> EntropyComparison:
    """
    Word-complexity growth rate next to the separated-set estimate of the shift map.

    Every orbit of the depth-d shift map reaches the hub after d steps, so sep(n)
    stops growing once n passes the depth. The map side therefore samples the
    leaves of an approximation at least map_steps + ceil(log2(1/eps)) + 3 deep;
    two leaves are then (n, eps)-separated exactly when their first
    n + ceil(log2(1/eps)) letters differ.

    Args:
        spec (SubshiftSpec): Subshift
        n_max (int): Longest word length, >= 4
        eps (float): Separation scale for the map-side estimate
        depth (int): Depth of the Gehman approximation carrying the shift map;
            defaults to map_steps + ceil(log2(1/eps)) + 3
        map_steps (int): n_max of the map-side estimate, defaults to n_max

    Returns:
        EntropyComparison: both trend tables, the slope of log p(n) over the upper
        half of [1, n_max], the map estimate and their gap

    Raises:
        DomainError: if n_max < 4
        ConfigurationError: if the leaf sample would exceed max_grid points
    """
    if n_max < 4:
        raise DomainError("entropy_compare needs n_max >= 4")
    if eps <= 0:
        raise DomainError("entropy_compare needs eps > 0")
    counts = word_complexity(spec, n_max)
    table = [{"n": n, "p": p, "rate": math.log(p) / n} for n, p in enumerate(counts, start=1)]
    lo = math.ceil(n_max / 2)
    slope = _trend_slope(range(lo, n_max + 1), [math.log(p) for p in counts[lo - 1:]])

    steps = n_max if map_steps is None else map_steps
    margin = max(0, math.ceil(math.log2(1.0 / eps))) + 3
    depth = steps + margin if depth is None else depth
    if depth < steps + margin:
        logger.warning(f"entropy_compare: depth {depth} below {steps + margin}; "
                       f"sep(n) flattens past n = {max(1, depth - margin)}")
    if counts[-1] * 2 ** max(0, depth - n_max) > max_grid:
        raise ConfigurationError(f"depth {depth} for {spec.name} could exceed {max_grid} sample points")

    G = build_gehman(spec, depth)
    estimate = entropy_estimate(shift_map(G), eps, steps, grid_density, max_grid, points=G.leaves)
    logger.info(f"entropy_compare: {spec.name} complexity slope {slope:.4f}, map estimate {estimate.estimate:.4f}")
    return EntropyComparison(table, slope, estimate, abs(slope - estimate.estimate))


# ----------------------------------------------------------------------
# block positions and the odometer realization
# ----------------------------------------------------------------------

def block_positions(spec: SubshiftSpec, words: Sequence[str], level: int) -> Dict[str, Optional[int]]:
    """
    Residue mod 2^level of every occurrence position of each word in the fixed
    point; None when the occurrences disagree (not recognized at this level).
    """
    if level < 0:
        raise DomainError("level must be non-negative")
    modulus = 2 ** level
    result: Dict[str, Optional[int]] = {}
    by_length: Dict[int, List[str]] = {}
    for w in words:
        by_length.setdefault(len(w), []).append(w)
    for n, group in by_length.items():
        prefix = fixed_point_prefix(spec, prefix_length(n))
        residues: Dict[str, set] = {}
        for i in range(len(prefix) - n + 1):
            residues.setdefault(prefix[i:i + n], set()).add(i % modulus)
        for w in group:
            found = residues.get(w, set())
            result[w] = next(iter(found)) if len(found) == 1 else None
    return result


@dataclass
class OdometerApprox:
    """
    Depth-m binary tree of block positions: the address of a residue r mod 2^m is
    its binary digits, least significant first. The hub is vertex 0 and a stem
    base is vertex 1.
    """

    depth: int
    dendrite: Dendrite
    vertices: Dict[str, int]
    spec: Optional[SubshiftSpec] = None
    root: int = 0
    stem_base: int = 1

    def point(self, address: str) -> DPoint:
        try:
            return DPoint.at(self.vertices[address])
        except KeyError:
            raise DomainError(f"{address!r} is not an address of the depth-{self.depth} odometer")

    @staticmethod
    def digits(residue: int, level: int) -> str:
        return "".join(str((residue >> i) & 1) for i in range(level))

    def leaf(self, residue: int) -> DPoint:
        return self.point(self.digits(residue % 2 ** self.depth, self.depth))

    @property
    def leaves(self) -> List[DPoint]:
        return [self.leaf(r) for r in range(2 ** self.depth)]

    def cylinder(self, residue: int, level: int) -> Subdendrite:
        """Closed subtree of the positions congruent to residue mod 2^level"""
        if not 0 <= level <= self.depth:
            raise DomainError(f"level {level} outside 0..{self.depth}")
        X = self.dendrite
        top = self.digits(residue % 2 ** level, level)
        inside = [w for w in self.vertices if w.startswith(top)]
        segments = {X.edge_id(self.vertices[w[:-1]], self.vertices[w]): (0.0, 1.0) for w in inside if len(w) > len(top)}
        return X.subdendrite(segments, [self.vertices[w] for w in inside])


def build_odometer(depth: int, spec: Optional[SubshiftSpec] = None) -> OdometerApprox:
    """Binary position tree of the given depth; edges entering depth d have length 2^-d"""
    if depth < 1:
        raise DomainError("odometer depth must be at least 1")
    addresses = sorted((w for d in range(1, depth + 1) for w in _binary_words(d)), key=lambda w: (len(w), w))
    vertices = {"": 0}
    vertices.update({w: i + 2 for i, w in enumerate(addresses)})
    edges = [(0, 1, STEM_LENGTH)] + [(vertices[w[:-1]], vertices[w], 2.0 ** -len(w)) for w in addresses]
    X = Dendrite(len(addresses) + 2, edges)
    logger.info(f"build_odometer: depth {depth}, {2 ** depth} leaves")
    return OdometerApprox(depth, X, vertices, spec)


def _increment(address: str) -> str:
    digits = list(address)
    for i, d in enumerate(digits):
        if d == "0":
            digits[i] = "1"
            return "".join(digits)
        digits[i] = "0"
    return "".join(digits)


def odometer_map(O: OdometerApprox) -> DendriteMap:
    """Adding machine +1 on every level; the stem is fixed pointwise. An isometry."""
    X = O.dendrite
    images = [DPoint.at(0)] * X.n_vertices
    images[O.stem_base] = DPoint.at(O.stem_base)
    for w, v in O.vertices.items():
        if w:
            images[v] = DPoint.at(O.vertices[_increment(w)])
    return DendriteMap(X, images)


@dataclass
class OdometerFactorReport:
    passed: bool
    level: int
    checked: int
    skipped: int
    witness: Optional[str] = None


def verify_odometer_factor(spec: SubshiftSpec, G: GehmanApprox, level: int) -> OdometerFactorReport:
    """
    Check residue(u[1:]) = residue(u) + 1 mod 2^level for every leaf u whose
    block position and that of its shift are both recognized.
    """
    if spec.rule is None:
        raise DomainError(f"{spec.name} is not a substitution")
    shifted = sorted({w[1:] for w in G.words})
    residues = block_positions(spec, list(G.words) + shifted, level)
    modulus = 2 ** level
    checked = skipped = 0
    for w in G.words:
        r, s = residues.get(w), residues.get(w[1:])
        if r is None or s is None:
            skipped += 1
            continue
        checked += 1
        if s != (r + 1) % modulus:
            return OdometerFactorReport(False, level, checked, skipped, w)
    return OdometerFactorReport(True, level, checked, skipped)


# ----------------------------------------------------------------------
# dyadic structures
# ----------------------------------------------------------------------

Host = Union[GehmanApprox, OdometerApprox]


def dyadic_structure(spec: SubshiftSpec, host: Host, k: int) -> PeriodicStructure:
    """
    Candidate nested structure with n_j = 2 at every level, alpha_k = 2^k.

    On a prefix-tree host D_j is the hull of the leaves recognized at block
    positions congruent to 0 mod 2^j. On an odometer host D_j is the cylinder
    subtree of residue 0 mod 2^j.

    Raises:
        DomainError: if the spec is not a primitive constant-length-2 substitution or k < 0
        RecognizabilityError: if some leaf position is ambiguous at level k
    """
    if spec.rule is None or not spec.primitive:
        raise DomainError(f"{spec.name} is not a primitive constant-length-2 substitution")
    if k < 0:
        raise DomainError("k must be non-negative")
    X = host.dendrite
    levels: List[StructureLevel] = []
    if isinstance(host, OdometerApprox):
        if k > host.depth:
            raise DomainError(f"k={k} exceeds the odometer depth {host.depth}")
        levels = [StructureLevel(host.cylinder(0, j), 2) for j in range(1, k + 1)]
    else:
        for j in range(1, k + 1):
            residues = block_positions(spec, host.words, j)
            ambiguous = [w for w in host.words if residues[w] is None]
            if ambiguous:
                raise RecognizabilityError(
                    f"{len(ambiguous)} depth-{host.depth} words (first {ambiguous[0]!r}) have ambiguous "
                    f"positions mod {2 ** j}; use a larger depth"
                )
            anchors = [host.addresses[w] for w in host.words if residues[w] == 0]
            levels.append(StructureLevel(X.convex_hull(anchors), 2))
    label = f"{spec.name} dyadic k={k} on {'odometer' if isinstance(host, OdometerApprox) else 'prefix tree'}"
    return PeriodicStructure(levels, X.whole(), label)
