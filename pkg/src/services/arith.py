#!/usr/bin/env python3
"""
Arithmetic Service
Mobius and Liouville sieves, Mertens sums and the averages of mu against
eventually periodic and gap-supported sequences.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.services.errors import DiagnosticError, DomainError, GapConditionError

logger = logging.getLogger(__name__)

# Block size of the compensated running sums
SUM_BLOCK = 4096


@dataclass(frozen=True)
class SieveTable:
    """
    mu and lambda for 1..N.

    Attributes:
        N: Table bound
        mu: int8 array of length N+1 (index 0 unused, holds 0)
        lam: int8 array of length N+1 (index 0 unused, holds 0)
    """

    N: int
    mu: np.ndarray
    lam: np.ndarray

    def _check(self, n: int):
        if not 1 <= n <= self.N:
            raise DomainError(f"n={n} outside the sieve range 1..{self.N}")

    def mobius(self, n: int) -> int:
        self._check(n)
        return int(self.mu[n])

    def liouville(self, n: int) -> int:
        self._check(n)
        return int(self.lam[n])

    def mertens_series(self, N: Optional[int] = None) -> np.ndarray:
        """M(1..N) as exact int64 values"""
        N = self.N if N is None else N
        if N > self.N:
            raise DomainError(f"N={N} exceeds the sieve bound {self.N}")
        return np.cumsum(self.mu[1:N + 1], dtype=np.int64)


def sieve(N: int, check: int = 0, seed: Optional[int] = None) -> SieveTable:
    """
    Build mu and lambda up to N.

    Primes up to sqrt(N) flip signs along their multiples and zero mu along
    multiples of their squares; whatever cofactor remains after dividing out
    the small primes is a single large prime.

    This is a vectorized Eratosthenes-style pass, O(N log log N) numpy work,
    rather than a linear sieve. ``linear_sieve`` builds the same table in O(N)
    pure-Python steps and is the reference it is tested against.

    Args:
        N (int): Table bound, N >= 1
        check (int): Number of random n <= N cross-checked by trial factorization
        seed (int): Seed for the cross-check sample

    Returns:
        SieveTable: mu and lambda for 1..N

    Raises:
        DomainError: if N < 1
        DiagnosticError: if the cross-check finds a mismatch
    """
    N = int(N)
    if N < 1:
        raise DomainError("sieve bound must be at least 1")

    mu = np.ones(N + 1, dtype=np.int8)
    omega = np.zeros(N + 1, dtype=np.int8)
    rest = np.arange(N + 1, dtype=np.int64)
    root = math.isqrt(N)
    is_prime = np.ones(root + 1, dtype=bool)
    is_prime[:2] = False
    for i in range(2, math.isqrt(root) + 1):
        if is_prime[i]:
            is_prime[i * i::i] = False

    for p in np.nonzero(is_prime)[0]:
        p = int(p)
        mu[p::p] *= -1
        mu[p * p::p * p] = 0
        q = p
        while q <= N:
            omega[q::q] += 1
            rest[q::q] //= p
            q *= p

    large = rest > 1
    mu[large] *= -1
    omega[large] += 1
    lam = np.where(omega % 2 == 0, 1, -1).astype(np.int8)
    mu[0] = lam[0] = 0

    table = SieveTable(N, mu, lam)
    logger.info(f"sieve: built mu/lambda up to N={N}")

    if check:
        rng = np.random.default_rng(seed)
        sample = rng.integers(1, N + 1, size=int(check))
        mismatches = cross_check(table, sample)
        if mismatches:
            raise DiagnosticError(f"sieve disagrees with factorization at n={mismatches[0]}")
    return table


def linear_sieve(N: int) -> SieveTable:
    """
    Euler's linear sieve: every composite is crossed out once by its least prime.

    Pure Python; used as an independent construction for small N.
    """
    N = int(N)
    if N < 1:
        raise DomainError("sieve bound must be at least 1")
    mu = [0] * (N + 1)
    lam = [0] * (N + 1)
    mu[1] = lam[1] = 1
    composite = [False] * (N + 1)
    primes: List[int] = []
    for i in range(2, N + 1):
        if not composite[i]:
            primes.append(i)
            mu[i] = lam[i] = -1
        for p in primes:
            if i * p > N:
                break
            composite[i * p] = True
            lam[i * p] = -lam[i]
            if i % p == 0:
                mu[i * p] = 0
                break
            mu[i * p] = -mu[i]
    return SieveTable(N, np.array(mu, dtype=np.int8), np.array(lam, dtype=np.int8))


# ----------------------------------------------------------------------
# factorization oracle
# ----------------------------------------------------------------------

def factorize(n: int) -> Dict[int, int]:
    """Trial-division factorization {prime: exponent}"""
    n = int(n)
    if n < 1:
        raise DomainError("factorize needs n >= 1")
    factors: Dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors[p] = factors.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


def mobius_by_factorization(n: int) -> int:
    factors = factorize(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def liouville_by_factorization(n: int) -> int:
    return -1 if sum(factorize(n).values()) % 2 else 1


def cross_check(table: SieveTable, ns: Sequence[int]) -> List[int]:
    """Values n where the table disagrees with trial factorization"""
    return [
        int(n) for n in ns
        if table.mobius(int(n)) != mobius_by_factorization(int(n))
        or table.liouville(int(n)) != liouville_by_factorization(int(n))
    ]


def mertens(table: SieveTable, N: int) -> int:
    """
    M(N) = sum of mu(n) for n <= N, in exact integers.

    Raises:
        DomainError: if N is outside 1..table.N
    """
    if not 1 <= N <= table.N:
        raise DomainError(f"N={N} outside the sieve range 1..{table.N}")
    return int(table.mu[1:N + 1].sum(dtype=np.int64))


# ----------------------------------------------------------------------
# compensated sums
# ----------------------------------------------------------------------

def compensated_cumsum(values: np.ndarray, block: int = SUM_BLOCK) -> np.ndarray:
    """
    Running sums with block totals carried in Neumaier-compensated arithmetic.

    Within a block plain cumulative sums are used; the carry between blocks is
    built from correctly rounded block totals.
    """
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    carry = 0.0
    compensation = 0.0
    for start in range(0, len(values), block):
        chunk = values[start:start + block]
        out[start:start + block] = (carry + compensation) + np.cumsum(chunk)
        total = math.fsum(chunk)
        t = carry + total
        if abs(carry) >= abs(total):
            compensation += (carry - t) + total
        else:
            compensation += (total - t) + carry
        carry = t
    return out


def running_averages(terms: np.ndarray) -> np.ndarray:
    if np.all(terms == np.round(terms)) and np.abs(terms).sum() < 2 ** 52:
        sums = np.cumsum(terms)
    else:
        sums = compensated_cumsum(terms)
    return sums / np.arange(1, len(terms) + 1, dtype=float)


# ----------------------------------------------------------------------
# eventually periodic averages
# ----------------------------------------------------------------------

def eventually_periodic(preperiod: Sequence[float], cycle: Sequence[float], N: int) -> np.ndarray:
    """x_1..x_N: the preperiod terms followed by repetitions of the cycle"""
    if not len(cycle):
        raise DomainError("cycle must be nonempty")
    pre = np.asarray(preperiod, dtype=float)
    cyc = np.asarray(cycle, dtype=float)
    if N <= len(pre):
        return pre[:N].copy()
    reps = math.ceil((N - len(pre)) / len(cyc))
    return np.concatenate([pre, np.tile(cyc, reps)])[:N]


@dataclass
class AverageSeries:
    """Partial averages (1/N') sum mu(n) x_n for N' = 1..N"""

    averages: np.ndarray
    final: float
    decade_max: float

    @property
    def N(self) -> int:
        return len(self.averages)


def ep_average(table: SieveTable, preperiod: Sequence[float], cycle: Sequence[float], N: int) -> AverageSeries:
    """
    Averages of mu against an eventually periodic sequence.

    Args:
        table (SieveTable): Sieve with bound >= N
        preperiod: x_1..x_m
        cycle: the repeating block x_{m+1}..x_{m+p}
        N (int): Horizon

    Returns:
        AverageSeries: every partial average, the final one, and the largest
        magnitude over the last decade N/10 <= N' <= N
    """
    if N > table.N:
        raise DomainError(f"N={N} exceeds the sieve bound {table.N}")
    x = eventually_periodic(preperiod, cycle, N)
    averages = running_averages(table.mu[1:N + 1] * x)
    tail = averages[max(0, N // 10 - 1):]
    return AverageSeries(averages, float(averages[-1]), float(np.abs(tail).max()))


def progression_average(table: SieveTable, preperiod: Sequence[float], cycle: Sequence[float], N: int) -> float:
    """
    Final ep_average value evaluated progression by progression:
    prefix term plus sum over r of x_r times the mu-sum over n = r mod p.
    """
    if N > table.N:
        raise DomainError(f"N={N} exceeds the sieve bound {table.N}")
    if not len(cycle):
        raise DomainError("cycle must be nonempty")
    m = min(len(preperiod), N)
    mu = table.mu[1:N + 1].astype(np.int64)
    prefix = math.fsum(float(mu[i]) * float(preperiod[i]) for i in range(m))
    p = len(cycle)
    classes = np.arange(N - m) % p
    class_sums = np.bincount(classes, weights=mu[m:], minlength=p) if N > m else np.zeros(p)
    periodic = math.fsum(float(cycle[r]) * float(class_sums[r]) for r in range(p))
    return (prefix + periodic) / N


# ----------------------------------------------------------------------
# gap-supported averages
# ----------------------------------------------------------------------

def check_gap(a: np.ndarray, k: int):
    """
    Raises:
        GapConditionError: naming the first support pair (n, m) with 0 < m - n < k
    """
    support = np.nonzero(a)[0] + 1
    if len(support) < 2:
        return
    gaps = np.diff(support)
    bad = np.nonzero(gaps < k)[0]
    if len(bad):
        i = int(bad[0])
        raise GapConditionError(int(support[i]), int(support[i + 1]), k)


def gap_sequence(N: int, k: int, seed: Optional[int] = None, values: str = "uniform") -> np.ndarray:
    """
    Random a_1..a_N in [0, 1] whose support indices are at least k apart.

    Args:
        values (str): "uniform" for U[0,1] values, "ones" for indicator values
    """
    if k < 1:
        raise DomainError("gap must be at least 1")
    rng = np.random.default_rng(seed)
    steps = k + rng.geometric(0.5, size=N // k + 2) - 1
    positions = int(rng.integers(1, k + 1)) + np.concatenate([[0], np.cumsum(steps)])
    positions = positions[positions <= N]
    a = np.zeros(N)
    a[positions - 1] = rng.random(len(positions)) if values == "uniform" else 1.0
    return a


@dataclass
class HoledAverage:
    """
    Running statistic of (1/N') sum w_n a_n.

    Attributes:
        averages: signed averages for N' = 1..N
        running_sup: running sup of |average| over start <= N' <= N
        bound: 1/k
        start: first N' of the running sup
        finite_form_ok: |average(N')| <= 1/k + 1/N' at every N' (meaningful for w = 1)
        max_excess: largest |average(N')| - 1/k over N' >= start
    """

    averages: np.ndarray
    running_sup: np.ndarray
    bound: float
    start: int
    finite_form_ok: bool
    max_excess: float

    @property
    def sup(self) -> float:
        return float(self.running_sup[-1])


Weights = Union[SieveTable, Sequence[int], np.ndarray, None]


def holed_average(weights: Weights, a: Sequence[float], k: int, N: Optional[int] = None,
                  start: int = 1) -> HoledAverage:
    """
    Averages of a gap-k supported sequence against weights in {-1, 0, 1}.

    Args:
        weights: SieveTable (uses mu), an explicit weight sequence w_1.., or None for w = 1
        a: a_1..a_N with values in [0, 1]
        k (int): Gap of the support
        N (int): Horizon (default len(a))
        start (int): First N' included in the running sup

    Raises:
        GapConditionError: if two support indices are closer than k
        DomainError: on values outside [0, 1] or weights outside {-1, 0, 1}
    """
    a = np.asarray(a, dtype=float)
    N = len(a) if N is None else int(N)
    if N > len(a) or N < 1:
        raise DomainError(f"N={N} outside 1..{len(a)}")
    a = a[:N]
    if np.any((a < 0) | (a > 1)):
        raise DomainError("holed sequence values must lie in [0, 1]")
    check_gap(a, k)

    if weights is None:
        w = np.ones(N)
    elif isinstance(weights, SieveTable):
        if N > weights.N:
            raise DomainError(f"N={N} exceeds the sieve bound {weights.N}")
        w = weights.mu[1:N + 1].astype(float)
    else:
        w = np.asarray(weights, dtype=float)[:N]
        if len(w) < N:
            raise DomainError("weight sequence shorter than N")
        if not np.all(np.isin(w, (-1.0, 0.0, 1.0))):
            raise DomainError("weights must lie in {-1, 0, 1}")

    averages = running_averages(w * a)
    n = np.arange(1, N + 1, dtype=float)
    finite_form_ok = bool(np.all(np.abs(averages) <= 1.0 / k + 1.0 / n + 1e-12))
    start = max(1, min(int(start), N))
    window = np.abs(averages[start - 1:])
    running_sup = np.maximum.accumulate(window)
    return HoledAverage(averages, running_sup, 1.0 / k, start, finite_form_ok,
                        float(window.max() - 1.0 / k))
