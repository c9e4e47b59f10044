"""Integer-side structure of the multiplicative lattice.

Every positive integer factors uniquely as r * prod(p_i^{x_i}) with r coprime
to the chosen prime basis.  The i <-> (r, x) relabeling partitions [1, N] into
geometric-progression layers; the counting measures of those layers converge
to explicit weight series (the dyadic 1/2^{p+2} weights for basis {2}, and
the smooth-number series kappa * (1/n_j - 1/n_{j+1}) for general bases).
Everything here is exact integer / rational arithmetic; floating point enters
only when a weight is finally materialized.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Dict, Iterator, List, Tuple

__all__ = [
    "PrimeBasis",
    "LayerIndex",
    "Region",
    "WeightSeries",
    "decompose",
    "psi2",
    "layer_partition",
    "koroa_weights",
    "koroa_finite_average",
    "koroa_series",
    "smooth_numbers",
    "iter_kie_weights",
    "kie_weights",
    "canonical_region",
]

LOG2 = math.log(2.0)

# 64-bit guard: exact integer comparisons are cheap for any Python int, but we
# document the intended operating range so downstream size checks stay honest.
MAX_VOLUME = 1 << 40


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class PrimeBasis:
    """A strictly increasing tuple of distinct primes p_1 < ... < p_d."""

    primes: Tuple[int, ...]

    def __post_init__(self):
        if not self.primes:
            raise ValueError("prime basis must be non-empty")
        for p in self.primes:
            if not isinstance(p, int) or not _is_prime(p):
                raise ValueError(f"{p!r} is not prime")
        if any(a >= b for a, b in zip(self.primes, self.primes[1:])):
            raise ValueError("primes must be strictly increasing")

    @classmethod
    def of(cls, *primes) -> "PrimeBasis":
        return cls(tuple(int(p) for p in primes))

    @property
    def dim(self) -> int:
        return len(self.primes)

    def kappa_fraction(self) -> Fraction:
        """Density of integers coprime to the basis, by inclusion-exclusion:
        1 - 1/p_1 - 1/p_2 + 1/(p_1 p_2) - ... = prod(1 - 1/p_i)."""
        total = Fraction(0)
        for k in range(self.dim + 1):
            for subset in combinations(self.primes, k):
                prod = 1
                for p in subset:
                    prod *= p
                total += Fraction((-1) ** k, prod)
        return total

    @property
    def kappa(self) -> float:
        return float(self.kappa_fraction())


@dataclass(frozen=True)
class LayerIndex:
    """i = r * prod(p_i^x_i) with r coprime to every basis prime."""

    r: int
    exponents: Tuple[int, ...]

    def value(self, basis: PrimeBasis) -> int:
        v = self.r
        for p, x in zip(basis.primes, self.exponents):
            v *= p**x
        return v


@dataclass(frozen=True)
class Region:
    """A finite set of exponent vectors in N_0^d.  The layer regions produced
    here are always lower sets (closed under coordinatewise decrease)."""

    points: frozenset

    @property
    def cardinality(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        for pt in self.points:
            return len(pt)
        raise ValueError("empty region has no dimension")

    def is_lower_set(self) -> bool:
        for pt in self.points:
            for axis, x in enumerate(pt):
                if x > 0:
                    below = pt[:axis] + (x - 1,) + pt[axis + 1 :]
                    if below not in self.points:
                        return False
        return True


def decompose(i: int, basis: PrimeBasis) -> LayerIndex:
    """Factor out the basis primes of i, exactly."""
    if i < 1:
        raise ValueError("index must be a positive integer")
    r = i
    exps = []
    for p in basis.primes:
        x = 0
        while r % p == 0:
            r //= p
            x += 1
        exps.append(x)
    return LayerIndex(r, tuple(exps))


def psi2(r: int, n: int) -> int:
    """Largest k with r * 2^k <= n, for odd r <= n.

    Pure integer arithmetic (repeated doubling); floating logarithms would
    misclassify the boundary cases n = r * 2^k.
    """
    if r < 1 or r % 2 == 0:
        raise ValueError("r must be an odd positive integer")
    if r > n:
        raise ValueError("r must not exceed n")
    m = r
    k = 0
    while m * 2 <= n:
        m *= 2
        k += 1
    return k


def layer_partition(n: int, basis: PrimeBasis) -> Dict[int, Region]:
    """Map r -> region of exponent vectors x with r * prod(p^x) <= n.

    The regions partition [1, n]: every i corresponds to exactly one (r, x).
    """
    if n < 1:
        raise ValueError("volume must be >= 1")
    buckets: Dict[int, set] = {}
    for i in range(1, n + 1):
        li = decompose(i, basis)
        buckets.setdefault(li.r, set()).add(li.exponents)
    return {r: Region(frozenset(pts)) for r, pts in buckets.items()}


# ---------------------------------------------------------------------------
# Dyadic averaging weights (basis {2}).
# ---------------------------------------------------------------------------


def koroa_weights(k_max: int) -> Dict[int, float]:
    """The dyadic layer-density weights p -> 1/2^{p+2}, p = 0..k_max.

    These are the limiting frequencies of psi2(i, N) = p over odd i <= N;
    they sum to 1/2 (the density of odd integers).
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    return {p: 0.5 ** (p + 2) for p in range(k_max + 1)}


def koroa_finite_average(phi: Callable[[int], object], n: int):
    """(1/n) * sum over odd i <= n of phi(psi2(i, n)), computed exactly.

    If phi returns ints or Fractions the result is an exact Fraction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 0
    for i in range(1, n + 1, 2):
        total = total + phi(psi2(i, n))
    if isinstance(total, (int, Fraction)):
        return Fraction(total, n)
    return total / n


def koroa_series(
    phi: Callable[[int], float],
    tol: float,
    growth_c: float = 1.0,
    growth_q: float = 1.0,
) -> Tuple[float, float]:
    """sum_p phi(p)/2^{p+2} truncated with a rigorous tail bound.

    The growth certificate |phi(p)| <= growth_c * max(1, p)^growth_q supplies
    the bound; the returned pair is (value, tail bound at truncation).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def tail(p_last: int) -> float:
        # terms c*p^q/2^{p+2} decay at ratio <= e^{q/p}/2 <= 2^{-1/2} once
        # p >= 2q/log 2; sum explicitly until then, geometric bound after.
        p0 = max(p_last + 1, int(math.ceil(2.0 * growth_q / LOG2)))
        s = 0.0
        for p in range(p_last + 1, p0):
            s += growth_c * max(1, p) ** growth_q * 0.5 ** (p + 2)
        ratio = 2.0 ** (-0.5)
        first = growth_c * max(1, p0) ** growth_q * 0.5 ** (p0 + 2)
        return s + first / (1.0 - ratio)

    value = 0.0
    p = 0
    while True:
        value += phi(p) * 0.5 ** (p + 2)
        b = tail(p)
        if b < tol:
            return value, b
        p += 1
        if p > 100_000:
            raise RuntimeError("series failed to satisfy tolerance")


# ---------------------------------------------------------------------------
# Smooth-number weight series (general basis).
# ---------------------------------------------------------------------------


def smooth_numbers(basis: PrimeBasis, count: int) -> List[int]:
    """First `count` integers whose prime factors all lie in the basis,
    in increasing order (n_1 = 1).  Heap merge of the prime multiples."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out: List[int] = []
    heap = [1]
    seen = {1}
    while len(out) < count:
        m = heapq.heappop(heap)
        out.append(m)
        for p in basis.primes:
            c = m * p
            if c not in seen:
                seen.add(c)
                heapq.heappush(heap, c)
    return out


def canonical_region(basis: PrimeBasis, cardinality: int) -> Region:
    """The lower set realized by layer r = 1 at the smallest volume whose
    region has the given cardinality: the exponent vectors of the first
    `cardinality` basis-smooth numbers."""
    pts = []
    for m in smooth_numbers(basis, cardinality):
        pts.append(decompose(m, basis).exponents)
    return Region(frozenset(pts))


def _upper_gamma_int(n: int, z: float) -> float:
    # Gamma(n, z) for integer n >= 1: (n-1)! e^{-z} sum_{k<n} z^k/k!
    s = 0.0
    term = 1.0
    for k in range(n):
        if k:
            term *= z / k
        s += term
    return math.factorial(n - 1) * math.exp(-z) * s


def _weight_tail_bound(j_last: int, dim: int, kappa: float) -> float:
    """Conservative bound on kappa * sum_{j > j_last} j / n_j using
    n_j >= 2^{j^{1/d} - 1}: explicit terms until x * 2^{1-x^{1/d}} is
    decreasing, then an incomplete-gamma integral bound."""
    c = LOG2
    x_dec = (dim / c) ** dim
    a = max(j_last, int(math.ceil(x_dec)))
    s = 0.0
    for j in range(j_last + 1, a + 1):
        s += j * 2.0 ** (1.0 - j ** (1.0 / dim))
    integral = 2.0 * dim * c ** (-2 * dim) * _upper_gamma_int(2 * dim, c * a ** (1.0 / dim))
    return kappa * (s + integral)


def iter_kie_weights(basis: PrimeBasis) -> Iterator[Tuple[int, int, int, float]]:
    """Yield (j, n_j, n_{j+1}, w_j) with w_j = kappa * (1/n_j - 1/n_{j+1}).

    n_j is the j-th basis-smooth number; since distinct smooth numbers have
    distinct logarithms, the counting function of {x : sum x_i log p_i <= rho}
    increments by exactly one, so these differences are the layer-cardinality
    frequencies.
    """
    kappa_fr = basis.kappa_fraction()
    heap = [1]
    seen = {1}

    def pop_next() -> int:
        m = heapq.heappop(heap)
        for p in basis.primes:
            c = m * p
            if c not in seen:
                seen.add(c)
                heapq.heappush(heap, c)
        return m

    n_cur = pop_next()
    j = 0
    while True:
        j += 1
        n_next = pop_next()
        w = float(kappa_fr * Fraction(n_next - n_cur, n_cur * n_next))
        yield j, n_cur, n_next, w
        n_cur = n_next


@dataclass(frozen=True)
class WeightSeries:
    """Truncated smooth-number weight series for a prime basis.

    weights[j] = kappa * (1/n_j - 1/n_{j+1}) is the limiting frequency (per
    unit volume) of layers whose region has cardinality j.  Mass identities:
    sum_j w_j = kappa and sum_j j * w_j = 1, both up to the declared tail.
    """

    basis: PrimeBasis
    kappa_fraction: Fraction
    smooth: Tuple[int, ...]  # n_1 .. n_{J+1}
    weights: Dict[int, float]
    truncation_tail: float

    @property
    def kappa(self) -> float:
        return float(self.kappa_fraction)

    @property
    def j_max(self) -> int:
        return len(self.weights)

    def tail_bound(self, j_last: int) -> float:
        """Conservative upper bound on sum_{j > j_last} j * w_j."""
        return _weight_tail_bound(j_last, self.basis.dim, self.kappa)

    def mass_tail(self, j_last: int) -> float:
        """Exact tail sum_{j > j_last} j * w_j via the mass identity
        sum_j j * w_j = 1 (Abel summation of the telescoping weights)."""
        if j_last >= len(self.smooth):
            raise ValueError("tail requested beyond the enumerated range")
        kf = self.kappa_fraction
        partial = Fraction(0)
        for j in range(1, j_last + 1):
            partial += j * kf * Fraction(
                self.smooth[j] - self.smooth[j - 1],
                self.smooth[j - 1] * self.smooth[j],
            )
        return float(1 - partial)

    def sum_weights(self) -> float:
        return math.fsum(self.weights.values())

    def sum_j_weights(self) -> float:
        return math.fsum(j * w for j, w in self.weights.items())


def kie_weights(basis: PrimeBasis, tolerance: float, max_terms: int = 10_000_000) -> WeightSeries:
    """Enumerate the weight series until the conservative bound on the
    remaining mass sum_{j>J} j * w_j drops below `tolerance`."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    kappa_fr = basis.kappa_fraction()
    kappa = float(kappa_fr)
    smooth: List[int] = []
    weights: Dict[int, float] = {}
    bound = math.inf
    for j, n_j, n_next, w_j in iter_kie_weights(basis):
        smooth.append(n_j)
        weights[j] = w_j
        bound = _weight_tail_bound(j, basis.dim, kappa)
        if bound < tolerance:
            smooth.append(n_next)
            break
        if j >= max_terms:
            raise RuntimeError("weight series failed to reach tolerance")
    return WeightSeries(
        basis=basis,
        kappa_fraction=kappa_fr,
        smooth=tuple(smooth),
        weights=weights,
        truncation_tail=bound,
    )
