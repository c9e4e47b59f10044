"""Higher-dimensional layer machinery.

A local observable whose site indices involve primes beyond the model's own
is handled by extending the model: the prime support of the observable is
merged into the basis, layers become d-dimensional exponent regions, and the
layer measure is the product, over lines parallel to the interacting axis, of
independent chains (pi, Q).  Region pressures over those layers feed the
smooth-number weight series, giving the pressure of any local observable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from . import arith
from .arith import PrimeBasis, Region
from .errors import InfeasibleSizeError, PreconditionError
from .ising1d import ModelParams, TransferData, q_power, transfer
from .numutil import RunningLogSum
from .observables import FirstLayerObservable, Observable

__all__ = [
    "ExtendedModel",
    "RegionPressureKey",
    "SeriesRow",
    "extend_observable",
    "region_pressure",
    "kie_pressure",
    "finite_pressure_exact_d",
    "layer_region_shapes",
]

DEPENDENCE_CAP = 25
_CHUNK_BITS = 20


def _prime_factors(n: int) -> Dict[int, int]:
    fs: Dict[int, int] = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            fs[f] = fs.get(f, 0) + 1
            n //= f
        f += 1 if f == 2 else 2
    if n > 1:
        fs[n] = fs.get(n, 0) + 1
    return fs


@dataclass(frozen=True, eq=False)
class ExtendedModel:
    """Merged prime basis, the axis carrying the chain interaction, and the
    chain parameters.  All other axes are interaction-free, so the layer
    measure is a product of independent chains along base_axis lines."""

    basis: PrimeBasis
    base_axis: int
    params: ModelParams

    def transfer(self) -> TransferData:
        td = getattr(self, "_td", None)
        if td is None:
            td = transfer(self.params)
            object.__setattr__(self, "_td", td)
        return td


@dataclass(frozen=True)
class RegionPressureKey:
    region: Region
    fstar: FirstLayerObservable
    t: float


def extend_observable(f: Observable, base_basis: PrimeBasis,
                      params: ModelParams) -> Tuple[ExtendedModel, FirstLayerObservable]:
    """Merge the prime support of f into the basis and rewrite each monomial
    as exponent-vector offsets; f becomes a first-layer observable of the
    extended model."""
    if base_basis.dim != 1:
        raise PreconditionError(
            "the base model interacts along a single prime; multi-prime "
            "interacting bases are not supported"
        )
    if f.is_zero():
        raise ValueError("cannot extend the zero observable")
    primes = set(base_basis.primes)
    for key, _ in f.terms:
        for i in key:
            primes.update(_prime_factors(i))
    merged = tuple(sorted(primes))
    basis = PrimeBasis(merged)
    dim = basis.dim
    pairs = []
    for key, coeff in f.terms:
        offsets = []
        for i in key:
            li = arith.decompose(i, basis)
            if li.r != 1:
                raise RuntimeError("index does not factor over its own prime support")
            offsets.append(li.exponents)
        pairs.append((offsets, coeff))
    fstar = FirstLayerObservable.make(pairs, dim=dim)
    model = ExtendedModel(basis=basis, base_axis=merged.index(base_basis.primes[0]),
                          params=params)
    return model, fstar


# ---------------------------------------------------------------------------
# Exact region pressures.
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def region_pressure(key: RegionPressureKey, model: ExtendedModel,
                    cap: int = DEPENDENCE_CAP) -> float:
    """Psi = log E exp(t * sum_{x in region} f*(theta_x .)) under the
    product-of-lines layer measure, exactly.

    The dependence set S = region + support(f*) is grouped into lines along
    the interacting axis; lines coupled by no common tilt monomial factor
    out, so the enumeration cost is 2^(largest coupled component), capped by
    |S| <= cap.  Within a line, unassigned gaps are summed by matrix powers.
    """
    region, fstar, t = key.region, key.fstar, key.t
    dim = model.basis.dim
    if fstar.dim != dim or (region.points and region.dim != dim):
        raise ValueError("region / observable dimension mismatch with the model")
    axis = model.base_axis
    const_coeff = sum(c for offs, c in fstar.terms if not offs)

    sites = set()
    monomials = []  # (tuple of sites, coeff) instances over the region
    for x in region.points:
        for offs, coeff in fstar.terms:
            if not offs:
                continue
            inst = tuple(sorted(tuple(a + b for a, b in zip(x, o)) for o in offs))
            monomials.append((inst, coeff))
            sites.update(inst)
    psi = t * const_coeff * region.cardinality
    if not sites:
        return psi
    if len(sites) > cap:
        raise InfeasibleSizeError(
            f"dependence set has {len(sites)} sites (cap {cap}); an exact "
            "enumeration is infeasible, use the finite-volume route or a "
            "Monte Carlo estimate"
        )

    site_list = sorted(sites)
    site_id = {s: i for i, s in enumerate(site_list)}
    lines: Dict[Tuple[int, ...], List[Tuple[int, int]]] = {}
    for s in site_list:
        lkey = s[:axis] + s[axis + 1 :]
        lines.setdefault(lkey, []).append((s[axis], site_id[s]))
    line_keys = sorted(lines)
    line_of_site = {}
    for li, lk in enumerate(line_keys):
        lines[lk].sort()
        for _, sid in lines[lk]:
            line_of_site[sid] = li

    uf = _UnionFind(len(line_keys))
    for inst, _ in monomials:
        first = line_of_site[site_id[inst[0]]]
        for s in inst[1:]:
            uf.union(first, line_of_site[site_id[s]])

    comp_lines: Dict[int, List[int]] = {}
    for li in range(len(line_keys)):
        comp_lines.setdefault(uf.find(li), []).append(li)

    td = model.transfer()
    log_q = {}

    def lq(gap: int) -> np.ndarray:
        if gap not in log_q:
            log_q[gap] = np.log(q_power(td, gap))
        return log_q[gap]

    for comp in comp_lines.values():
        comp_sites = []
        for li in comp:
            comp_sites.extend(sid for _, sid in lines[line_keys[li]])
        local = {sid: b for b, sid in enumerate(sorted(comp_sites))}
        m = len(local)
        comp_monos = [
            ([local[site_id[s]] for s in inst], coeff)
            for inst, coeff in monomials
            if line_of_site[site_id[inst[0]]] in comp
        ]
        acc = RunningLogSum()
        total = 1 << m
        chunk = 1 << min(_CHUNK_BITS, m)
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
            bits = [((idx >> b) & 1) for b in range(m)]
            logp = np.zeros(idx.size)
            for li in comp:
                entries = lines[line_keys[li]]
                v0, sid0 = entries[0]
                first = np.log(td.pi @ q_power(td, v0))
                logp = logp + first[bits[local[sid0]]]
                for (va, sa), (vb, sb) in zip(entries, entries[1:]):
                    logp = logp + lq(vb - va)[bits[local[sa]], bits[local[sb]]]
            tilt = np.zeros(idx.size)
            for bit_ids, coeff in comp_monos:
                prod = 1.0 - 2.0 * bits[bit_ids[0]]
                for b in bit_ids[1:]:
                    prod = prod * (1.0 - 2.0 * bits[b])
                tilt = tilt + coeff * prod
            acc.add(logp + t * tilt)
        psi += acc.value()
    return psi


# ---------------------------------------------------------------------------
# The smooth-number pressure series.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesRow:
    j: int
    n_j: int
    w_j: float
    psi_j: float
    partial_sum: float
    tail_bound: float


def kie_pressure(f: Observable, params: ModelParams, t: float, tol: float,
                 base_prime: int = 2, cap: int = DEPENDENCE_CAP) -> Tuple[float, List[SeriesRow]]:
    """Pressure of a local observable under the multiplicative measure via
    the smooth-number series kappa * sum_j (1/n_j - 1/n_{j+1}) Psi_j.

    Psi_j is evaluated on the canonical cardinality-j region (the exponent
    vectors of the first j smooth numbers, which every layer region of
    cardinality j equals).  Truncation uses |Psi_j| <= j |t| sup|f*| together
    with the exact remaining mass sum_{j>J} j w_j (mass identity).  If the
    tolerance would require regions past the dependence-set cap, the cap
    error from region_pressure propagates.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    model, fstar = extend_observable(f, PrimeBasis((base_prime,)), params)
    sup = fstar.sup_bound
    kappa_fr = model.basis.kappa_fraction()
    value = 0.0
    mass = Fraction(0)
    rows: List[SeriesRow] = []
    points: List[Tuple[int, ...]] = []
    for j, n_j, n_next, w_j in arith.iter_kie_weights(model.basis):
        points.append(arith.decompose(n_j, model.basis).exponents)
        region = Region(frozenset(points))
        try:
            psi = region_pressure(RegionPressureKey(region, fstar, t), model, cap=cap)
        except InfeasibleSizeError as err:
            raise InfeasibleSizeError(
                f"series term j={j} exceeds the exact-enumeration cap before "
                f"reaching tol={tol:g} (remaining tail bound "
                f"{float(1 - mass) * abs(t) * sup:.3g}): {err}"
            ) from err
        value += w_j * psi
        mass += j * kappa_fr * Fraction(n_next - n_j, n_j * n_next)
        tail = float(1 - mass) * abs(t) * sup
        rows.append(SeriesRow(j, n_j, w_j, psi, value, tail))
        if tail < tol:
            return value, rows
        if j > 100_000:
            raise RuntimeError("pressure series failed to reach tolerance")


def finite_pressure_exact_d(f: Observable, t: float, n: int, params: ModelParams,
                            base_prime: int = 2, cap: int = DEPENDENCE_CAP) -> float:
    """(1/n) sum over layers r <= n of the exact region pressure of the layer
    region; the finite-volume counterpart of kie_pressure, used for
    convergence diagnostics and as the authoritative fallback."""
    if n < 1:
        raise ValueError("volume must be >= 1")
    model, fstar = extend_observable(f, PrimeBasis((base_prime,)), params)
    partition = arith.layer_partition(n, model.basis)
    cache: Dict[frozenset, float] = {}
    total = 0.0
    for region in partition.values():
        if region.points not in cache:
            cache[region.points] = region_pressure(
                RegionPressureKey(region, fstar, t), model, cap=cap
            )
        total += cache[region.points]
    return total / n


def layer_region_shapes(basis: PrimeBasis, n_max: int,
                        max_cardinality: int) -> Dict[int, set]:
    """Distinct layer-region point sets of cardinality <= max_cardinality
    arising as some layer of some volume n <= n_max, grouped by cardinality.

    For a fixed basis the region of layer r at volume n is determined by
    floor(n / r), so equal-cardinality regions coincide; the scan verifies
    that instead of assuming it.
    """
    shapes: Dict[int, set] = {}
    for n in range(1, n_max + 1):
        for region in arith.layer_partition(n, basis).values():
            c = region.cardinality
            if c <= max_cardinality:
                shapes.setdefault(c, set()).add(region.points)
    return shapes
