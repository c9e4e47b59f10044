"""Scaled cumulant generating functions of multiplicative ergodic averages,
their Legendre-transform rate functions, and the Monte Carlo harness.

For a first-layer observable f the SCGF is the weighted series
F(t) = sum_k 2^{-(k+2)} P^k(t f*), with P^k the tilted layer pressures.  Its
Legendre transform I(x) = sup_t (tx - F(t)) is the large-deviation rate of
X_N = (1/N) sum_{i<=N} f(s_{i.}), and F''(0) is the CLT variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import gibbs
from .ising1d import ModelParams, log_partition_scaled, tilted_prefix_pressures
from .observables import FirstLayerObservable, Observable, to_first_layer

__all__ = [
    "ScgfCurve",
    "RateCurve",
    "EmpiricalRow",
    "series_depth_for",
    "scgf",
    "scgf_values",
    "scgf_curve",
    "scgf_via_free_energy",
    "legendre",
    "rate_curve",
    "clt_variance",
    "finite_pressure_exact",
    "multiplicative_average",
    "empirical_ldp_check",
    "clt_mc_summary",
]

_T_CAP = 2.0**30
_SATURATION_TOL = 1e-11


def series_depth_for(fstar: FirstLayerObservable, t_max: float, tol: float) -> int:
    """Smallest K with tail bound sum_{k>K} (k+1) |t| sup / 2^{k+2} < tol,
    where sup bounds |f*|; the tail bound realizes |P^k| <= (k+1) |t| sup."""
    sup = fstar.sup_bound
    k = 0
    while True:
        if abs(t_max) * sup * (k + 3) * 0.5 ** (k + 2) < tol or k > 10_000:
            return k
        k += 1


def scgf_values(fstar: FirstLayerObservable, params, t, tol: float = 1e-10,
                depth: int = None):
    """Vectorized SCGF: returns (values, truncation bounds) for an array of
    tilts, summing the layer-pressure series to a common rigorous depth.

    An explicit `depth` pins the truncation point (used to keep outputs
    bit-identical when a grid is evaluated in independent blocks)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    sup = fstar.sup_bound
    if depth is None:
        t_max = float(np.max(np.abs(t_arr))) if t_arr.size else 0.0
        depth = series_depth_for(fstar, t_max, tol)
    prefix = tilted_prefix_pressures(depth, fstar, t_arr, params)  # (depth+1, nt)
    # fixed-order accumulation: results must not depend on how a grid is
    # blocked across workers, so no shape-dependent BLAS reductions here
    values = np.zeros(t_arr.size)
    for k in range(depth + 1):
        values += 0.5 ** (k + 2) * prefix[k]
    errs = np.abs(t_arr) * sup * (depth + 3) * 0.5 ** (depth + 2)
    return values, errs


def scgf(fstar: FirstLayerObservable, params, t: float, tol: float = 1e-10) -> Tuple[float, float]:
    """F(t) = sum_k P^k(t f*) / 2^{k+2} and its truncation-error bound."""
    values, errs = scgf_values(fstar, params, t, tol)
    return float(values[0]), float(errs[0])


@lru_cache(maxsize=65536)
def _logz_free(n_bonds: int, bond: float, field: float) -> float:
    return log_partition_scaled(n_bonds, bond, field, "free", 0.0)


def scgf_via_free_energy(t: float, params: ModelParams, tol: float = 1e-10) -> float:
    """SCGF of the coupling observable s_1 s_2 through the free-energy route:
    the difference of layer free-energy series at bond weights
    beta*J + t and beta*J (per-site factors cancel in the difference).

    Independent of the tilted-transfer route; the two agree at h = 0, where
    the finite free-boundary chain law coincides with the infinite chain
    marginal.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    bond = params.beta * params.J
    field = params.beta * params.h
    total = 0.0
    p = 0
    while True:
        term = _logz_free(p + 1, bond + t, field) - _logz_free(p + 1, bond, field)
        total += 0.5 ** (p + 2) * term
        # |d logZ / d bond| <= number of bonds = p+1
        if abs(t) * (p + 3) * 0.5 ** (p + 2) < tol:
            return total
        p += 1


# ---------------------------------------------------------------------------
# Curves.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScgfCurve:
    """Sampled (t, F, F') with per-point truncation bounds."""

    grid: np.ndarray
    F: np.ndarray
    Fprime: np.ndarray
    trunc_err: np.ndarray
    deriv_step: float

    def validate(self, convexity_slack: float = 1e-9) -> None:
        g = self.grid
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        zero = np.where(g == 0.0)[0]
        if zero.size and abs(self.F[zero[0]]) > 1e-12:
            raise ValueError("F(0) must vanish")
        if g.size >= 3:
            second = np.diff(self.F, 2)
            if np.any(second < -convexity_slack * np.maximum(1.0, np.abs(self.F[1:-1]))):
                raise ValueError("curve is not convex")
        if np.any(np.diff(self.Fprime) < -1e-9):
            raise ValueError("derivative is not increasing")

    def csv_header(self) -> List[str]:
        return ["t", "F", "Fprime", "trunc_err"]

    def csv_rows(self):
        for i in range(self.grid.size):
            yield [self.grid[i], self.F[i], self.Fprime[i], self.trunc_err[i]]


def scgf_curve(fstar: FirstLayerObservable, params, t_grid, tol: float = 1e-10,
               deriv_step: float = 1e-4) -> ScgfCurve:
    grid = np.asarray(t_grid, dtype=float)
    values, errs = scgf_values(fstar, params, grid, tol)
    up, _ = scgf_values(fstar, params, grid + deriv_step, tol)
    dn, _ = scgf_values(fstar, params, grid - deriv_step, tol)
    fprime = (up - dn) / (2.0 * deriv_step)
    curve = ScgfCurve(grid=grid, F=values, Fprime=fprime, trunc_err=errs,
                      deriv_step=deriv_step)
    curve.validate()
    return curve


@dataclass(frozen=True, eq=False)
class RateCurve:
    """Sampled rate function: x, I(x), maximizing tilt t*, and a domain flag
    (0 interior, 1 outside the closed range of F')."""

    x: np.ndarray
    I: np.ndarray
    t_star: np.ndarray
    domain_flag: np.ndarray
    domain: Tuple[float, float]

    def csv_header(self) -> List[str]:
        return ["x", "I", "t_star", "domain_flag"]

    def csv_rows(self):
        for i in range(self.x.size):
            yield [self.x[i], self.I[i], self.t_star[i], int(self.domain_flag[i])]


def _memoized_scgf(fstar, params, tol) -> Callable[[float], float]:
    cache = {}

    def F(t: float) -> float:
        if t not in cache:
            cache[t] = scgf(fstar, params, t, tol)[0]
        return cache[t]

    return F


def legendre(curve_or_f, x: float, *, deriv_step: float = 1e-4,
             t_tol: float = 1e-12, slope_bound: float = None) -> Tuple[float, float]:
    """I(x) = sup_t (t x - F(t)) for strictly convex F, by monotone
    root-finding on F' (expanding bracket then bisection).

    Accepts either a callable F or a ScgfCurve (interpolated).  Outside the
    closed range of F' the supremum is infinite: returns (inf, nan).
    """
    if isinstance(curve_or_f, ScgfCurve):
        curve = curve_or_f
        if np.any(np.diff(curve.Fprime) < -1e-12):
            raise ValueError("non-convex curve: F' must be increasing")
        if x < curve.Fprime[0] or x > curve.Fprime[-1]:
            return math.inf, math.nan
        t_star = float(np.interp(x, curve.Fprime, curve.grid))
        f_at = float(np.interp(t_star, curve.grid, curve.F))
        val = t_star * x - f_at
        return (0.0 if -1e-10 < val < 0.0 else val), t_star

    F = curve_or_f
    # the range of F' is open for bounded observables; endpoints are sentinels
    if slope_bound is not None and abs(x) >= slope_bound:
        return math.inf, math.nan

    def fd(t: float) -> float:
        return (F(t + deriv_step) - F(t - deriv_step)) / (2.0 * deriv_step)

    lo, hi = -1.0, 1.0
    f_hi = fd(hi)
    while f_hi < x:
        if hi >= _T_CAP:
            return math.inf, math.nan
        prev = f_hi
        hi *= 2.0
        f_hi = fd(hi)
        if f_hi < x and f_hi - prev <= _SATURATION_TOL * max(1.0, abs(x)):
            return math.inf, math.nan
    f_lo = fd(lo)
    while f_lo > x:
        if -lo >= _T_CAP:
            return math.inf, math.nan
        prev = f_lo
        lo *= 2.0
        f_lo = fd(lo)
        if f_lo > x and prev - f_lo <= _SATURATION_TOL * max(1.0, abs(x)):
            return math.inf, math.nan
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fd(mid) < x:
            lo = mid
        else:
            hi = mid
        if hi - lo <= t_tol * max(1.0, abs(lo), abs(hi)):
            break
    t_star = 0.5 * (lo + hi)
    val = t_star * x - F(t_star)
    return (0.0 if -1e-10 < val <= 0.0 else val), t_star


def rate_curve(fstar: FirstLayerObservable, params, x_values, tol: float = 1e-10,
               deriv_step: float = 1e-4) -> RateCurve:
    F = _memoized_scgf(fstar, params, tol)
    sup = fstar.sup_bound
    xs = np.asarray(x_values, dtype=float)
    I = np.empty_like(xs)
    ts = np.empty_like(xs)
    flags = np.zeros(xs.size, dtype=int)
    for i, x in enumerate(xs):
        val, t_star = legendre(F, float(x), deriv_step=deriv_step, slope_bound=sup)
        I[i] = val
        ts[i] = t_star
        flags[i] = 0 if math.isfinite(val) else 1
    return RateCurve(x=xs, I=I, t_star=ts, domain_flag=flags, domain=(-sup, sup))


def clt_variance(fstar: FirstLayerObservable, params, tol: float = 1e-12,
                 step: float = 1e-2) -> float:
    """F''(0) by central second differences at steps (h, h/2) combined with
    one Richardson step; the series values are exact up to `tol`, so the
    error model is O(step^4) + O((tol + eps)/step^2)."""
    F = _memoized_scgf(fstar, params, tol)

    def d2(h: float) -> float:
        return (F(h) - 2.0 * F(0.0) + F(-h)) / (h * h)

    return (4.0 * d2(step / 2.0) - d2(step)) / 3.0


def finite_pressure_exact(fstar: FirstLayerObservable, t: float, n: int, params) -> float:
    """(1/n) log E exp(t * sum_{i<=n} f(s_{i.})), exact at finite volume:
    the expectation factorizes over layers, each contributing the tilted
    pressure of its chain window; layers are grouped by psi2 depth."""
    if n < 1 or n > 1 << 20:
        raise ValueError("volume must be in [1, 2^20]")
    counts = gibbs.layer_count_by_depth(n)
    p_max = max(counts)
    prefix = tilted_prefix_pressures(p_max, fstar, t, params)
    total = 0.0
    for p, c in sorted(counts.items()):
        total += c * float(prefix[p])
    return total / n


# ---------------------------------------------------------------------------
# Monte Carlo harness.
# ---------------------------------------------------------------------------


def multiplicative_average(batch: "gibbs.SampleBatch", f: Observable, n: int) -> np.ndarray:
    """X_n(f) = (1/n) sum_{i<=n} f(s_{i.}) per replica; the batch must cover
    sites up to n * max_site(f)."""
    if n * f.max_site > batch.N:
        raise ValueError("batch volume too small for the requested average")
    cfg = batch.configurations
    x = np.zeros(batch.count)
    chunk = 4096
    for key, coeff in f.terms:
        if not key:
            x += coeff * n  # a constant contributes coeff at every shift
            continue
        factors = sorted(key)
        for start in range(1, n + 1, chunk):
            i_vals = np.arange(start, min(n, start + chunk - 1) + 1)
            prod = cfg[:, i_vals * factors[0] - 1]
            for b in factors[1:]:
                prod = prod * cfg[:, i_vals * b - 1]
            x += coeff * prod.sum(axis=1, dtype=np.float64)
    return x / n


@dataclass(frozen=True)
class EmpiricalRow:
    x: float
    emp_rate: float
    rate: float
    censored: bool
    n_tail: int


def empirical_ldp_check(f: Observable, params, n: int, count: int, seed: int,
                        thresholds: Sequence[float], tol: float = 1e-8) -> List[EmpiricalRow]:
    """Empirical tail decay rates -(1/n) log P(X_n >= x) next to the analytic
    rate I(x).  Diagnostic output: tail estimation converges slowly, so no
    tolerance is enforced here; empty tails are reported as censored."""
    fstar = to_first_layer(f)
    batch = gibbs.sample(n * f.max_site, params, count, seed)
    x_vals = multiplicative_average(batch, f, n)
    F = _memoized_scgf(fstar, params, tol)
    rows = []
    for x in thresholds:
        n_tail = int(np.count_nonzero(x_vals >= x))
        if n_tail == 0:
            emp = math.inf
            censored = True
        else:
            emp = -math.log(n_tail / count) / n
            censored = False
        rate, _ = legendre(F, float(x), slope_bound=fstar.sup_bound)
        rows.append(EmpiricalRow(float(x), emp, rate, censored, n_tail))
    return rows


def clt_mc_summary(f: Observable, params, n: int, count: int, seed: int,
                   tol: float = 1e-12) -> dict:
    """Seeded mean/variance check of X_n against F'(0) and F''(0)."""
    fstar = to_first_layer(f)
    batch = gibbs.sample(n * f.max_site, params, count, seed)
    x_vals = multiplicative_average(batch, f, n)
    F = _memoized_scgf(fstar, params, tol)
    h = 1e-4
    fprime0 = (F(h) - F(-h)) / (2.0 * h)
    sigma2 = clt_variance(fstar, params, tol)
    emp_mean = float(x_vals.mean())
    emp_var = float(x_vals.var(ddof=1))
    return {
        "emp_mean": emp_mean,
        "emp_se": float(x_vals.std(ddof=1) / math.sqrt(count)),
        "fprime0": float(fprime0),
        "n_times_var": n * emp_var,
        "sigma2": float(sigma2),
    }
