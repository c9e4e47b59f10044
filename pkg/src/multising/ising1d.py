"""Exact computations for the nearest-neighbor chain living on each layer.

The chain on sites 0..n has Boltzmann weight exp(beta * (J * sum s_i s_{i+1}
+ h * sum s_i [+ boundary term])).  Its transfer matrix K(a, b) =
exp(beta * (J a b + h b)) has explicit Perron data; the induced Markov chain
(pi, Q) is the infinite-volume layer measure with free boundary at the left
end.  Spin indexing everywhere: index 0 is +1, index 1 is -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSizeError, PreconditionError
from .observables import FirstLayerObservable

__all__ = [
    "SPINS",
    "BOUNDARY_CONDITIONS",
    "ModelParams",
    "TransferData",
    "transfer",
    "log_partition",
    "log_partition_scaled",
    "cylinder_logprob",
    "chain_marginal_logprob",
    "q_power",
    "marginal_entropy",
    "finite_volume_entropy",
    "tilted_layer_pressure",
    "tilted_prefix_pressures",
]

SPINS = (1, -1)
BOUNDARY_CONDITIONS = ("free", "plus", "minus")


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature beta, coupling J, field h.  Any signs allowed."""

    beta: float
    J: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        for name in ("beta", "J", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise PreconditionError(f"parameter {name} must be finite, got {v!r}")


@dataclass(frozen=True, eq=False)
class TransferData:
    """Transfer matrix K, Perron pair (lam, e_tilde), Markov data (Q, pi)."""

    params: ModelParams
    K: np.ndarray
    lam: float
    e_tilde: np.ndarray
    Q: np.ndarray
    pi: np.ndarray
    log_Q: np.ndarray
    log_pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_qpow", {0: np.eye(2), 1: self.Q})


def transfer(params: ModelParams) -> TransferData:
    """Closed-form Perron data of the 2x2 transfer matrix.

    lam = e^{bJ} cosh(bh) + sqrt(e^{2bJ} sinh^2(bh) + e^{-2bJ}); the right
    eigenvector is proportional to (K(+,-), lam - K(+,+)), strictly positive.
    The initial law pi is the limiting marginal of the first chain spin,
    evaluated from its closed-form ratio (the second factor of each product
    cancels but is kept as displayed).
    """
    b, J, h = params.beta, params.J, params.h
    bJ, bh = b * J, b * h
    K = np.empty((2, 2))
    try:
        for ia, sa in enumerate(SPINS):
            for ib, sb in enumerate(SPINS):
                K[ia, ib] = math.exp(bJ * sa * sb + bh * sb)
    except OverflowError:
        raise PreconditionError("transfer matrix overflow; |beta*(J,h)| too large") from None
    if not np.all(np.isfinite(K)):
        raise PreconditionError("transfer matrix overflow; |beta*(J,h)| too large")
    lam = math.exp(bJ) * math.cosh(bh) + math.hypot(
        math.exp(bJ) * math.sinh(bh), math.exp(-bJ)
    )
    # solve (K - lam) v = 0 from the row whose diagonal sits farther from
    # lam; the other choice cancels catastrophically for strong fields
    if K[0, 0] <= K[1, 1]:
        v = np.array([K[0, 1], lam - K[0, 0]])
    else:
        v = np.array([lam - K[1, 1], K[1, 0]])
    e_tilde = v / math.sqrt(v @ v)
    Q = K * e_tilde[None, :] / (lam * e_tilde[:, None])
    num = math.exp(bh) * sum(
        math.exp(bJ * sa + bh * sa) * e_tilde[ia] for ia, sa in enumerate(SPINS)
    ) * e_tilde.sum()
    den = lam * sum(math.exp(bh * sa) * e_tilde[ia] for ia, sa in enumerate(SPINS)) * e_tilde.sum()
    p_plus = num / den
    pi = np.array([p_plus, 1.0 - p_plus])
    return TransferData(
        params=params,
        K=K,
        lam=lam,
        e_tilde=e_tilde,
        Q=Q,
        pi=pi,
        log_Q=np.log(Q),
        log_pi=np.log(pi),
    )


def _as_transfer(obj) -> TransferData:
    if isinstance(obj, TransferData):
        return obj
    return transfer(obj)


def q_power(tdata: TransferData, n: int) -> np.ndarray:
    """Q^n with caching on the TransferData instance."""
    cache = tdata._qpow
    if n not in cache:
        cache[n] = np.linalg.matrix_power(tdata.Q, n)
    return cache[n]


def _spin_index(value: int) -> int:
    if value == 1:
        return 0
    if value == -1:
        return 1
    raise ValueError(f"spin value must be +1 or -1, got {value!r}")


# ---------------------------------------------------------------------------
# Partition functions and finite-volume quantities.
# ---------------------------------------------------------------------------


def log_partition_scaled(n_bonds: int, bond: float, field: float, right_bc: str = "free",
                         bc_bond: float = 0.0) -> float:
    """log Z for the chain on sites 0..n_bonds with per-bond weight e^{bond*ss'}
    and per-site weight e^{field*s}; for right_bc plus/minus the last site
    carries an extra weight e^{+-bc_bond*s}.

    Vector-transfer products with per-step rescaling; no exponential of an
    extensive quantity is ever formed.
    """
    if n_bonds < 0:
        raise ValueError("n_bonds must be >= 0")
    if right_bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {right_bc!r}")
    K = np.empty((2, 2))
    for ia, sa in enumerate(SPINS):
        for ib, sb in enumerate(SPINS):
            K[ia, ib] = math.exp(bond * sa * sb + field * sb)
    v = np.array([math.exp(field), math.exp(-field)])
    scale = 0.0
    for _ in range(n_bonds):
        v = v @ K
        m = v.max()
        v /= m
        scale += math.log(m)
    if right_bc != "free":
        sign = 1.0 if right_bc == "plus" else -1.0
        v = v * np.array([math.exp(sign * bc_bond), math.exp(-sign * bc_bond)])
    return scale + math.log(v.sum())


def log_partition(n_bonds: int, params: ModelParams, right_bc: str = "free",
                  bc_coupling: str = "J") -> float:
    """log Z of the chain on sites 0..n_bonds.

    The plus/minus boundary adds energy -beta*J_bc*(+-s_last); J_bc is the
    model coupling J by default, or 1 with bc_coupling="1" (the two agree in
    the J=1 normalization).
    """
    if bc_coupling not in ("J", "1"):
        raise ValueError("bc_coupling must be 'J' or '1'")
    jbc = params.J if bc_coupling == "J" else 1.0
    return log_partition_scaled(
        n_bonds,
        params.beta * params.J,
        params.beta * params.h,
        right_bc,
        params.beta * jbc,
    )


def cylinder_logprob(values, params) -> float:
    """log of the infinite-volume chain probability of (s_0, ..., s_k):
    log pi(s_0) + sum log Q(s_i, s_{i+1}) (empty sum for a single spin)."""
    td = _as_transfer(params)
    idx = [_spin_index(v) for v in values]
    if not idx:
        raise ValueError("cylinder must be non-empty")
    lp = td.log_pi[idx[0]]
    for a, b in zip(idx, idx[1:]):
        lp += td.log_Q[a, b]
    return float(lp)


def chain_marginal_logprob(positions, spin_indices, params) -> float:
    """log P(X_{v_1}=s_1, ..., X_{v_m}=s_m) for the chain (pi, Q), with the
    unspecified intermediate sites summed out through matrix powers.

    positions must be strictly increasing nonnegative integers; spin_indices
    are 0/1 per the package spin-index convention.
    """
    td = _as_transfer(params)
    positions = list(positions)
    if not positions:
        raise ValueError("at least one position required")
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise ValueError("positions must be strictly increasing")
    first = td.pi @ q_power(td, positions[0])
    lp = math.log(first[spin_indices[0]])
    for (va, ia), (vb, ib) in zip(
        zip(positions, spin_indices), zip(positions[1:], spin_indices[1:])
    ):
        lp += math.log(q_power(td, vb - va)[ia, ib])
    return lp


def marginal_entropy(k: int, params) -> float:
    """Entropy of the chain marginal on sites 0..k:
    H(pi) + sum_{i<k} sum_a m_i(a) * H(Q(a, .)) with m_i = pi Q^i.  Exact."""
    if k < 0:
        raise ValueError("k must be >= 0")
    td = _as_transfer(params)
    row_ent = -(td.Q * td.log_Q).sum(axis=1)
    ent = float(-(td.pi * td.log_pi).sum())
    m = td.pi.copy()
    for _ in range(k):
        ent += float(m @ row_ent)
        m = m @ td.Q
    return ent


def finite_volume_entropy(n_bonds: int, params: ModelParams) -> float:
    """Entropy log Z - beta * d(log Z)/d(beta) of the free-boundary chain on
    sites 0..n_bonds, with the energy expectation computed exactly by
    forward-backward transfer sums."""
    b, J, h = params.beta, params.J, params.h
    K = np.empty((2, 2))
    for ia, sa in enumerate(SPINS):
        for ib, sb in enumerate(SPINS):
            K[ia, ib] = math.exp(b * J * sa * sb + b * h * sb)
    n_sites = n_bonds + 1
    fwd = np.empty((n_sites, 2))
    fwd[0] = np.array([math.exp(b * h), math.exp(-b * h)])
    fwd[0] /= fwd[0].sum()
    for i in range(1, n_sites):
        v = fwd[i - 1] @ K
        fwd[i] = v / v.sum()
    bwd = np.empty((n_sites, 2))
    bwd[-1] = np.array([1.0, 1.0])
    for i in range(n_sites - 2, -1, -1):
        v = K @ bwd[i + 1]
        bwd[i] = v / v.sum()
    spins = np.array(SPINS, dtype=float)
    e_sites = 0.0
    for i in range(n_sites):
        w = fwd[i] * bwd[i]
        e_sites += float((w * spins).sum() / w.sum())
    e_bonds = 0.0
    prod = spins[:, None] * spins[None, :]
    for i in range(n_bonds):
        w = fwd[i][:, None] * K * bwd[i + 1][None, :]
        e_bonds += float((w * prod).sum() / w.sum())
    log_z = log_partition(n_bonds, params, "free")
    return log_z - b * (J * e_bonds + h * e_sites)


# ---------------------------------------------------------------------------
# Tilted (pressure) computations for first-layer observables.
# ---------------------------------------------------------------------------


def _window_bits(w: int) -> np.ndarray:
    n = 1 << w
    return (np.arange(n)[:, None] >> np.arange(w)[None, :]) & 1


def _window_values(fstar: FirstLayerObservable, w: int) -> np.ndarray:
    # f* evaluated on each window state; bit j of the state is the spin index
    # at window slot j (slot 0 is the oldest site).
    bits = _window_bits(w)
    spins = 1.0 - 2.0 * bits
    n = 1 << w
    vals = np.zeros(n)
    for offsets, coeff in fstar.terms:
        prod = np.full(n, coeff)
        for (o,) in offsets:
            prod = prod * spins[:, o]
        vals += prod
    return vals


def _window_init(td: TransferData, w: int) -> np.ndarray:
    bits = _window_bits(w)
    p = td.pi[bits[:, 0]]
    for j in range(w - 1):
        p = p * td.Q[bits[:, j], bits[:, j + 1]]
    return p


def tilted_prefix_pressures(k: int, fstar: FirstLayerObservable, t, params,
                            w_max: int = 12) -> np.ndarray:
    """P^i(t * f*) = log E exp(t * sum_{j<=i} f* o theta_j) for i = 0..k,
    under the infinite chain (pi, Q), via a sliding-window transfer pass.

    Returns shape (k+1,) for scalar t, (k+1, len(t)) for a vector of tilts.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if fstar.dim != 1:
        raise PreconditionError("layer pressure requires a one-dimensional observable")
    w = fstar.width
    if w > w_max:
        raise InfeasibleSizeError(
            f"window width {w} exceeds the exact-transfer cap {w_max}"
        )
    td = _as_transfer(params)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    scalar = np.isscalar(t) or np.ndim(t) == 0
    n = 1 << w
    fvals = _window_values(fstar, w)
    tilt = np.outer(fvals, t_arr)  # added in log space; huge tilts stay finite
    log_w = np.log(_window_init(td, w))[:, None] + np.zeros((1, t_arr.size))
    out = np.empty((k + 1, t_arr.size))
    if w >= 2:
        tops = (np.arange(n >> 1) >> (w - 2)) & 1
        q0 = td.Q[tops, 0][:, None]
        q1 = td.Q[tops, 1][:, None]
    for i in range(k + 1):
        log_w = log_w + tilt
        m = log_w.max(axis=0)
        wlin = np.exp(log_w - m[None, :])
        out[i] = m + np.log(wlin.sum(axis=0))
        if i == k:
            break
        if w == 1:
            wlin = np.stack(
                [
                    td.Q[0, 0] * wlin[0] + td.Q[1, 0] * wlin[1],
                    td.Q[0, 1] * wlin[0] + td.Q[1, 1] * wlin[1],
                ]
            )
        else:
            s = wlin.reshape(n >> 1, 2, t_arr.size).sum(axis=1)
            wlin = np.concatenate([q0 * s, q1 * s], axis=0)
        log_w = np.log(wlin) + m[None, :]
    return out[:, 0] if scalar else out


def tilted_layer_pressure(k: int, fstar: FirstLayerObservable, t: float, params,
                          w_max: int = 12) -> float:
    """P^k(t * f*), the tilted pressure of a window-k ergodic sum of f* under
    the infinite chain.  Satisfies |P^k| <= (k+1) * |t| * sup|f*|."""
    return float(tilted_prefix_pressures(k, fstar, t, params, w_max=w_max)[-1])
