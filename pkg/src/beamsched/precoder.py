"""Zero-forcing digital precoding over a selected user set.

Given the effective channels u[i, j] = h_i^H f_RF,j, a selected set M yields
the square matrix G(M); the unnormalized ZF precoder solves G F = I, each
column is then scaled so the composite analog+digital column carries exactly
P/|M| transmit power, and rates follow from the SINR evaluated on the rows
of G (interference terms computed numerically, not assumed zero).

Sets whose G has 2-norm condition number above COND_LIMIT are infeasible and
raise SingularChannel; schedulers treat them as objective value -inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularChannel

COND_LIMIT = 1e12


@dataclass
class EffectiveChannels:
    u: np.ndarray          # (I, I) complex, u[i, j] = h_i^H f_RF,j
    noise_w: np.ndarray    # (I,) per-user noise variance
    power_w: float         # total transmit power P

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.complex128)
        n = self.u.shape[0]
        if self.u.shape != (n, n):
            raise ValueError("u must be square (I x I)")
        self.noise_w = np.broadcast_to(
            np.asarray(self.noise_w, dtype=float), (n,)
        ).copy()
        if not np.all(np.isfinite(self.u.view(float))):
            raise ValueError("u must be finite")
        if self.power_w <= 0 or np.any(self.noise_w <= 0):
            raise ValueError("need P > 0 and noise > 0")

    @property
    def n_users(self) -> int:
        return self.u.shape[0]


@dataclass
class SelectionResult:
    members: tuple            # selected user indices, ascending
    g_matrix: np.ndarray      # (M, M) effective submatrix
    precoder: np.ndarray      # (M, M) normalized digital precoder F*_BB
    rates: np.ndarray         # (I,) bits/s/Hz, zero outside members
    sinr: np.ndarray          # (I,) zero outside members
    q_value: float            # weighted sum rate over members
    feasible: bool = True
    q_path: tuple = field(default_factory=tuple)  # greedy per-iteration Q

    @property
    def n_selected(self) -> int:
        return len(self.members)


def empty_selection(n_users: int) -> SelectionResult:
    return SelectionResult(
        members=(),
        g_matrix=np.zeros((0, 0), dtype=np.complex128),
        precoder=np.zeros((0, 0), dtype=np.complex128),
        rates=np.zeros(n_users),
        sinr=np.zeros(n_users),
        q_value=0.0,
    )


def infeasible_selection(n_users: int, members, g_matrix) -> SelectionResult:
    """Set kept for the record but no transmission: zero rates, Q = 0."""
    m = len(members)
    return SelectionResult(
        members=tuple(int(i) for i in members),
        g_matrix=g_matrix,
        precoder=np.zeros((m, m), dtype=np.complex128),
        rates=np.zeros(n_users),
        sinr=np.zeros(n_users),
        q_value=0.0,
        feasible=False,
    )


def _check_members(members, n_users: int) -> np.ndarray:
    m = np.asarray(sorted(int(i) for i in members), dtype=np.int64)
    if m.size == 0:
        raise ValueError("member set must be non-empty")
    if np.unique(m).size != m.size:
        raise ValueError("duplicate user indices in member set")
    if m[0] < 0 or m[-1] >= n_users:
        raise ValueError("user index out of range")
    return m


def effective_submatrix(eff: EffectiveChannels, members) -> np.ndarray:
    """G(M): rows/cols of u at the selected indices in ascending order."""
    m = _check_members(members, eff.n_users)
    return eff.u[np.ix_(m, m)]


def spectral_cond(g: np.ndarray) -> float:
    """2-norm condition number of G (ratio of extreme singular values)."""
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] <= 0.0:
        return np.inf
    return float(s[0] / s[-1])


def zf_precoder(g: np.ndarray, analog: np.ndarray, power_w: float):
    """Normalized ZF precoder for G with analog columns F_RF(M).

    Returns (F*_BB, column_norms) where column_norms are the composite
    ||F_RF(M) f_BB,i|| of the unnormalized solution. Raises SingularChannel
    when G is singular or has condition number above COND_LIMIT.
    """
    g = np.asarray(g, dtype=np.complex128)
    m = g.shape[0]
    if g.shape != (m, m):
        raise ValueError("G must be square")
    if spectral_cond(g) > COND_LIMIT:
        raise SingularChannel(f"cond(G) above {COND_LIMIT:g}")
    try:
        f_unnorm = np.linalg.solve(g, np.eye(m, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise SingularChannel(str(exc)) from None
    composite = np.asarray(analog, dtype=np.complex128) @ f_unnorm
    norms = np.linalg.norm(composite, axis=0)
    if np.any(norms == 0.0):
        raise SingularChannel("zero-norm composite precoding column")
    f_star = f_unnorm * (np.sqrt(power_w / m) / norms)
    return f_star, norms


def evaluate_rates(
    eff: EffectiveChannels, members, f_star: np.ndarray, weights: np.ndarray
) -> SelectionResult:
    """Per-user SINR and rates for a selected set under precoder F*_BB.

    SINR_i uses the effective channel row u_i(M): signal |u_i^H(M) f*_BB,i|^2
    over interference-plus-noise; rate is log2(1+SINR) at unit bandwidth,
    zero for non-selected users. Q is the weighted sum over members.
    """
    m = _check_members(members, eff.n_users)
    g = eff.u[np.ix_(m, m)]
    received = g @ f_star                       # row a: u_{m_a}^H(M) F*_BB
    power = np.abs(received) ** 2
    signal = np.diagonal(power)
    interference = power.sum(axis=1) - signal
    sinr_sel = signal / (interference + eff.noise_w[m])

    rates = np.zeros(eff.n_users)
    sinr = np.zeros(eff.n_users)
    rates[m] = np.log2(1.0 + sinr_sel)
    sinr[m] = sinr_sel
    q = float(np.asarray(weights)[m] @ rates[m])
    return SelectionResult(
        members=tuple(int(i) for i in m),
        g_matrix=g,
        precoder=f_star,
        rates=rates,
        sinr=sinr,
        q_value=q,
    )


def select_and_evaluate(
    eff: EffectiveChannels, analog_full: np.ndarray, members, weights: np.ndarray
) -> SelectionResult:
    """ZF + rate evaluation for one candidate set (raises on infeasible)."""
    m = _check_members(members, eff.n_users)
    g = eff.u[np.ix_(m, m)]
    f_star, _ = zf_precoder(g, analog_full[:, m], eff.power_w)
    return evaluate_rates(eff, m, f_star, weights)
