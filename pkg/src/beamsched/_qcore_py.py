"""Pure numpy selection kernel; same contract as the compiled `_qcore`.

Candidate evaluations are batched across sets of equal size: stacked
solves/eigendecompositions amortize the LAPACK dispatch overhead. Semantics
(condition gate, tie-breaking, -inf for infeasible sets) are identical to
the compiled kernel.
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def _q_batch(u, gram, w, sigma2, p, sets, cond_limit):
    """Q for each candidate set (rows of `sets`, sorted ascending).

    Returns -inf for sets whose G is singular / too ill-conditioned.
    """
    n_cand, m = sets.shape
    g_all = u[sets[:, :, None], sets[:, None, :]]
    sv = np.linalg.svd(g_all, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sv[:, 0] / sv[:, -1]
    feasible = (sv[:, -1] > 0.0) & np.isfinite(cond) & (cond <= cond_limit)

    q = np.full(n_cand, -np.inf)
    idx = np.nonzero(feasible)[0]
    if idx.size == 0:
        return q
    g = g_all[idx]
    a = gram[sets[idx][:, :, None], sets[idx][:, None, :]]
    eye = np.broadcast_to(np.eye(m, dtype=np.complex128), (idx.size, m, m))
    x = np.linalg.solve(g, eye)
    n2 = np.einsum("cbj,cba,caj->cj", x.conj(), a, x).real
    bad = np.any(n2 <= 0.0, axis=1)
    n2 = np.where(n2 > 0.0, n2, 1.0)
    scale = np.sqrt(p / m) / np.sqrt(n2)
    v = g @ (x * scale[:, None, :])
    pw = np.abs(v) ** 2
    signal = np.diagonal(pw, axis1=1, axis2=2)
    interference = pw.sum(axis=2) - signal
    sinr = signal / (interference + sigma2[sets[idx]])
    rates = np.log2(1.0 + sinr)
    q_sel = np.einsum("cm,cm->c", w[sets[idx]], rates)
    q_sel[bad] = -np.inf
    q[idx] = q_sel
    return q


def q_of_set(u, gram, w, sigma2, p, members, cond_limit=1e12) -> float:
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        return 0.0
    return float(_q_batch(u, gram, w, sigma2, p, members[None, :], cond_limit)[0])


def greedy_core(u, gram, w, sigma2, p, n_max, cond_limit=1e12):
    """Iterative user addition maximizing Q; stops on non-improvement.

    Returns (members ascending int64 array, per-iteration Q path).
    """
    n = u.shape[0]
    members: list[int] = []
    q_path: list[float] = []
    q_cur = 0.0
    remaining = list(range(n))
    for _ in range(min(n_max, n)):
        sets = np.array([sorted(members + [i]) for i in remaining], dtype=np.int64)
        qs = _q_batch(u, gram, w, sigma2, p, sets, cond_limit)
        best = int(np.argmax(qs))           # first max: lowest candidate index
        if not qs[best] > q_cur:            # break on <=, including all -inf
            break
        q_cur = float(qs[best])
        q_path.append(q_cur)
        members = sorted(members + [remaining[best]])
        remaining.pop(best)
        if not remaining:
            break
    return np.asarray(members, dtype=np.int64), np.asarray(q_path)
