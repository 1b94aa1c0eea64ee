"""User-selection algorithms over one scheduling slot.

All four solvers maximize the weighted sum rate Q of the ZF-precoded set:

* greedy: add the best user per round, stop on non-improvement
* top-k: rank interference-free single-user scores, take the k best
* adaptive top-k: best top-k result over k = 1..N_max
* exhaustive: all subsets up to N_max (desk scale only, capped)

Tie-breaking is deterministic everywhere: lowest user index, smallest k,
lexicographically smallest set. Candidate search runs on the selected kernel
backend; the returned SelectionResult is always evaluated through the numpy
precoder path, so results are backend-independent given the same chosen set.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import backend
from .codebook import BeamAssignment
from .errors import CombinatorialCapError, SingularChannel
from .precoder import (
    COND_LIMIT,
    EffectiveChannels,
    SelectionResult,
    empty_selection,
    infeasible_selection,
    select_and_evaluate,
)


@dataclass
class SchedulerContext:
    """Everything a slot-level selection decision needs."""

    weights: np.ndarray            # (I,) PF weights, > 0
    eff: EffectiveChannels
    n_max: int
    assignment: BeamAssignment | None = None
    exhaustive_cap: float = 2e6

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.eff.n_users,):
            raise ValueError("weights length must match user count")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def n_users(self) -> int:
        return self.eff.n_users

    @property
    def analog_matrix(self) -> np.ndarray:
        if self.assignment is not None:
            return self.assignment.matrix
        return np.eye(self.n_users, dtype=np.complex128)

    @property
    def gram(self) -> np.ndarray:
        if self.assignment is not None:
            return self.assignment.gram
        return np.eye(self.n_users, dtype=np.complex128)


def make_context(
    u: np.ndarray,
    weights: np.ndarray,
    noise_w,
    power_w: float,
    n_max: int,
    assignment: BeamAssignment | None = None,
) -> SchedulerContext:
    eff = EffectiveChannels(u=u, noise_w=noise_w, power_w=power_w)
    return SchedulerContext(weights=weights, eff=eff, n_max=n_max, assignment=assignment)


def singleuser_scores(ctx: SchedulerContext) -> np.ndarray:
    """Interference-free weighted rates w_i * log2(1 + P|u_ii|^2 / sigma_i^2)."""
    diag = np.abs(np.diagonal(ctx.eff.u)) ** 2
    return ctx.weights * np.log2(1.0 + ctx.eff.power_w * diag / ctx.eff.noise_w)


def _evaluate(ctx: SchedulerContext, members) -> SelectionResult:
    return select_and_evaluate(ctx.eff, ctx.analog_matrix, members, ctx.weights)


def greedy_select(ctx: SchedulerContext) -> SelectionResult:
    """Iterative best-user addition (kernel-accelerated candidate search)."""
    members, q_path = backend.greedy_core(
        ctx.eff.u, ctx.gram, ctx.weights, ctx.eff.noise_w,
        ctx.eff.power_w, ctx.n_max, COND_LIMIT,
    )
    if members.size == 0:
        return empty_selection(ctx.n_users)
    result = _evaluate(ctx, members)
    result.q_path = tuple(float(q) for q in q_path)
    return result


def topk_select(ctx: SchedulerContext, k: int) -> SelectionResult:
    """Top-k by interference-free score; ZF over the chosen set afterwards.
    A singular chosen set is kept but flagged infeasible (Q=0, no rates)."""
    if not 1 <= k <= ctx.n_max:
        raise ValueError(f"need 1 <= k <= n_max, got k={k}")
    scores = singleuser_scores(ctx)
    order = np.argsort(-scores, kind="stable")          # ties -> lowest index
    chosen = np.sort(order[: min(k, ctx.n_users)])
    try:
        return _evaluate(ctx, chosen)
    except SingularChannel:
        g = ctx.eff.u[np.ix_(chosen, chosen)]
        return infeasible_selection(ctx.n_users, chosen, g)


def adaptive_topk_select(ctx: SchedulerContext) -> SelectionResult:
    """Best top-k result over k = 1..N_max (ties -> smallest k)."""
    best = None
    for k in range(1, ctx.n_max + 1):
        result = topk_select(ctx, k)
        if best is None or result.q_value > best.q_value:
            best = result
    return best


def exhaustive_select(ctx: SchedulerContext) -> SelectionResult:
    """Oracle: evaluate Q over every non-empty subset of size <= N_max."""
    n, n_max = ctx.n_users, min(ctx.n_max, ctx.n_users)
    total = sum(comb(n, m) for m in range(1, n_max + 1))
    if total > ctx.exhaustive_cap:
        raise CombinatorialCapError(
            f"{total} candidate sets exceed the cap ({ctx.exhaustive_cap:g}); "
            "use desk-scale parameters (fewer users or smaller N_max)"
        )
    u, gram = ctx.eff.u, ctx.gram
    w, sigma2, p = ctx.weights, ctx.eff.noise_w, ctx.eff.power_w
    best_q = 0.0
    best_members: tuple = ()
    for m in range(1, n_max + 1):
        for members in combinations(range(n), m):
            mem = np.asarray(members, dtype=np.int64)
            q = backend.q_of_set(u, gram, w, sigma2, p, mem, COND_LIMIT)
            if q > best_q or (q == best_q and best_members and members < best_members):
                best_q = q
                best_members = members
    if not best_members:
        return empty_selection(n)
    return _evaluate(ctx, best_members)


SCHEDULER_NAMES = ("greedy", "top1", "topN", "adaptive", "exhaustive", "ml")


def make_scheduler(name: str, *, model=None):
    """Scheduler callable by CLI name; `ml` needs a loaded selector model."""
    if name == "greedy":
        fn = greedy_select
    elif name == "top1":
        fn = lambda ctx: topk_select(ctx, 1)  # noqa: E731
    elif name == "topN":
        fn = lambda ctx: topk_select(ctx, ctx.n_max)  # noqa: E731
    elif name == "adaptive":
        fn = adaptive_topk_select
    elif name == "exhaustive":
        fn = exhaustive_select
    elif name == "ml":
        if model is None:
            raise ValueError("scheduler 'ml' requires a trained model")
        from .ml import make_ml_scheduler

        fn = make_ml_scheduler(model)
    else:
        raise ValueError(f"unknown scheduler {name!r}; choose from {SCHEDULER_NAMES}")
    fn.scheduler_name = name
    return fn
