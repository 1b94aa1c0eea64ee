"""Two-timescale episode driver.

Each episode runs T short-time blocks. At every long-block boundary
(t = 1, N_s+1, ...) the channel's path angles are refreshed and a beam sweep
assigns each user its best codebook beam (step 1). Every slot the driver
builds the effective channel matrix u[i, j] = h_i^H f_RF,j (step 2), invokes
the scheduler (step 3, wall-clock timed), then books rates and updates the
EMA cumulative rates and PF weights (step 4) before advancing the fast
channel state.

Beam-sweep slots schedule and transmit like any other slot; no airtime
overhead is deducted from rates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channel import advance_long_block, advance_short_block, generate_episode
from .codebook import Codebook, codebook_from_config, sweep_assignments
from .config import SystemConfig
from .metrics import geometric_mean_rate, min_chordal_distance, proportional_fairness
from .precoder import EffectiveChannels, SelectionResult
from .schedulers import SchedulerContext


def episode_seed(master_seed: int, index: int) -> int:
    """Deterministic per-episode seed split from one master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def update_cumulative_rate(r_prev, rate, delta: float):
    """EMA cumulative rate: (1-delta)*R + delta*r."""
    return (1.0 - delta) * r_prev + delta * rate


@dataclass
class SlotRecord:
    t: int
    sweep: bool
    members: tuple
    feasible: bool
    q_value: float
    rate_sum: float
    rate_min: float
    rate_max: float
    min_chordal: float
    time_us: float
    rates: np.ndarray | None = None


@dataclass
class EpisodeTrace:
    episode: int
    scheduler: str
    records: list = field(default_factory=list)
    r_history: np.ndarray | None = None     # (T, I) cumulative rates
    r_final: np.ndarray | None = None       # (I,)
    pf: float = 0.0
    geo_mean: float = 0.0

    @property
    def slot_times_us(self) -> np.ndarray:
        return np.array([rec.time_us for rec in self.records])

    @property
    def selected_counts(self) -> np.ndarray:
        return np.array([len(rec.members) for rec in self.records])

    @property
    def min_chordals(self) -> np.ndarray:
        return np.array([rec.min_chordal for rec in self.records])


def slot_timing(scheduler, ctx: SchedulerContext):
    """Run one selection decision, returning (result, wall-clock microseconds)."""
    t0 = time.perf_counter()
    result = scheduler(ctx)
    return result, (time.perf_counter() - t0) * 1e6


def _scheduler_name(scheduler) -> str:
    return getattr(scheduler, "scheduler_name", getattr(scheduler, "__name__", "custom"))


def run_episode(
    seed: int,
    config: SystemConfig,
    scheduler,
    *,
    codebook: Codebook | None = None,
    episode: int = 0,
    on_slot=None,
    keep_rates: bool = False,
) -> EpisodeTrace:
    """Simulate one episode of `config.steps` short-time blocks."""
    config.validate()
    if codebook is None:
        codebook = codebook_from_config(config)
    state = generate_episode(seed, config)
    n = config.users
    delta = config.ema_delta
    cum_rate = np.ones(n)
    trace = EpisodeTrace(episode=episode, scheduler=_scheduler_name(scheduler))
    r_history = np.empty((config.steps, n))
    assignment = None

    for t in range(1, config.steps + 1):
        sweep = (t - 1) % config.n_s == 0
        if sweep:
            if t > 1:
                state = advance_long_block(state)
            assignment = sweep_assignments(state, codebook)
        u = state.h.conj() @ assignment.matrix
        weights = 1.0 / cum_rate
        ctx = SchedulerContext(
            weights=weights,
            eff=EffectiveChannels(u=u, noise_w=config.noise_w, power_w=config.power_w),
            n_max=config.n_max,
            assignment=assignment,
            exhaustive_cap=config.exhaustive_cap,
        )
        result, elapsed_us = slot_timing(scheduler, ctx)

        q_check = float(weights @ result.rates)
        if abs(result.q_value - q_check) > 1e-12 * max(1.0, abs(result.q_value)):
            raise RuntimeError(
                f"slot {t}: scheduler Q {result.q_value!r} inconsistent with "
                f"recomputed weighted rate sum {q_check!r}"
            )

        cum_rate = update_cumulative_rate(cum_rate, result.rates, delta)
        r_history[t - 1] = cum_rate
        sel_rates = result.rates[list(result.members)] if result.members else np.array([])
        trace.records.append(SlotRecord(
            t=t,
            sweep=sweep,
            members=result.members,
            feasible=result.feasible,
            q_value=result.q_value,
            rate_sum=float(sel_rates.sum()) if sel_rates.size else 0.0,
            rate_min=float(sel_rates.min()) if sel_rates.size else 0.0,
            rate_max=float(sel_rates.max()) if sel_rates.size else 0.0,
            min_chordal=min_chordal_distance(state.h, result.members),
            time_us=elapsed_us,
            rates=result.rates.copy() if keep_rates else None,
        ))
        if on_slot is not None:
            on_slot(ctx, result)
        state = advance_short_block(state)

    trace.r_history = r_history
    trace.r_final = cum_rate
    trace.pf = proportional_fairness(cum_rate)
    trace.geo_mean = geometric_mean_rate(cum_rate)
    return trace


def noop_scheduler(ctx: SchedulerContext) -> SelectionResult:
    """Selects nobody; used to calibrate the timing-harness overhead."""
    from .precoder import empty_selection

    return empty_selection(ctx.n_users)


noop_scheduler.scheduler_name = "noop"
