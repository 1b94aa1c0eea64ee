"""Evaluation metrics and CSV reporting.

PF uses the natural log internally; the geometric mean exp(PF/I) is the
base-free companion always reported next to it. The chordal distance is
computed on full channel vectors, not effective channels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


def proportional_fairness(cum_rates) -> float:
    """Sum of log cumulative rates (natural log)."""
    r = np.asarray(cum_rates, dtype=float)
    if np.any(r <= 0):
        raise ValueError("all cumulative rates must be positive (starved-user bug?)")
    return float(np.log(r).sum())


def geometric_mean_rate(cum_rates) -> float:
    r = np.asarray(cum_rates, dtype=float)
    return float(np.exp(proportional_fairness(r) / r.size))


def min_chordal_distance(channels, members) -> float:
    """Smallest pairwise chordal distance among selected users' channels.

    sqrt(1 - |h_i^H h_j|^2 / (||h_i||^2 ||h_j||^2)); 1.0 by convention when
    fewer than two users are selected.
    """
    members = tuple(members)
    if len(members) < 2:
        return 1.0
    h = np.asarray(channels)[list(members)]
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm channel vector")
    best = 1.0
    for a, b in combinations(range(len(members)), 2):
        cross = abs(np.vdot(h[a], h[b])) ** 2 / (norms[a] ** 2 * norms[b] ** 2)
        dist = np.sqrt(max(0.0, 1.0 - cross))
        best = min(best, dist)
    return float(best)


def rate_cdf(values):
    """Empirical CDF points (sorted value, percentile in (0, 1])."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("need at least one value")
    pct = np.arange(1, v.size + 1) / v.size
    return v, pct


@dataclass
class MetricReport:
    scheduler: str
    episodes: int
    pf_mean: float
    pf_std: float
    geo_mean: float
    mean_selected: float
    mean_min_chordal: float
    time_p50_us: float
    time_p90_us: float
    per_episode: list = field(default_factory=list)   # dict rows


def summarize(traces) -> MetricReport:
    """Aggregate one scheduler's episode traces (order-invariant)."""
    traces = sorted(traces, key=lambda tr: tr.episode)
    pfs = np.array([tr.pf for tr in traces])
    geos = np.array([tr.geo_mean for tr in traces])
    times = np.concatenate([tr.slot_times_us for tr in traces])
    counts = np.concatenate([tr.selected_counts for tr in traces])
    chordals = np.concatenate([tr.min_chordals for tr in traces])
    rows = [
        {
            "episode": tr.episode,
            "pf": tr.pf,
            "geo_mean": tr.geo_mean,
            "mean_selected": float(tr.selected_counts.mean()),
            "mean_min_chordal": float(tr.min_chordals.mean()),
            "time_p50_us": float(np.median(tr.slot_times_us)),
        }
        for tr in traces
    ]
    return MetricReport(
        scheduler=traces[0].scheduler,
        episodes=len(traces),
        pf_mean=float(pfs.mean()),
        pf_std=float(pfs.std()),
        geo_mean=float(geos.mean()),
        mean_selected=float(counts.mean()),
        mean_min_chordal=float(chordals.mean()),
        time_p50_us=float(np.median(times)),
        time_p90_us=float(np.percentile(times, 90)),
        per_episode=rows,
    )


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


SUMMARY_COLUMNS = (
    "scheduler", "episodes", "pf_mean", "pf_std", "geo_mean",
    "mean_selected", "mean_min_chordal", "time_p50_us", "time_p90_us",
)


def write_summary_csv(reports, path) -> None:
    """One row per scheduler; see README for column units."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for rep in reports:
            writer.writerow([_fmt(getattr(rep, c)) for c in SUMMARY_COLUMNS])


def write_cdf_csv(report: MetricReport, path) -> None:
    values, pct = rate_cdf([row["geo_mean"] for row in report.per_episode])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["geo_mean", "percentile"])
        for v, p in zip(values, pct):
            writer.writerow([_fmt(v), _fmt(p)])


def write_episodes_csv(report: MetricReport, path) -> None:
    cols = ("episode", "pf", "geo_mean", "mean_selected", "mean_min_chordal", "time_p50_us")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in report.per_episode:
            writer.writerow([_fmt(row[c]) for c in cols])


def write_perslot_csv(traces, path) -> None:
    """Per-slot log: one row per (episode, t)."""
    cols = ("episode", "t", "scheduler", "n_selected", "selected_ids",
            "q_value", "rate_sum", "rate_min", "rate_max", "slot_time_us")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for tr in sorted(traces, key=lambda tr: tr.episode):
            for rec in tr.records:
                writer.writerow([
                    tr.episode, rec.t, tr.scheduler, len(rec.members),
                    " ".join(str(i) for i in rec.members),
                    _fmt(rec.q_value), _fmt(rec.rate_sum), _fmt(rec.rate_min),
                    _fmt(rec.rate_max), _fmt(rec.time_us),
                ])
