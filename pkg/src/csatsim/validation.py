"""Seed batches and the statistical checks that compare simulation with the closed-form model."""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from scipy import stats

from . import analytic
from .metrics import RunMetrics, summarize
from .params import DutyCycle
from .presets import beacon_validation
from .scenario import Scenario
from .simcore import run


def _run_one(args) -> RunMetrics:
    scenario, k = args
    return summarize(run(scenario), k, scenario.phy.beacon_interval_us)


def run_batch(scenarios, k: int = 5, workers: int | None = None) -> list[RunMetrics]:
    """Summaries in input order. One worker runs everything in-process."""
    scenarios = list(scenarios)
    if workers is None:
        workers = os.cpu_count() or 1
    jobs = [(s, k) for s in scenarios]
    if workers <= 1 or len(jobs) < 2:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass(frozen=True)
class DropEstimate:
    duty: DutyCycle
    attempts: int
    dropped: int
    p_d_model: float

    @property
    def p_hat(self) -> float:
        return self.dropped / self.attempts

    @property
    def sigma(self) -> float:
        p = self.p_d_model
        return math.sqrt(p * (1 - p) / self.attempts)

    @property
    def z(self) -> float:
        return (self.p_hat - self.p_d_model) / self.sigma


def drop_estimate(duty: DutyCycle, metrics: list[RunMetrics]) -> DropEstimate:
    dropped = sum(m.dropped_overlap_on for m in metrics)
    attempts = sum(m.beacons_received + m.dropped_overlap_on + m.dropped_collision for m in metrics)
    return DropEstimate(duty, attempts, dropped, analytic.beacon_drop_probability(duty))


def beacon_only_batch(duty: DutyCycle, seeds, duration_us: int, immediate: bool = True,
                      workers: int | None = None) -> list[RunMetrics]:
    return run_batch((beacon_validation(duty, s, duration_us, immediate) for s in seeds), workers=workers)


def success_intervals(metrics: list[RunMetrics], beacon_interval_us: int) -> list[int]:
    """Gaps between consecutive detected beacons, in beacon periods."""
    out = []
    for m in metrics:
        t = m.detected_tbtts_us
        out.extend((b - a) // beacon_interval_us for a, b in zip(t, t[1:]))
    return out


def geometric_chisquare(intervals, p_d: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of interval counts against the geometric law.

    Bins are i = 1, 2, ... with the tail merged into the last bin so every
    bin expects at least ``min_expected`` samples. Returns (statistic, p-value, bins).
    """
    n = len(intervals)
    if n == 0:
        raise ValueError("no intervals")
    edges = []
    tail = 1.0
    i = 1
    while True:
        pi = analytic.success_interval_pmf(p_d, i)
        if (tail - pi) * n < min_expected:
            edges.append((i, tail))
            break
        edges.append((i, pi))
        tail -= pi
        i += 1
    last = edges[-1][0]
    observed = [0] * len(edges)
    for x in intervals:
        observed[min(x, last) - 1] += 1
    expected = [p * n for _, p in edges]
    if len(edges) < 2:
        return 0.0, 1.0, list(zip(observed, expected))
    res = stats.chisquare(observed, expected)
    return float(res.statistic), float(res.pvalue), list(zip(observed, expected))


def mann_whitney_greater(x, y) -> float:
    """One-sided p-value for x stochastically greater than y."""
    return float(stats.mannwhitneyu(x, y, alternative="greater").pvalue)


def median(values) -> float:
    return statistics.median(values)


def seeds_for(scenario: Scenario, seeds) -> list[Scenario]:
    return [replace(scenario, seed=s) for s in seeds]
