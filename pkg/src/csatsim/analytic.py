"""Closed-form beacon drop probability and Wi-Fi detection delay under LTE-U duty cycling.

The model ignores probe traffic: a beacon is lost when its airtime overlaps the
rising edge of an LTE-U ON period, and the LTE-U BS needs K surviving beacons
to declare an active Wi-Fi link.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import TABLE1, DutyCycle, PhyParams, beacon_airtime_slots


class ModelRangeError(ValueError):
    """The closed-form model is outside its domain (probability >= 1)."""


@dataclass(frozen=True)
class AnalyticResult:
    p_t: float
    p_d: float
    e_interval_us: float
    delay_us: float
    k: int
    t_d_us: int


def slot_generation_probability(dc: DutyCycle, p: PhyParams = TABLE1) -> float:
    """Probability that a beacon is generated in one particular slot of the cycle."""
    return p.slot_us / (dc.t_on_us + dc.t_off_us)


def beacon_drop_probability(dc: DutyCycle, p: PhyParams = TABLE1) -> float:
    p_d = slot_generation_probability(dc, p) * beacon_airtime_slots(p)
    if p_d >= 1:
        raise ModelRangeError(f"drop probability {p_d:.4f} >= 1 for cycle {dc}")
    return p_d


def success_interval_pmf(p_d: float, i: int) -> float:
    """P(gap between detected beacons == i beacon periods); geometric in i."""
    if i < 1:
        raise ValueError("interval index must be >= 1")
    if not 0 <= p_d < 1:
        raise ModelRangeError(f"p_d must be in [0, 1), got {p_d}")
    return (1 - p_d) * p_d ** (i - 1)


def expected_success_interval(p_d: float, t_d_us: float = TABLE1.beacon_interval_us) -> float:
    if not 0 <= p_d < 1:
        raise ModelRangeError(f"p_d must be in [0, 1), got {p_d}")
    return t_d_us / (1 - p_d)


def expected_delay_k_beacons(dc: DutyCycle, p: PhyParams = TABLE1, k: int = 5,
                             t_d_us: int | None = None) -> AnalyticResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    t_d = p.beacon_interval_us if t_d_us is None else t_d_us
    p_t = slot_generation_probability(dc, p)
    p_d = beacon_drop_probability(dc, p)
    e_s = expected_success_interval(p_d, t_d)
    return AnalyticResult(p_t=p_t, p_d=p_d, e_interval_us=e_s, delay_us=k * e_s, k=k, t_d_us=t_d)


# Rows of the K = 5 comparison: (duty cycle, delay printed alongside the experiment in ms).
TABLE3_GRID = (
    (DutyCycle(5_000, 5_000), 535.62),
    (DutyCycle(20_000, 1_000), 522.76),
    (DutyCycle(20_000, 5_000), 521.0),
)

CSV_COLUMNS = ("t_on_us", "t_off_us", "p_t", "p_d", "e_interval_us", "delay_us")


def table_rows(duties, p: PhyParams = TABLE1, k: int = 5):
    """Rows for the analytic CSV export, one per duty cycle."""
    rows = []
    for dc in duties:
        r = expected_delay_k_beacons(dc, p, k)
        rows.append({"t_on_us": dc.t_on_us, "t_off_us": dc.t_off_us, "p_t": r.p_t,
                     "p_d": r.p_d, "e_interval_us": r.e_interval_us, "delay_us": r.delay_us})
    return rows
