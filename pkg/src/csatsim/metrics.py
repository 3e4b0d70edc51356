"""Beacon statistics computed from a TraceLog in a single pass."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

from .params import TABLE1
from .trace import DELIVERED, DROPPED_COLLISION, DROPPED_OVERLAP_ON, TraceLog

SUMMARY_COLUMNS = ("scenario", "seed", "expected", "transmitted", "received", "suppressed",
                   "reception_frac", "delay_to_k_us", "scale_back_us")
CDF_COLUMNS = ("value_us", "cum_frac")


class MalformedTrace(ValueError):
    pass


class InsufficientDetections(ValueError):
    pass


@dataclass
class RunMetrics:
    """Per-run beacon accounting.

    Durations are measured from the first beacon's target transmission time
    (the AP's first attempt). ``delay_to_k_us`` counts whole beacon periods up
    to and including the one that carried the k-th detected beacon, so a run in
    which every beacon is detected gives ``k * interval``.
    """

    beacons_expected: int = 0
    beacons_transmitted: int = 0
    beacons_received: int = 0
    beacons_suppressed: int = 0
    beacons_pending: int = 0
    dropped_overlap_on: int = 0
    dropped_collision: int = 0
    tx_interval_samples_us: list = field(default_factory=list)
    rx_interval_samples_us: list = field(default_factory=list)
    detected_tbtts_us: list = field(default_factory=list)
    first_beacon_us: int | None = None
    delay_to_k_us: int | None = None
    scale_back_time_us: int | None = None
    k: int = 5

    @property
    def reception_frac(self) -> float:
        if not self.beacons_transmitted:
            return float("nan")
        return self.beacons_received / self.beacons_transmitted

    @property
    def drop_frac(self) -> float:
        """Share of completed beacon transmissions lost to LTE-U overlap."""
        done = self.beacons_received + self.dropped_overlap_on + self.dropped_collision
        return self.dropped_overlap_on / done if done else float("nan")

    def summary_row(self, scenario: str, seed: int) -> tuple:
        def blank(v):
            return "" if v is None else v
        return (scenario, seed, self.beacons_expected, self.beacons_transmitted,
                self.beacons_received, self.beacons_suppressed, f"{self.reception_frac:.6f}",
                blank(self.delay_to_k_us), blank(self.scale_back_time_us))


def summarize(trace: TraceLog, k: int = 5, beacon_interval_us: int = TABLE1.beacon_interval_us,
              ap: str = "ap") -> RunMetrics:
    """Walk the trace once and fill a RunMetrics.

    Raises MalformedTrace if timestamps go backwards or the beacon books do
    not balance (due = completed + suppressed + pending).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = RunMetrics(k=k)
    last_t = None
    latest_due = None      # TBTT of the beacon currently held by the AP
    in_air = None          # TBTT of the beacon on the air
    last_tx = last_rx = None
    outcomes = Counter()
    for row in trace:
        t, event, node, kind = row[0], row[1], row[2], row[3]
        if last_t is not None and t < last_t:
            raise MalformedTrace(f"timestamp {t} after {last_t}")
        last_t = t
        if event == "beacon_due":
            m.beacons_expected += 1
            latest_due = t
            if m.first_beacon_us is None:
                m.first_beacon_us = t
        elif event == "beacon_suppressed":
            m.beacons_suppressed += 1
        elif event == "beacon_pending":
            m.beacons_pending += 1
        elif kind == "beacon" and node == ap:
            if event == "tx_start":
                m.beacons_transmitted += 1
                in_air = latest_due
                if last_tx is not None:
                    m.tx_interval_samples_us.append(t - last_tx)
                last_tx = t
            elif event == "tx_end":
                outcome = row[4]
                outcomes[outcome] += 1
                if outcome == DELIVERED:
                    m.beacons_received += 1
                    if last_rx is not None:
                        m.rx_interval_samples_us.append(t - last_rx)
                    last_rx = t
        elif event == "beacon_detected":
            if in_air is None:
                raise MalformedTrace(f"detection at {t} without a beacon on the air")
            m.detected_tbtts_us.append(in_air)
            if len(m.detected_tbtts_us) == k:
                m.delay_to_k_us = in_air - m.first_beacon_us + beacon_interval_us
        elif event == "csat_switch":
            if (m.scale_back_time_us is None and m.first_beacon_us is not None
                    and row[4].startswith("low")):
                m.scale_back_time_us = t - m.first_beacon_us
    m.dropped_overlap_on = outcomes[DROPPED_OVERLAP_ON]
    m.dropped_collision = outcomes[DROPPED_COLLISION]
    completed = sum(outcomes.values())
    if m.beacons_expected != completed + m.beacons_suppressed + m.beacons_pending:
        raise MalformedTrace(
            f"beacon accounting does not balance: {m.beacons_expected} due vs {completed} completed"
            f" + {m.beacons_suppressed} suppressed + {m.beacons_pending} pending")
    if not m.beacons_received <= m.beacons_transmitted <= m.beacons_expected:
        raise MalformedTrace("received <= transmitted <= expected violated")
    return m


def delay_to_k(trace: TraceLog, k: int = 5,
               beacon_interval_us: int = TABLE1.beacon_interval_us) -> int:
    m = summarize(trace, k, beacon_interval_us)
    if m.delay_to_k_us is None:
        raise InsufficientDetections(f"only {len(m.detected_tbtts_us)} detected beacons, need {k}")
    return m.delay_to_k_us


def empirical_cdf(samples) -> list[tuple[int, float]]:
    """Right-continuous step CDF as (value, fraction of samples <= value)."""
    samples = sorted(samples)
    if not samples:
        raise ValueError("empirical_cdf needs at least one sample")
    n = len(samples)
    out = []
    for i, v in enumerate(samples, 1):
        if out and out[-1][0] == v:
            out[-1] = (v, i / n)
        else:
            out.append((v, i / n))
    return out


def cdf_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CDF_COLUMNS)
    w.writerows((v, f"{f:.6f}") for v, f in empirical_cdf(samples))
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()
