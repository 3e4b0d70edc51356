"""Energy-based CSAT duty-cycle controller.

The LTE-U BS listens during its OFF windows only. Every ``n_windows`` OFF
windows it decides between the "Wi-Fi present" duty cycle and the "channel
empty" one, following the counting rule of the LTE-U forum CSAT procedure:
Count 1 tracks windows whose energy reached the ED threshold, Count 2 the
rest. Count 1 is only cleared when the controller settles on the low duty
cycle, so detections keep accumulating across unsuccessful rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .params import DUTY_50, DUTY_80, DutyCycle


class CsatError(RuntimeError):
    pass


@dataclass(frozen=True)
class CsatConfig:
    n_windows: int = 30
    k_required: int = 5
    ed_threshold_dbm: float = -70.0
    high_duty: DutyCycle = DUTY_80
    low_duty: DutyCycle = DUTY_50
    hw_delay_us: int = 0
    initial: str = "low"

    def __post_init__(self):
        if not self.n_windows >= self.k_required >= 1:
            raise CsatError("need n_windows >= k_required >= 1")
        if self.high_duty.fraction() <= self.low_duty.fraction():
            raise CsatError("high_duty must occupy more of the channel than low_duty")
        if self.hw_delay_us < 0:
            raise CsatError("hw_delay_us must be non-negative")
        if self.initial not in ("low", "high"):
            raise CsatError(f"initial must be 'low' or 'high', got {self.initial!r}")

    @property
    def initial_duty(self) -> DutyCycle:
        return self.low_duty if self.initial == "low" else self.high_duty


@dataclass(frozen=True)
class CsatState:
    current_duty: DutyCycle
    count1: int = 0
    count2: int = 0
    ed_samples_dbm: tuple = ()
    detected_dbm: tuple = field(default=(), repr=False)
    windows_observed: int = 0


def initial_state(config: CsatConfig) -> CsatState:
    return CsatState(current_duty=config.initial_duty)


def measure_window(powers_dbm, noise_floor_dbm: float = -95.0) -> float:
    """Strongest Wi-Fi power seen in one OFF window, or the noise floor if none."""
    return max(powers_dbm, default=noise_floor_dbm)


def linear_mean_dbm(values_dbm) -> float:
    if not values_dbm:
        return -math.inf
    mw = sum(10 ** (v / 10) for v in values_dbm) / len(values_dbm)
    return 10 * math.log10(mw)


def observe(state: CsatState, window_dbm: float, config: CsatConfig) -> CsatState:
    if state.windows_observed >= config.n_windows:
        raise CsatError("observation round already complete; call decide() first")
    samples = state.ed_samples_dbm + (window_dbm,)
    if window_dbm >= config.ed_threshold_dbm:
        return replace(state, count1=state.count1 + 1, ed_samples_dbm=samples,
                       detected_dbm=state.detected_dbm + (window_dbm,),
                       windows_observed=state.windows_observed + 1)
    return replace(state, count2=state.count2 + 1, ed_samples_dbm=samples,
                   windows_observed=state.windows_observed + 1)


def wifi_detected(state: CsatState, config: CsatConfig) -> bool:
    return (state.count1 >= config.k_required
            and linear_mean_dbm(state.detected_dbm) >= config.ed_threshold_dbm)


def decide(state: CsatState, config: CsatConfig) -> tuple[DutyCycle, CsatState]:
    if state.windows_observed < config.n_windows:
        raise CsatError(f"decide() after {state.windows_observed} of {config.n_windows} windows")
    if wifi_detected(state, config):
        duty = config.low_duty
        nxt = CsatState(current_duty=duty, count1=0, count2=state.count2)
    else:
        duty = config.high_duty
        nxt = CsatState(current_duty=duty, count1=state.count1, count2=0,
                        detected_dbm=state.detected_dbm)
    return duty, nxt
