"""Named scenarios for the seven coexistence cases and the beacon-only checks."""

from __future__ import annotations

from dataclasses import replace

from .csat import CsatConfig
from .params import DUTY_50, DUTY_50_SHORT, DUTY_80, DUTY_95, DutyCycle
from .scenario import Scenario

DEFAULT_PROBE_RATE = 5.0
# CSAT cases draw the AP power-on instant over a full 50% observation round
CSAT_START_WINDOW_US = 1_200_000


def _case(name, lte, **kw):
    kw.setdefault("probe_rate_per_s", DEFAULT_PROBE_RATE)
    return Scenario(name=name, lte=lte, **kw)


def _beacon_only(name, duty, **kw):
    return Scenario(name=name, lte=duty, probe_rate_per_s=0.0, **kw)


_BUILDERS = {
    # Wi-Fi/Wi-Fi: a saturated second AP contends with the beaconing AP
    "case_a": lambda: _case("case_a", None, second_ap=True),
    "case_b": lambda: _case("case_b", DUTY_50_SHORT),
    "case_c": lambda: _case("case_c", DUTY_50),
    "case_d": lambda: _case("case_d", DUTY_95),
    "case_e": lambda: _case("case_e", DUTY_80),
    "case_f": lambda: _case("case_f", CsatConfig(high_duty=DUTY_80, low_duty=DUTY_50, initial="high"),
                            wifi_start_window_us=CSAT_START_WINDOW_US),
    "case_g": lambda: _case("case_g", CsatConfig(high_duty=DUTY_95, low_duty=DUTY_50, initial="high"),
                            wifi_start_window_us=CSAT_START_WINDOW_US),
    "empty": lambda: _beacon_only("empty", None),
    "beacon_20_1": lambda: _beacon_only("beacon_20_1", DUTY_95),
    "beacon_20_5": lambda: _beacon_only("beacon_20_5", DUTY_80),
    "beacon_5_5": lambda: _beacon_only("beacon_5_5", DUTY_50_SHORT),
    "custom": lambda: Scenario(name="custom"),
}

CASES = tuple(f"case_{c}" for c in "abcdefg")
PRESETS = tuple(_BUILDERS)


def resolve(name: str, **overrides) -> Scenario:
    try:
        s = _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return replace(s, **overrides) if overrides else s


def beacon_validation(duty: DutyCycle, seed: int, duration_us: int, immediate: bool = True) -> Scenario:
    """Beacon-only run with an arbitrary duty cycle, by default with backoff-free access."""
    return Scenario(name=f"beacon_{duty}", lte=duty, probe_rate_per_s=0.0, immediate_access=immediate,
                    seed=seed, duration_us=duration_us)
