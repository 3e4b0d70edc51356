"""Wi-Fi timing constants, LTE-U duty cycles and frame airtimes.

All durations are integer microseconds. Fractional airtimes are rounded up so
that a frame never occupies less of the channel than it physically would.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

MAX_ON_US = 20_000
MIN_OFF_US = 1_000


class ParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""


@dataclass(frozen=True)
class PhyParams:
    difs_us: int = 34
    sifs_us: int = 16
    cw_min: int = 16
    slot_us: int = 9
    preamble_us: int = 20
    data_rate_mbps: float = 6
    beacon_bytes: int = 305
    ack_us: int = 72
    beacon_interval_us: int = 102_400

    def __post_init__(self):
        for name in ("difs_us", "sifs_us", "slot_us", "preamble_us", "ack_us", "beacon_interval_us"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        if self.data_rate_mbps <= 0:
            raise ParameterError("data_rate_mbps must be positive")
        if self.beacon_bytes < 0:
            raise ParameterError("beacon_bytes must be non-negative")
        if self.cw_min < 2 or self.cw_min & (self.cw_min - 1):
            raise ParameterError(f"cw_min must be a power of two >= 2, got {self.cw_min}")


# Table of beacon transmission parameters used throughout the analysis.
TABLE1 = PhyParams()


@dataclass(frozen=True)
class DutyCycle:
    t_on_us: int
    t_off_us: int

    def __post_init__(self):
        if not 0 < self.t_on_us <= MAX_ON_US:
            raise ParameterError(f"t_on_us must be in (0, {MAX_ON_US}], got {self.t_on_us}")
        if self.t_off_us < MIN_OFF_US:
            raise ParameterError(f"t_off_us must be >= {MIN_OFF_US}, got {self.t_off_us}")

    @property
    def period_us(self) -> int:
        return self.t_on_us + self.t_off_us

    def fraction(self) -> float:
        return self.t_on_us / self.period_us

    def __str__(self):
        return f"{self.t_on_us}/{self.t_off_us}"


DUTY_95 = DutyCycle(20_000, 1_000)
DUTY_80 = DutyCycle(20_000, 5_000)
DUTY_50 = DutyCycle(20_000, 20_000)
DUTY_50_SHORT = DutyCycle(5_000, 5_000)


class PacketKind(enum.Enum):
    """Frame types on the shared channel: (label, default size in bytes, needs ACK)."""

    BEACON = ("beacon", 305, False)
    PROBE_REQUEST = ("probe_request", 120, False)
    PROBE_RESPONSE = ("probe_response", 300, True)
    AUTH_REQUEST = ("auth_request", 60, True)
    AUTH_RESPONSE = ("auth_response", 60, True)
    ASSOC_REQUEST = ("assoc_request", 120, True)
    ASSOC_RESPONSE = ("assoc_response", 120, True)
    ACK = ("ack", 14, False)
    DATA = ("data", 1500, True)

    def __init__(self, label, size_bytes, requires_ack):
        self.label = label
        self.size_bytes = size_bytes
        self.requires_ack = requires_ack

    @classmethod
    def from_label(cls, label: str) -> "PacketKind":
        for kind in cls:
            if kind.label == label:
                return kind
        raise KeyError(label)


def _payload_us(p: PhyParams, n_bytes: int) -> Fraction:
    return Fraction(n_bytes * 8) / Fraction(p.data_rate_mbps)


def beacon_airtime(p: PhyParams) -> int:
    """Preamble plus beacon payload at the base rate, rounded up to whole µs."""
    return math.ceil(p.preamble_us + _payload_us(p, p.beacon_bytes))


def beacon_airtime_slots(p: PhyParams) -> int:
    return -(-beacon_airtime(p) // p.slot_us)


def frame_airtime(p: PhyParams, n_bytes: int) -> int:
    """Airtime of a frame without any ACK exchange."""
    if n_bytes < 0:
        raise ParameterError("frame size must be non-negative")
    return math.ceil(p.preamble_us + _payload_us(p, n_bytes))


def unicast_airtime(p: PhyParams, n_u: int) -> int:
    """Full channel occupancy of an acknowledged frame: data, SIFS and ACK."""
    if n_u < 0:
        raise ParameterError("unicast size must be non-negative")
    return math.ceil(p.preamble_us + _payload_us(p, n_u) + p.sifs_us + p.ack_us)


def occupancy_us(p: PhyParams, kind: PacketKind, n_bytes: int | None = None) -> int:
    n = kind.size_bytes if n_bytes is None else n_bytes
    if kind is PacketKind.BEACON and n_bytes is None:
        n = p.beacon_bytes
    if kind is PacketKind.ACK:
        return p.ack_us
    return unicast_airtime(p, n) if kind.requires_ack else frame_airtime(p, n)


def fspl_dbm(tx_dbm: float = 23.0, distance_m: float = 17 * 0.3048, freq_hz: float = 5.805e9) -> float:
    """Received power under free-space path loss."""
    loss = 20 * math.log10(4 * math.pi * distance_m * freq_hz / 299_792_458.0)
    return tx_dbm - loss
