"""Scenario description for one simulation run, plus JSON round-tripping."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Union

from .csat import CsatConfig
from .params import TABLE1, DutyCycle, PacketKind, ParameterError, PhyParams, fspl_dbm

ROLES = ("lte", "ap", "wifi_a", "sta")

LteMode = Union[None, DutyCycle, CsatConfig]


def default_frame_bytes() -> dict:
    return {k.label: k.size_bytes for k in PacketKind if k not in (PacketKind.BEACON, PacketKind.ACK)}


@dataclass
class Scenario:
    """Everything needed to reproduce one run.

    ``lte`` is None when the LTE-U BS is silent, a DutyCycle for a fixed ON/OFF
    pattern, or a CsatConfig for adaptive operation. ``wifi_start_us`` of None
    draws the AP power-on instant uniformly from ``[0, wifi_start_window_us)``
    using the run seed. Link powers are keyed ``"tx>rx"`` by role and fall back
    to ``default_link_dbm``.
    """

    name: str = "custom"
    phy: PhyParams = TABLE1
    lte: LteMode = None
    lte_start_us: int = 0
    wifi_ap_enabled: bool = True
    wifi_start_us: int | None = None
    wifi_start_window_us: int = TABLE1.beacon_interval_us
    second_ap: bool = False
    probe_rate_per_s: float = 0.0
    assoc_prob: float = 1.0
    passive_client: bool = False
    frame_bytes: dict = field(default_factory=default_frame_bytes)
    default_link_dbm: float = round(fspl_dbm(), 1)
    link_dbm: dict = field(default_factory=dict)
    cs_threshold_dbm: float = -82.0
    noise_floor_dbm: float = -95.0
    retry_limit: int = 7
    max_restarts: int = 3
    immediate_access: bool = False
    seed: int = 0
    duration_us: int = 300_000_000

    def link(self, tx: str, rx: str) -> float:
        return self.link_dbm.get(f"{tx}>{rx}", self.default_link_dbm)

    def validate(self) -> None:
        if not (self.wifi_ap_enabled or self.second_ap or self.lte is not None
                or self.probe_rate_per_s > 0):
            raise ParameterError("scenario has no transmitter enabled")
        if self.duration_us <= 0:
            raise ParameterError("duration_us must be positive")
        if self.probe_rate_per_s < 0:
            raise ParameterError("probe_rate_per_s must be non-negative")
        if not 0 <= self.assoc_prob <= 1:
            raise ParameterError("assoc_prob must be in [0, 1]")
        if self.retry_limit < 1:
            raise ParameterError("retry_limit must be >= 1")
        if self.wifi_start_us is not None and self.wifi_start_us < 0:
            raise ParameterError("wifi_start_us must be non-negative")
        if self.wifi_start_window_us < 1:
            raise ParameterError("wifi_start_window_us must be >= 1")
        for key, value in list(self.link_dbm.items()) + [("default", self.default_link_dbm)]:
            if not math.isfinite(value):
                raise ParameterError(f"link power {key} is not finite")
            if key != "default":
                tx, _, rx = key.partition(">")
                if tx not in ROLES or rx not in ROLES:
                    raise ParameterError(f"unknown link {key!r}; roles are {ROLES}")
        for label, n in self.frame_bytes.items():
            PacketKind.from_label(label)
            if n < 0:
                raise ParameterError(f"negative frame size for {label}")

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["phy"] = dataclasses.asdict(self.phy)
        d["lte"] = _lte_to_dict(self.lte)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown scenario fields: {sorted(unknown)}")
        if "phy" in d:
            d["phy"] = PhyParams(**d["phy"])
        if "lte" in d:
            d["lte"] = _lte_from_dict(d["lte"])
        if "frame_bytes" in d:
            d["frame_bytes"] = {**default_frame_bytes(), **d["frame_bytes"]}
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def _duty(d) -> DutyCycle:
    return DutyCycle(int(d["t_on_us"]), int(d["t_off_us"]))


def _lte_to_dict(lte: LteMode):
    if lte is None:
        return None
    if isinstance(lte, DutyCycle):
        return {"fixed": dataclasses.asdict(lte)}
    return {"csat": dataclasses.asdict(lte)}


def _lte_from_dict(d) -> LteMode:
    if d is None:
        return None
    if "fixed" in d:
        return _duty(d["fixed"])
    if "csat" in d:
        c = dict(d["csat"])
        c["high_duty"] = _duty(c["high_duty"])
        c["low_duty"] = _duty(c["low_duty"])
        return CsatConfig(**c)
    raise ParameterError(f"lte must be null, {{'fixed': ...}} or {{'csat': ...}}, got {d!r}")
