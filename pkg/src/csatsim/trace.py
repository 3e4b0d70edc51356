"""Row-oriented record of everything that happened in a run, with CSV I/O."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("t_us", "event", "node", "packet_kind", "outcome", "duty_on_us", "duty_off_us")

DELIVERED = "delivered"
DROPPED_OVERLAP_ON = "dropped_overlap_on"
DROPPED_COLLISION = "dropped_collision"


@dataclass
class TraceLog:
    """Rows are ``(t_us, event, node, packet_kind, outcome, duty_on_us, duty_off_us)``.

    The duty columns hold the LTE-U duty cycle in force at the row time, or
    empty strings when no LTE-U BS is active.
    """

    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def events(self, name: str):
        return [r for r in self.rows if r[1] == name]

    def to_csv(self, target=None) -> str | None:
        if target is None:
            buf = io.StringIO()
            self._write(buf)
            return buf.getvalue()
        with open(target, "w", encoding="utf-8", newline="") as fh:
            self._write(fh)
        return None

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(self.rows)

    @classmethod
    def from_csv(cls, path) -> "TraceLog":
        with open(Path(path), encoding="utf-8", newline="") as fh:
            return cls._read(fh)

    @classmethod
    def parse(cls, text: str) -> "TraceLog":
        return cls._read(io.StringIO(text))

    @classmethod
    def _read(cls, fh) -> "TraceLog":
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"unexpected trace header {header!r}")
        rows = []
        for t, ev, node, kind, outcome, on, off in reader:
            rows.append((int(t), ev, node, kind, outcome,
                         int(on) if on else "", int(off) if off else ""))
        return cls(rows)
