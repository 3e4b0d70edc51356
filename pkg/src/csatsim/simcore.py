"""Discrete-event simulation of one unlicensed channel shared by LTE-U and Wi-Fi.

Time is integer microseconds. Events at the same instant are ordered by
kind, then node id, then insertion order, so a run is a pure function of its
Scenario. All Wi-Fi nodes share one collision domain with zero propagation
delay; two nodes whose DIFS or backoff ends in the same microsecond both
transmit and collide.

LTE-U ON periods occupy [start, start + t_on) and OFF periods the half-open
remainder of the cycle, so the instant a cycle ends already belongs to the
next ON period.
"""

from __future__ import annotations

import enum
import heapq
import logging
import random
from collections import deque
from typing import NamedTuple

from . import csat as csatmod
from .csat import CsatConfig
from .params import DutyCycle, PacketKind, frame_airtime, occupancy_us
from .scenario import ROLES, Scenario
from .trace import DELIVERED, DROPPED_COLLISION, DROPPED_OVERLAP_ON, TraceLog

log = logging.getLogger(__name__)


class EventKind(enum.IntEnum):
    LTE_ON_START = 0
    LTE_ON_END = 1
    BEACON_DUE = 2
    PACKET_ARRIVAL = 3
    DIFS_COMPLETE = 4
    BACKOFF_SLOT_TICK = 5
    TX_COMPLETE = 6
    ACK_DUE = 7
    SENSE_WINDOW_CLOSE = 8
    CSAT_DECISION = 9


class SimEvent(NamedTuple):
    at: int
    kind: int
    subject: int
    seq: int
    payload: object = None


class EventQueue:
    """Min-heap of SimEvents with the deterministic same-instant tiebreak."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, at: int, kind: int, subject: int, payload=None) -> None:
        heapq.heappush(self._heap, SimEvent(at, kind, subject, self._seq, payload))
        self._seq += 1

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)

    def peek_time(self):
        return self._heap[0].at if self._heap else None

    def __len__(self):
        return len(self._heap)


class Phase(enum.IntEnum):
    IDLE = 0
    DIFS = 1
    BACKOFF = 2
    TRANSMITTING = 3
    AWAIT_ACK = 4
    DEFERRED = 5


class AssocPhase(enum.Enum):
    SCANNING_PASSIVE = "scanning_passive"
    SCANNING_ACTIVE = "scanning_active"
    AUTHENTICATING = "authenticating"
    ASSOCIATING = "associating"
    ASSOCIATED = "associated"


def lte_occupancy(dc: DutyCycle, t: int, origin: int = 0) -> tuple[bool, int]:
    """(is ON, µs until the next edge) for a fixed duty cycle started at ``origin``."""
    if t < origin:
        return False, origin - t
    phase = (t - origin) % dc.period_us
    if phase < dc.t_on_us:
        return True, dc.t_on_us - phase
    return False, dc.period_us - phase


class Packet:
    __slots__ = ("kind", "src", "dst", "tries", "tbtt", "occupancy", "airtime")

    def __init__(self, kind, src, dst, occupancy, airtime, tbtt=None):
        self.kind = kind
        self.src = src
        self.dst = dst
        self.tries = 0
        self.tbtt = tbtt
        self.occupancy = occupancy
        self.airtime = airtime


class Transmission:
    __slots__ = ("node", "packet", "start", "end", "overlap_on", "collided")

    def __init__(self, node, packet, start, end):
        self.node = node
        self.packet = packet
        self.start = start
        self.end = end
        self.overlap_on = False
        self.collided = False

    @property
    def outcome(self) -> str:
        return adjudicate(self)


def adjudicate(tx: Transmission) -> str:
    """Overlap with an LTE-U ON period takes precedence over a Wi-Fi collision."""
    if tx.overlap_on:
        return DROPPED_OVERLAP_ON
    if tx.collided:
        return DROPPED_COLLISION
    return DELIVERED


class WifiNode:
    """A CSMA/CA station: the AP, the saturated second AP, or a client."""

    def __init__(self, nid: int, name: str, role: str):
        self.id = nid
        self.name = name
        self.role = role
        self.queue = deque()
        self.beacon = None
        self.current = None
        self.phase = Phase.IDLE
        self.token = 0
        self.timer_at = -1
        self.backoff = None
        self.bstart = 0
        self.need_backoff = False
        self.busy = 0
        self.alive = True
        # association client state
        self.assoc = None
        self.associating = False
        self.restarts = 0
        self.assoc_log = []


class LteState:
    def __init__(self, duty: DutyCycle | None, config: CsatConfig | None):
        self.duty = duty
        self.config = config
        self.csat = csatmod.initial_state(config) if config else None
        self.on = False
        self.pending = None
        self.window_open = False
        self.window_max = None


class ConfigurationError(ValueError):
    pass


class Simulator:
    LTE, AP, WIFI_A = 0, 1, 2

    def __init__(self, scenario: Scenario):
        try:
            scenario.validate()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        self.s = s = scenario
        p = s.phy
        self.phy = p
        self.difs = 0 if s.immediate_access else p.difs_us
        self.slot = p.slot_us
        self.cw = p.cw_min
        self.horizon = s.duration_us
        self.q = EventQueue()
        self.rows = []
        self.now = 0
        seed = s.seed
        self.rng_mac = random.Random(f"csatsim/{seed}/mac")
        self.rng_traffic = random.Random(f"csatsim/{seed}/traffic")
        self.rng_start = random.Random(f"csatsim/{seed}/start")

        self._occ = {}
        self._air = {}
        for kind in PacketKind:
            if kind is PacketKind.BEACON:
                n = p.beacon_bytes
            else:
                n = s.frame_bytes.get(kind.label, kind.size_bytes)
            self._occ[kind] = occupancy_us(p, kind, n)
            self._air[kind] = frame_airtime(p, n) if kind is not PacketKind.ACK else p.ack_us

        lte = s.lte
        if lte is None:
            self.lte = LteState(None, None)
        elif isinstance(lte, DutyCycle):
            self.lte = LteState(lte, None)
        else:
            self.lte = LteState(lte.initial_duty, lte)
        self.lte_enabled = lte is not None
        self._duty_cols = self._cols(self.lte.duty) if self.lte_enabled else ("", "")

        self._hear_roles = {(a, b): s.link(a, b) >= s.cs_threshold_dbm for a in ROLES for b in ROLES}
        self.nodes = {}
        self.wifi = []
        self.active = []
        self.next_id = 3
        self.ed_threshold = lte.ed_threshold_dbm if isinstance(lte, CsatConfig) else -70.0
        if s.wifi_ap_enabled:
            self.ap = self._add_node(self.AP, "ap", "ap")
        else:
            self.ap = None
        if s.second_ap:
            self.wifi_a = self._add_node(self.WIFI_A, "wifi_a", "wifi_a")
        self.wifi_start = None

    # -- bookkeeping ---------------------------------------------------------

    @staticmethod
    def _cols(duty):
        return (duty.t_on_us, duty.t_off_us)

    def _row(self, t, event, node, kind="", outcome=""):
        on, off = self._duty_cols
        self.rows.append((t, event, node, kind, outcome, on, off))

    def _add_node(self, nid, name, role):
        n = WifiNode(nid, name, role)
        s = self.s
        n.hears_lte = self.lte_enabled and s.link("lte", role) >= s.cs_threshold_dbm
        n.power_at_lte = s.link(role, "lte")
        n.busy = 1 if (self.lte.on and n.hears_lte) else 0
        for tx in self.active:
            if self._hears(tx.node, n):
                n.busy += 1
        self.nodes[nid] = n
        self.wifi.append(n)
        return n

    def _hears(self, src: WifiNode, dst: WifiNode) -> bool:
        return self._hear_roles[src.role, dst.role]

    def _packet(self, kind, src, dst, tbtt=None):
        return Packet(kind, src, dst, self._occ[kind], self._air[kind], tbtt)

    # -- run -------------------------------------------------------------------

    def run(self) -> TraceLog:
        s = self.s
        q = self.q
        if self.lte_enabled:
            q.push(s.lte_start_us, EventKind.LTE_ON_START, self.LTE)
        if self.ap is not None:
            start = s.wifi_start_us
            if start is None:
                start = self.rng_start.randrange(s.wifi_start_window_us)
            self.wifi_start = start
            q.push(start, EventKind.BEACON_DUE, self.AP)
            if s.probe_rate_per_s > 0:
                self._schedule_arrival(start)
            if s.passive_client:
                c = self._add_node(self.next_id, f"sta{self.next_id}", "sta")
                self.next_id += 1
                c.assoc = AssocPhase.SCANNING_PASSIVE
                c.associating = True
        if s.second_ap:
            self.wifi_a.queue.append(self._packet(PacketKind.DATA, self.wifi_a, None))
            self._kick(self.wifi_a, 0)

        handlers = (self._on_lte_on_start, self._on_lte_on_end, self._on_beacon_due,
                    self._on_arrival, self._on_difs_complete, self._on_backoff_tick,
                    self._on_tx_complete, self._on_ack_due, self._on_sense_window_close,
                    self._on_csat_decision)
        heap = q._heap
        pop = heapq.heappop
        horizon = self.horizon
        while heap and heap[0][0] < horizon:
            ev = pop(heap)
            self.now = ev[0]
            handlers[ev[1]](ev)
        self._flush_pending()
        return TraceLog(self.rows)

    def _flush_pending(self):
        ap = self.ap
        if ap is None:
            return
        held = [ap.beacon]
        if ap.current is not None and ap.current.kind is PacketKind.BEACON:
            held.append(ap.current)
        for b in held:
            if b is not None:
                self._row(self.horizon, "beacon_pending", "ap", "beacon", "pending")

    # -- LTE-U -----------------------------------------------------------------

    def _on_lte_on_start(self, ev):
        t = ev.at
        lte = self.lte
        if lte.pending is not None:
            lte.duty = lte.pending
            lte.pending = None
            self._duty_cols = self._cols(lte.duty)
        lte.on = True
        for tx in self.active:
            if tx.end > t:
                tx.overlap_on = True
        for n in self.wifi:
            if n.hears_lte:
                self._busy(n, t, False)
        self._row(t, "lte_on", "lte")
        self.q.push(t + lte.duty.t_on_us, EventKind.LTE_ON_END, self.LTE)
        if lte.window_open:
            lte.window_open = False
            dbm = csatmod.measure_window(() if lte.window_max is None else (lte.window_max,),
                                         self.s.noise_floor_dbm)
            self.q.push(t, EventKind.SENSE_WINDOW_CLOSE, self.LTE, dbm)

    def _on_lte_on_end(self, ev):
        t = ev.at
        lte = self.lte
        lte.on = False
        self._row(t, "lte_off", "lte")
        for n in self.wifi:
            if n.hears_lte:
                self._idle(n, t)
        self.q.push(t + lte.duty.t_off_us, EventKind.LTE_ON_START, self.LTE)
        if lte.config is not None:
            lte.window_open = True
            powers = [tx.node.power_at_lte for tx in self.active if tx.end > t]
            lte.window_max = max(powers) if powers else None

    def _on_sense_window_close(self, ev):
        t = ev.at
        lte = self.lte
        cfg = lte.config
        dbm = ev.payload
        lte.csat = csatmod.observe(lte.csat, dbm, cfg)
        self._row(t, "sense_window", "lte", "", "detected" if dbm >= cfg.ed_threshold_dbm else "idle")
        if lte.csat.windows_observed == cfg.n_windows:
            duty, lte.csat = csatmod.decide(lte.csat, cfg)
            self.q.push(t + cfg.hw_delay_us, EventKind.CSAT_DECISION, self.LTE, duty)

    def _on_csat_decision(self, ev):
        t = ev.at
        lte = self.lte
        duty = ev.payload
        label = "low" if duty == lte.config.low_duty else "high"
        self._row(t, "csat_decision", "lte", "", label)
        target = lte.pending if lte.pending is not None else lte.duty
        if duty != target:
            old = target
            lte.pending = duty
            on, off = self._duty_cols
            self.rows.append((t, "csat_switch", "lte", "", f"{label};from={old.t_on_us}/{old.t_off_us}",
                              duty.t_on_us, duty.t_off_us))

    # -- CSMA/CA ---------------------------------------------------------------

    def _busy(self, n, t, same_instant):
        n.busy += 1
        if n.busy != 1:
            return
        ph = n.phase
        if ph is Phase.DIFS or ph is Phase.BACKOFF:
            if same_instant and n.timer_at == t:
                return
            n.token += 1
            if ph is Phase.BACKOFF:
                n.backoff -= (t - n.bstart) // self.slot
            n.phase = Phase.DEFERRED
            n.need_backoff = True

    def _idle(self, n, t):
        n.busy -= 1
        if n.busy == 0 and n.phase is Phase.DEFERRED:
            self._start_difs(n, t)

    def _kick(self, n, t):
        """Start channel access for the next frame of an idle node."""
        if n.current is None:
            if n.beacon is not None:
                n.current, n.beacon = n.beacon, None
            elif n.queue:
                n.current = n.queue.popleft()
            else:
                return
        if n.busy:
            n.phase = Phase.DEFERRED
            n.need_backoff = True
        else:
            self._start_difs(n, t)

    def _start_difs(self, n, t):
        n.phase = Phase.DIFS
        n.token += 1
        n.timer_at = t + self.difs
        self.q.push(n.timer_at, EventKind.DIFS_COMPLETE, n.id, n.token)

    def _on_difs_complete(self, ev):
        n = self.nodes[ev.subject]
        if ev.payload != n.token:
            return
        t = ev.at
        if n.need_backoff and self.difs:
            if n.backoff is None:
                n.backoff = self.rng_mac.randrange(self.cw)
            if n.busy:
                # a transmission began in this very microsecond; count down once it ends
                n.phase = Phase.DEFERRED
                return
            if n.backoff > 0:
                n.phase = Phase.BACKOFF
                n.bstart = t
                n.token += 1
                n.timer_at = t + n.backoff * self.slot
                self.q.push(n.timer_at, EventKind.BACKOFF_SLOT_TICK, n.id, n.token)
                return
        self._transmit(n, t)

    def _on_backoff_tick(self, ev):
        n = self.nodes[ev.subject]
        if ev.payload != n.token:
            return
        self._transmit(n, ev.at)

    def _transmit(self, n, t):
        p = n.current
        n.phase = Phase.TRANSMITTING
        n.token += 1
        n.backoff = None
        n.need_backoff = False
        p.tries += 1
        tx = Transmission(n, p, t, t + p.occupancy)
        if self.lte.on:
            tx.overlap_on = True
        for other in self.active:
            if other.end > t:
                other.collided = True
                tx.collided = True
        self.active.append(tx)
        for m in self.wifi:
            if m is not n and self._hears(n, m):
                self._busy(m, t, True)
        lte = self.lte
        if lte.window_open:
            pw = n.power_at_lte
            if lte.window_max is None or pw > lte.window_max:
                lte.window_max = pw
        self._row(t, "tx_start", n.name, p.kind.label)
        if p.kind.requires_ack:
            self.q.push(t + p.airtime, EventKind.TX_COMPLETE, n.id, tx)
            self.q.push(tx.end, EventKind.ACK_DUE, n.id, tx)
        else:
            self.q.push(tx.end, EventKind.TX_COMPLETE, n.id, tx)

    def _on_tx_complete(self, ev):
        tx = ev.payload
        if tx.packet.kind.requires_ack:
            tx.node.phase = Phase.AWAIT_ACK
            return
        self._finish(tx, ev.at)

    def _on_ack_due(self, ev):
        self._finish(ev.payload, ev.at)

    def _finish(self, tx, t):
        n = tx.node
        p = tx.packet
        self.active.remove(tx)
        for m in self.wifi:
            if m is not n and self._hears(n, m):
                self._idle(m, t)
        outcome = adjudicate(tx)
        self._row(t, "tx_end", n.name, p.kind.label, outcome)
        n.phase = Phase.IDLE
        n.need_backoff = True
        kind = p.kind
        if kind is PacketKind.BEACON:
            n.current = None
            if (outcome != DROPPED_OVERLAP_ON and n.power_at_lte >= self.ed_threshold):
                self._row(t, "beacon_detected", "lte", "beacon")
            if outcome == DELIVERED:
                self._beacon_heard(t)
        elif outcome == DELIVERED:
            n.current = None
            self._delivered(p, t)
        elif p.tries >= self.s.retry_limit:
            n.current = None
            self._row(t, "tx_abandon", n.name, kind.label, "retry_limit")
            client = p.src if p.src.role == "sta" else p.dst
            if client is not None and client.role == "sta":
                self._exchange_failed(client, t)
        if n.role == "wifi_a" and n.current is None and not n.queue:
            n.queue.append(self._packet(PacketKind.DATA, n, None))
        if n.current is not None or n.beacon is not None or n.queue:
            if n.phase is Phase.IDLE:
                self._kick(n, t)
        else:
            n.need_backoff = False
            if n.role == "sta" and (n.assoc is None or n.assoc is AssocPhase.ASSOCIATED):
                self._retire(n)

    # -- beacons, probes and association -----------------------------------------

    def _on_beacon_due(self, ev):
        t = ev.at
        ap = self.ap
        b = self._packet(PacketKind.BEACON, ap, None, tbtt=t)
        self._row(t, "beacon_due", "ap", "beacon")
        cur = ap.current
        if cur is not None and cur.kind is PacketKind.BEACON and ap.phase is not Phase.TRANSMITTING:
            self._row(t, "beacon_suppressed", "ap", "beacon", "suppressed")
            ap.current = b
        else:
            if ap.beacon is not None:
                self._row(t, "beacon_suppressed", "ap", "beacon", "suppressed")
            ap.beacon = b
            if ap.phase is Phase.IDLE:
                self._kick(ap, t)
        self.q.push(t + self.phy.beacon_interval_us, EventKind.BEACON_DUE, self.AP)

    def _schedule_arrival(self, t):
        gap = self.rng_traffic.expovariate(self.s.probe_rate_per_s / 1e6)
        nid = self.next_id
        self.next_id += 1
        self.q.push(t + int(round(gap)), EventKind.PACKET_ARRIVAL, nid)

    def _on_arrival(self, ev):
        t = ev.at
        c = self._add_node(ev.subject, f"sta{ev.subject}", "sta")
        c.associating = self.rng_traffic.random() < self.s.assoc_prob
        self._row(t, "client_arrival", c.name, "probe_request", "associating" if c.associating else "probing")
        self._set_assoc(c, AssocPhase.SCANNING_ACTIVE, t)
        self._enqueue(c, self._packet(PacketKind.PROBE_REQUEST, c, self.ap), t)
        self._schedule_arrival(t)

    def _enqueue(self, n, pkt, t):
        n.queue.append(pkt)
        if n.phase is Phase.IDLE and n.current is None:
            self._kick(n, t)

    def _set_assoc(self, c, phase, t, note=None):
        c.assoc = phase
        c.assoc_log.append((t, phase))
        self._row(t, "assoc", c.name, "", note or phase.value)

    def _retire(self, n):
        if n.alive:
            n.alive = False
            self.wifi.remove(n)

    def _beacon_heard(self, t):
        for c in list(self.wifi):
            if c.assoc is AssocPhase.SCANNING_PASSIVE:
                self._set_assoc(c, AssocPhase.AUTHENTICATING, t)
                self._enqueue(c, self._packet(PacketKind.AUTH_REQUEST, c, self.ap), t)

    def _delivered(self, p, t):
        kind = p.kind
        ap = self.ap
        K = PacketKind
        if kind is K.PROBE_REQUEST:
            if p.src.assoc is AssocPhase.SCANNING_ACTIVE:
                self._enqueue(ap, self._packet(K.PROBE_RESPONSE, ap, p.src), t)
        elif kind is K.PROBE_RESPONSE:
            c = p.dst
            if c.assoc is AssocPhase.SCANNING_ACTIVE:
                if c.associating:
                    self._set_assoc(c, AssocPhase.AUTHENTICATING, t)
                    self._enqueue(c, self._packet(K.AUTH_REQUEST, c, ap), t)
                else:
                    self._set_assoc(c, AssocPhase.SCANNING_ACTIVE, t, "scan_done")
                    c.assoc = None
                    if c.current is None and not c.queue and c.phase is Phase.IDLE:
                        self._retire(c)
        elif kind is K.AUTH_REQUEST:
            if p.src.assoc is AssocPhase.AUTHENTICATING:
                self._enqueue(ap, self._packet(K.AUTH_RESPONSE, ap, p.src), t)
        elif kind is K.AUTH_RESPONSE:
            c = p.dst
            if c.assoc is AssocPhase.AUTHENTICATING:
                self._set_assoc(c, AssocPhase.ASSOCIATING, t)
                self._enqueue(c, self._packet(K.ASSOC_REQUEST, c, ap), t)
        elif kind is K.ASSOC_REQUEST:
            if p.src.assoc is AssocPhase.ASSOCIATING:
                self._enqueue(ap, self._packet(K.ASSOC_RESPONSE, ap, p.src), t)
        elif kind is K.ASSOC_RESPONSE:
            c = p.dst
            if c.assoc is AssocPhase.ASSOCIATING:
                self._set_assoc(c, AssocPhase.ASSOCIATED, t)
                if c.current is None and not c.queue and c.phase is Phase.IDLE:
                    self._retire(c)

    def _exchange_failed(self, c, t):
        if c.restarts >= self.s.max_restarts:
            c.assoc = None
            self._row(t, "assoc", c.name, "", "abandoned")
            c.queue.clear()
            if c.current is None and c.phase is Phase.IDLE:
                self._retire(c)
            return
        c.restarts += 1
        self._set_assoc(c, AssocPhase.SCANNING_ACTIVE, t, "restart")
        self._enqueue(c, self._packet(PacketKind.PROBE_REQUEST, c, self.ap), t)


def run(scenario: Scenario) -> TraceLog:
    return Simulator(scenario).run()
