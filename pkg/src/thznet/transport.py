"""End-to-end flows over a :class:`~thznet.linkstack.LinkStack`.

* constant-bitrate datagrams (no feedback), and
* a reliable byte stream with SACK loss recovery, an RFC 6298 retransmission
  timer and CUBIC congestion control, whose window is traced over time.

The remote host sits behind a core network modelled as a fixed one-way
delay; the wireless hop is the only place where packets queue or get lost.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TextIO

import numpy as np

from .linkstack import Chunk, FlowStats, LinkStack
from .simcore import NS_PER_S, SimEvent, ns_to_seconds, seconds_to_ns


# --------------------------------------------------------------------- CBR

@dataclass(frozen=True)
class CbrFlowConfig:
    rate: float  # bit/s
    packet_size: int = 1500  # bytes
    start: float = 0.0  # s
    stop: float | None = None  # s, None = run to the end

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("source rate must be positive")
        if int(self.packet_size) != self.packet_size or self.packet_size < 1:
            raise ValueError("packet_size must be an integer >= 1")
        if self.start < 0 or (self.stop is not None and self.stop < self.start):
            raise ValueError("need 0 <= start <= stop")


class CbrSource:
    """Lazy constant-bitrate packet generator.

    Packet ``i`` is generated at ``start + ceil(i * bits / R)`` ns, computed
    with integers so long runs do not drift.  Packets are only materialised
    when the MAC polls the source.
    """

    def __init__(self, cfg: CbrFlowConfig, flow_id: str, duration: float):
        self.cfg = cfg
        self.bits = cfg.packet_size * 8
        num, den = Fraction(cfg.rate).as_integer_ratio()
        self._num, self._den = num, den * self.bits * NS_PER_S  # packets per ns = num / _den
        self.start_ns = seconds_to_ns(cfg.start)
        stop = duration if cfg.stop is None else min(cfg.stop, duration)
        self.total = self._count(seconds_to_ns(stop) - 1)
        self.emitted = 0
        self.interval = self.bits / cfg.rate  # s, only for delay bookkeeping
        self.stats = FlowStats(flow_id, duration)

    def _count(self, t: int) -> int:
        """Packets generated in [start, t]."""
        if t < self.start_ns:
            return 0
        return (t - self.start_ns) * self._num // self._den + 1

    def arrival_ns(self, i: int) -> int:
        return self.start_ns + -(-i * self._den // self._num)

    def pull(self, now: int) -> Chunk | None:
        n = min(self._count(now), self.total)
        if n <= self.emitted:
            return None
        chunk = Chunk(self, self.emitted, n - self.emitted, self.cfg.packet_size,
                      created=self.arrival_ns(self.emitted))
        self.emitted = n
        self.stats.sent_packets += chunk.count
        self.stats.offered_bits += chunk.bits
        return chunk

    def next_arrival(self, now: int) -> int | None:
        if self.emitted >= self.total:
            return None
        return self.arrival_ns(self.emitted)

    def on_delivered(self, chunk: Chunk, now: int) -> None:
        s = self.stats
        s.delivered_packets += chunk.count
        s.delivered_bits += chunk.bits
        # Sum of (now - t_i) over the chunk, with t_i on the nominal grid.
        first = self.cfg.start + chunk.seq * self.interval
        mean_birth = first + 0.5 * (chunk.count - 1) * self.interval
        s.delay_sum += chunk.count * (ns_to_seconds(now) - mean_birth)

    def on_dropped(self, chunk: Chunk, now: int, reason: str) -> None:
        self.stats.dropped_packets += chunk.count


def run_cbr_flow(cfg: CbrFlowConfig, stack: LinkStack, duration: float,
                 flow_id: str = "cbr") -> FlowStats:
    """Feed a CBR source into the stack's downlink and run for ``duration`` s."""
    src = CbrSource(cfg, flow_id, duration)
    stack.downlink.sources.append(src)
    stack.mac.notify(stack.downlink)
    stack.engine.run_until(seconds_to_ns(duration))
    # Account for arrivals never polled by the MAC (e.g. a link in outage).
    stack.downlink.refresh(stack.engine.now)
    return src.stats


# ------------------------------------------------------------------- CUBIC

EVENT_RANK = {"ack-growth": 0, "loss": 1, "timeout": 2}


class CwndTrace:
    """(time_s, cwnd_bytes, event) samples with strictly increasing times.

    Several updates at the same instant collapse into one sample holding the
    final window and the most severe event.
    """

    def __init__(self):
        self.times: list[float] = []
        self.cwnd: list[float] = []
        self.events: list[str] = []

    def __len__(self) -> int:
        return len(self.times)

    def record(self, time: float, cwnd: float, event: str) -> None:
        if event not in EVENT_RANK:
            raise ValueError(f"unknown trace event {event!r}")
        if self.times and time <= self.times[-1]:
            if time < self.times[-1]:
                raise ValueError("trace times must not decrease")
            self.cwnd[-1] = cwnd
            if EVENT_RANK[event] > EVENT_RANK[self.events[-1]]:
                self.events[-1] = event
            return
        self.times.append(time)
        self.cwnd.append(cwnd)
        self.events.append(event)

    def count(self, event: str) -> int:
        return sum(e == event for e in self.events)

    def rows(self):
        return zip(self.times, self.cwnd, self.events)

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("time_s", "cwnd_bytes", "event"))
        for t, c, e in self.rows():
            w.writerow((repr(float(t)), repr(float(c)), e))


@dataclass
class CubicState:
    """CUBIC window state; windows in bytes, times in seconds.

    ``fast_convergence`` and ``tcp_friendly`` enable the optional CUBIC
    extensions; both are off by default.
    """

    mss: int = 1500
    cwnd: float = 10 * 1500
    ssthresh: float = math.inf
    w_max: float = 0.0
    epoch_start: float | None = None
    k: float = 0.0  # s from epoch start to the plateau
    origin: float = 0.0  # bytes, window at the plateau
    c: float = 0.4
    beta: float = 0.7
    fast_convergence: bool = False
    tcp_friendly: bool = False
    srtt: float | None = None
    rttvar: float = 0.0
    rto: float = 1.0
    min_rto: float = 0.2
    max_rto: float = 60.0
    trace: CwndTrace | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.c <= 0 or self.mss < 1:
            raise ValueError("c and mss must be positive")
        if self.cwnd < self.mss:
            raise ValueError("cwnd must be at least one packet")

    def _log(self, now: float, event: str) -> None:
        if self.trace is not None:
            self.trace.record(now, self.cwnd, event)

    def target(self, now: float) -> float:
        """W(t) of the current epoch, in bytes."""
        t = now - self.epoch_start
        return (self.c * (t - self.k) ** 3) * self.mss + self.origin


def cubic_on_ack(state: CubicState, now: float, acked_bytes: float) -> CubicState:
    """Window growth for ``acked_bytes`` newly acknowledged at time ``now``."""
    before = state.cwnd
    if state.cwnd < state.ssthresh:
        state.cwnd += acked_bytes
    else:
        if state.epoch_start is None:
            state.epoch_start = now
            if state.cwnd < state.w_max:
                state.k = ((state.w_max - state.cwnd) / state.mss / state.c) ** (1.0 / 3.0)
                state.origin = state.w_max
            else:
                state.k = 0.0
                state.origin = state.cwnd
        target = state.target(now)
        if state.tcp_friendly and state.srtt:
            t = now - state.epoch_start
            w_est = (state.w_max * state.beta
                     + 3 * (1 - state.beta) / (1 + state.beta) * t / state.srtt * state.mss)
            target = max(target, w_est)
        state.cwnd = max(state.cwnd, target)
    if state.cwnd != before:
        state._log(now, "ack-growth")
    return state


def cubic_on_loss(state: CubicState, now: float) -> CubicState:
    """Multiplicative decrease on a loss detected by duplicate/selective acks."""
    if state.fast_convergence and state.cwnd < state.w_max:
        state.w_max = state.cwnd * (1 + state.beta) / 2
    else:
        state.w_max = state.cwnd
    state.cwnd = max(state.cwnd * state.beta, state.mss)
    state.ssthresh = state.cwnd
    state.epoch_start = None
    state._log(now, "loss")
    return state


def cubic_on_timeout(state: CubicState, now: float) -> CubicState:
    """Retransmission timeout: collapse to one packet and slow-start again."""
    state.ssthresh = max(state.cwnd / 2, 2 * state.mss)
    state.w_max = state.cwnd
    state.cwnd = float(state.mss)
    state.epoch_start = None
    state._log(now, "timeout")
    return state


def cubic_closed_form(w_max: float, beta: float, c: float, t: np.ndarray) -> np.ndarray:
    """W(t) = C (t - K)^3 + w_max with K = cbrt(w_max (1 - beta) / C); windows in packets."""
    k = np.cbrt(w_max * (1 - beta) / c)
    return c * (np.asarray(t, dtype=float) - k) ** 3 + w_max


def update_rtt(state: CubicState, sample: float, granularity: float = 1e-6) -> None:
    """RFC 6298 smoothed RTT and RTO update (also clears any backoff)."""
    if state.srtt is None:
        state.srtt = sample
        state.rttvar = sample / 2
    else:
        state.rttvar = 0.75 * state.rttvar + 0.25 * abs(state.srtt - sample)
        state.srtt = 0.875 * state.srtt + 0.125 * sample
    state.rto = min(max(state.min_rto, state.srtt + max(granularity, 4 * state.rttvar)),
                    state.max_rto)


# ---------------------------------------------------------- reliable stream

INFLIGHT, SACKED, LOST, RETX = 0, 1, 2, 3


@dataclass(frozen=True)
class TcpConfig:
    mss: int = 1500
    ack_size: int = 64  # bytes on the air
    initial_window: int = 10  # packets
    dupthresh: int = 3
    min_rto: float = 0.2
    max_rto: float = 60.0
    initial_rto: float = 1.0
    c: float = 0.4
    beta: float = 0.7
    fast_convergence: bool = False
    tcp_friendly: bool = False

    def __post_init__(self):
        if self.mss < 1 or self.ack_size < 1 or self.initial_window < 1 or self.dupthresh < 1:
            raise ValueError("mss, ack_size, initial_window and dupthresh must be >= 1")
        if not 0 < self.min_rto <= self.initial_rto <= self.max_rto:
            raise ValueError("need 0 < min_rto <= initial_rto <= max_rto")


@dataclass
class AckInfo:
    cum: int  # next expected segment
    sacks: tuple[tuple[int, int], ...]  # received [start, end) ranges above cum


class TcpReceiver:
    def __init__(self):
        self.rcv_nxt = 0
        self.ranges: list[list[int]] = []  # sorted, disjoint, all above rcv_nxt
        self.duplicates = 0

    def receive(self, seq: int, count: int) -> AckInfo:
        end = seq + count
        if end <= self.rcv_nxt:
            self.duplicates += count
        else:
            if seq < self.rcv_nxt:
                self.duplicates += self.rcv_nxt - seq
                seq = self.rcv_nxt
            self._insert(seq, end)
            if self.ranges and self.ranges[0][0] <= self.rcv_nxt:
                self.rcv_nxt = self.ranges.pop(0)[1]
        return AckInfo(self.rcv_nxt, tuple((a, b) for a, b in self.ranges))

    def _insert(self, s: int, e: int) -> None:
        r = self.ranges
        i = bisect_left(r, [s, s])
        if i > 0 and r[i - 1][1] >= s:
            i -= 1
        j = i
        while j < len(r) and r[j][0] <= e:
            overlap = min(e, r[j][1]) - max(s, r[j][0])
            if overlap > 0:
                self.duplicates += overlap
            s, e = min(s, r[j][0]), max(e, r[j][1])
            j += 1
        r[i:j] = [[s, e]]


class _DataPath:
    def __init__(self, flow: "TcpFlow"):
        self.flow = flow

    def on_delivered(self, chunk: Chunk, now: int) -> None:
        self.flow._on_data(chunk, now)

    def on_dropped(self, chunk: Chunk, now: int, reason: str) -> None:
        self.flow.stats.dropped_packets += chunk.count


class _AckPath:
    def __init__(self, flow: "TcpFlow"):
        self.flow = flow
        self.dropped = 0

    def on_delivered(self, chunk: Chunk, now: int) -> None:
        self.flow._ack_at_bs(chunk.payload, now)

    def on_dropped(self, chunk: Chunk, now: int, reason: str) -> None:
        self.dropped += chunk.count


class TcpFlow:
    """Bulk transfer from a remote host to the UE behind the stack's BS.

    The sender keeps a per-segment scoreboard (in flight, SACKed, lost,
    retransmitted).  A segment is deemed lost once ``dupthresh`` segments
    above it are SACKed; a lost retransmission is only recovered by the
    retransmission timer.  Acks travel back over the stack's uplink, so
    they share the MAC with the data.
    """

    def __init__(self, stack: LinkStack, cfg: TcpConfig = TcpConfig(),
                 duration: float = 10.0, flow_id: str = "tcp"):
        self.stack = stack
        self.engine = stack.engine
        self.cfg = cfg
        self.mss = cfg.mss
        self.core_ns = seconds_to_ns(stack.cfg.core_delay)
        self.trace = CwndTrace()
        self.cc = CubicState(mss=cfg.mss, cwnd=float(cfg.initial_window * cfg.mss),
                             c=cfg.c, beta=cfg.beta, fast_convergence=cfg.fast_convergence,
                             tcp_friendly=cfg.tcp_friendly, rto=cfg.initial_rto,
                             min_rto=cfg.min_rto, max_rto=cfg.max_rto, trace=self.trace)
        self.stats = FlowStats(flow_id, duration)
        self.receiver = TcpReceiver()
        self.data_path = _DataPath(self)
        self.ack_path = _AckPath(self)

        self._cap = 1 << 14
        self._state = np.zeros(self._cap, dtype=np.uint8)
        self._sent = np.zeros(self._cap, dtype=np.int64)
        self._retx = np.zeros(self._cap, dtype=bool)
        self._base = 0  # sequence number stored at index 0
        self.snd_una = 0
        self.snd_nxt = 0
        self.pipe = 0
        self.n_lost = 0
        self._lost_scan = 0
        self.in_recovery = False
        self.recovery_point = 0
        self.timeouts = 0
        self.fast_recoveries = 0
        self.retransmitted = 0
        self._rto_deadline: int | None = None
        self._rto_event: SimEvent | None = None

    # -- scoreboard storage
    def _ix(self, seq: int) -> int:
        return seq - self._base

    def _ensure(self, upto: int) -> None:
        need = upto - self._base
        if need <= self._cap:
            return
        shift = self.snd_una - self._base
        live = self.snd_nxt - self.snd_una
        cap = self._cap
        while live + (upto - self.snd_nxt) > cap // 2:
            cap *= 2
        for name in ("_state", "_sent", "_retx"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[:live] = old[shift:shift + live]
            setattr(self, name, new)
        self._cap = cap
        self._base = self.snd_una

    # -- sender
    def start(self) -> None:
        self._send(self.engine.now)

    def _send(self, now: int) -> None:
        budget = int(self.cc.cwnd // self.mss) - self.pipe
        if budget <= 0:
            return
        chunks = []
        if self.n_lost:
            lo, hi = self._ix(self.snd_una), self._ix(self.snd_nxt)
            idx = np.flatnonzero(self._state[lo:hi] == LOST)[:budget] + lo
            if idx.size:
                self._state[idx] = RETX
                self._retx[idx] = True
                self._sent[idx] = now
                self.n_lost -= idx.size
                self.pipe += idx.size
                self.retransmitted += idx.size
                budget -= idx.size
                breaks = np.flatnonzero(np.diff(idx) != 1) + 1
                for run in np.split(idx, breaks):
                    chunks.append(Chunk(self.data_path, int(run[0]) + self._base, run.size,
                                        self.mss, created=now))
        if budget > 0:
            self._ensure(self.snd_nxt + budget)
            lo = self._ix(self.snd_nxt)
            self._state[lo:lo + budget] = INFLIGHT
            self._sent[lo:lo + budget] = now
            self._retx[lo:lo + budget] = False
            chunks.append(Chunk(self.data_path, self.snd_nxt, budget, self.mss, created=now))
            self.snd_nxt += budget
            self.pipe += budget
        for c in chunks:
            self.stats.sent_packets += c.count
            self.stats.offered_bits += c.bits
        self.engine.schedule(now + self.core_ns, "core", "data-arrival",
                             lambda ev, chunks=chunks: self._arrive_at_bs(chunks))
        if self._rto_deadline is None:
            self._arm(now)

    def _arrive_at_bs(self, chunks: list[Chunk]) -> None:
        now = self.engine.now
        bs = self.stack.downlink
        for c in chunks:
            bs.queue.offer(c, now)
        self.stack.mac.notify(bs)

    def _mark_delivered(self, lo_seq: int, hi_seq: int) -> tuple[int, int]:
        """Mark [lo, hi) as delivered; return (newly delivered, newest clean send time)."""
        lo, hi = self._ix(lo_seq), self._ix(hi_seq)
        if hi <= lo:
            return 0, -1
        st = self._state[lo:hi]
        fresh = st != SACKED
        n = int(np.count_nonzero(fresh))
        if n == 0:
            return 0, -1
        outstanding = fresh & (st != LOST)
        self.pipe -= int(np.count_nonzero(outstanding))
        self.n_lost -= int(np.count_nonzero(st == LOST))
        clean = fresh & ~self._retx[lo:hi]
        newest = int(self._sent[lo:hi][clean].max()) if clean.any() else -1
        st[fresh] = SACKED
        return n, newest

    def _ack_at_bs(self, ack: AckInfo, now: int) -> None:
        self.engine.schedule(now + self.core_ns, "core", "ack-arrival",
                             lambda ev, ack=ack: self._on_ack(ack))

    def _on_ack(self, ack: AckInfo) -> None:
        now = self.engine.now
        t = ns_to_seconds(now)
        delivered, newest = 0, -1
        advanced = ack.cum > self.snd_una
        if advanced:
            delivered, newest = self._mark_delivered(self.snd_una, min(ack.cum, self.snd_nxt))
            self.snd_una = min(ack.cum, self.snd_nxt)
        for s, e in ack.sacks:
            s, e = max(s, self.snd_una), min(e, self.snd_nxt)
            if e > s:
                n, nw = self._mark_delivered(s, e)
                delivered += n
                newest = max(newest, nw)
        if newest >= 0:
            update_rtt(self.cc, ns_to_seconds(now - newest))
        lost_low = self._detect_losses(ack)
        if self.in_recovery and self.snd_una >= self.recovery_point:
            self.in_recovery = False
        if lost_low is not None and (not self.in_recovery and lost_low >= self.recovery_point):
            self.in_recovery = True
            self.recovery_point = self.snd_nxt
            self.fast_recoveries += 1
            cubic_on_loss(self.cc, t)
        elif delivered and not self.in_recovery:
            cubic_on_ack(self.cc, t, delivered * self.mss)
        if self.snd_una == self.snd_nxt:
            self._rto_deadline = None
        elif advanced:
            self._arm(now)
        self._send(now)

    def _detect_losses(self, ack: AckInfo) -> int | None:
        """Mark in-flight segments with >= dupthresh SACKed segments above them."""
        need = self.cfg.dupthresh
        limit = None
        for s, e in reversed(ack.sacks):
            if e - s >= need:
                limit = e - need
                break
            need -= e - s
        if limit is None:
            return None
        lo = max(self.snd_una, self._lost_scan)
        hi = min(limit, self.snd_nxt)
        if hi <= lo:
            return None
        self._lost_scan = hi
        seg = self._state[self._ix(lo):self._ix(hi)]
        mask = seg == INFLIGHT
        if not mask.any():
            return None
        seg[mask] = LOST
        n = int(np.count_nonzero(mask))
        self.pipe -= n
        self.n_lost += n
        return lo + int(np.argmax(mask))

    # -- retransmission timer
    def _arm(self, now: int) -> None:
        self._rto_deadline = now + seconds_to_ns(self.cc.rto)
        if self._rto_event is None:
            self._rto_event = self.engine.schedule(self._rto_deadline, "tcp", "rto", self._on_timer)

    def _on_timer(self, ev: SimEvent) -> None:
        now = self.engine.now
        self._rto_event = None
        if self._rto_deadline is None:
            return
        if now < self._rto_deadline:
            self._rto_event = self.engine.schedule(self._rto_deadline, "tcp", "rto", self._on_timer)
            return
        self._timeout(now)

    def _timeout(self, now: int) -> None:
        self.timeouts += 1
        cubic_on_timeout(self.cc, ns_to_seconds(now))
        lo, hi = self._ix(self.snd_una), self._ix(self.snd_nxt)
        seg = self._state[lo:hi]
        mask = (seg == INFLIGHT) | (seg == RETX)
        seg[mask] = LOST
        self.n_lost += int(np.count_nonzero(mask))
        self.pipe = 0
        self._lost_scan = self.snd_nxt
        self.in_recovery = False
        self.recovery_point = self.snd_nxt
        self.cc.rto = min(2 * self.cc.rto, self.cc.max_rto)
        self._rto_deadline = None
        self._send(now)
        if self._rto_deadline is None and self.snd_una < self.snd_nxt:
            self._arm(now)

    # -- receiver side
    def _on_data(self, chunk: Chunk, now: int) -> None:
        before = self.receiver.rcv_nxt
        ack = self.receiver.receive(chunk.seq, chunk.count)
        gained = self.receiver.rcv_nxt - before
        s = self.stats
        s.delivered_packets += chunk.count
        s.delay_sum += chunk.count * ns_to_seconds(now - chunk.created)
        s.delivered_bits += gained * self.mss * 8
        ue = self.stack.uplink
        ue.queue.offer(Chunk(self.ack_path, ack.cum, 1, self.cfg.ack_size, now, ack), now)
        self.stack.mac.notify(ue)


def run_tcp_flow(stack: LinkStack, duration: float = 10.0, cfg: TcpConfig = TcpConfig(),
                 flow_id: str = "tcp") -> tuple[FlowStats, CwndTrace, TcpFlow]:
    """Run one bulk transfer for ``duration`` s; ``delivered_bits`` counts in-order bytes."""
    flow = TcpFlow(stack, cfg, duration, flow_id)
    flow.cc._log(0.0, "ack-growth")
    flow.start()
    stack.engine.run_until(seconds_to_ns(duration))
    return flow.stats, flow.trace, flow
