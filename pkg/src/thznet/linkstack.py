"""PHY rate abstraction, queues and the three MAC variants used by the e2e stack.

Packets move through the stack in :class:`Chunk` objects: a run of
consecutive, equally sized packets belonging to one flow.  Chunks split
when a queue or a burst can take only part of them, so a 12 Gbit/s source
does not cost one event per packet.

Every MAC delivers by calling ``chunk.flow.on_delivered(chunk, now_ns)`` and
reports losses through ``chunk.flow.on_dropped(chunk, now_ns, reason)``.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Protocol, Sequence, TextIO

import numpy as np

from .propagation import (DEFAULT_ABSORPTION, AbsorptionTable, LinkConfig, UmiChannelParams,
                          snr_db, thz_model, umi_model)
from .simcore import NS_PER_S, Engine, RngStream, SimEvent, seconds_to_ns

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------- PHY

@dataclass(frozen=True)
class PhyConfig:
    """Radio link plus the SNR-to-rate mapping.

    ``channel`` is ``"thz"`` (spreading + absorption) or ``"umi-los"``
    (UMi street canyon, LOS, no shadowing; ``distance`` is treated as 3D).
    """

    link: LinkConfig
    spectral_efficiency_cap: float = 2.0  # bit/s/Hz
    snr_floor: float = 0.0  # dB
    packet_size: int = 1500  # bytes
    channel: str = "thz"
    absorption: AbsorptionTable = DEFAULT_ABSORPTION
    umi: UmiChannelParams = UmiChannelParams(shadow_sigma_los=0.0, shadow_sigma_nlos=0.0)

    def __post_init__(self):
        if self.spectral_efficiency_cap <= 0:
            raise ValueError("spectral_efficiency_cap must be positive")
        if int(self.packet_size) != self.packet_size or self.packet_size < 1:
            raise ValueError("packet_size must be an integer >= 1")
        if self.channel not in ("thz", "umi-los"):
            raise ValueError(f"unknown channel {self.channel!r}")

    def snr_at(self, distance: float) -> float:
        model = thz_model(self.absorption) if self.channel == "thz" else umi_model(True, self.umi)
        return snr_db(self.link, distance, model, self.link.array_gain_db)

    def rate_at(self, distance: float) -> float:
        return link_rate(self.snr_at(distance), self)


def link_rate(snr: float, phy: PhyConfig) -> float:
    """Capped Shannon rate in bit/s; zero below the outage floor."""
    if snr < phy.snr_floor:
        return 0.0
    efficiency = min(math.log2(1.0 + 10.0 ** (snr / 10.0)), phy.spectral_efficiency_cap)
    return phy.link.bandwidth * efficiency


def airtime_ns(bits: int, rate: float) -> int:
    """Transmission time of ``bits`` at ``rate`` bit/s, rounded up to whole ns."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    return math.ceil(bits * NS_PER_S / rate)


# ---------------------------------------------------------- rotating antenna

@dataclass(frozen=True)
class RotatingAntennaConfig:
    period: float  # s per revolution
    beamwidth: float  # rad
    phase: float = 0.0  # beam azimuth at t = 0, rad

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if not 0 < self.beamwidth <= TWO_PI:
            raise ValueError("beamwidth must lie in (0, 2*pi]")

    @property
    def duty_cycle(self) -> float:
        return self.beamwidth / TWO_PI


def illumination_windows(antenna: RotatingAntennaConfig, ue_angle: float,
                         interval: tuple[float, float]) -> list[tuple[float, float]]:
    """Times (s) within ``interval`` during which the beam covers ``ue_angle``.

    The beam turns at a constant rate; the UE is covered while its azimuth is
    within half a beamwidth of the boresight.
    """
    t0, t1 = interval
    if t1 < t0:
        raise ValueError("interval end precedes start")
    if antenna.beamwidth >= TWO_PI:
        return [(t0, t1)] if t1 > t0 else []
    period = antenna.period
    half = 0.5 * antenna.beamwidth / TWO_PI * period
    centre = ((ue_angle - antenna.phase) % TWO_PI) / TWO_PI * period
    k = math.floor((t0 - centre - half) / period)
    out = []
    while True:
        start, end = centre + k * period - half, centre + k * period + half
        if start >= t1:
            break
        lo, hi = max(start, t0), min(end, t1)
        if hi > lo:
            out.append((lo, hi))
        k += 1
    return out


class Illumination:
    """Integer-ns view of the periodic windows seen by one UE."""

    def __init__(self, antenna: RotatingAntennaConfig, ue_angle: float = 0.0):
        self.antenna = antenna
        self.always = antenna.beamwidth >= TWO_PI
        self.period_ns = seconds_to_ns(antenna.period)
        self.width_ns = seconds_to_ns(antenna.duty_cycle * antenna.period)
        centre = ((ue_angle - antenna.phase) % TWO_PI) / TWO_PI * antenna.period
        self.offset_ns = seconds_to_ns(centre) - self.width_ns // 2

    def window_at(self, t: int) -> tuple[int, int]:
        """The window containing ``t``, or the next one to open."""
        if self.always:
            return t, 2**62
        k = (t - self.offset_ns) // self.period_ns
        start = self.offset_ns + k * self.period_ns
        if t >= start + self.width_ns:
            start += self.period_ns
        return start, start + self.width_ns


# ----------------------------------------------------------------- packets

class FlowSink(Protocol):
    def on_delivered(self, chunk: "Chunk", now: int) -> None: ...

    def on_dropped(self, chunk: "Chunk", now: int, reason: str) -> None: ...


@dataclass(slots=True)
class Chunk:
    """``count`` consecutive packets of ``size`` bytes, sequence numbers from ``seq``."""

    flow: Any
    seq: int
    count: int
    size: int
    created: int = 0  # ns, when the first packet entered the network
    payload: Any = None

    @property
    def bits(self) -> int:
        return self.count * self.size * 8

    def split(self, n: int) -> tuple["Chunk", "Chunk"]:
        head = replace(self, count=n)
        tail = replace(self, seq=self.seq + n, count=self.count - n)
        return head, tail


class DropTailQueue:
    """FIFO of chunks bounded in packets; arrivals beyond capacity are dropped."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = int(capacity)
        self._items: deque[Chunk] = deque()
        self.length = 0
        self.peak = 0
        self.dropped = 0

    def __len__(self) -> int:
        return self.length

    def offer(self, chunk: Chunk, now: int) -> int:
        room = self.capacity - self.length
        if room <= 0:
            self._drop(chunk, now)
            return 0
        if chunk.count > room:
            chunk, rest = chunk.split(room)
            self._drop(rest, now)
        self._items.append(chunk)
        self.length += chunk.count
        self.peak = max(self.peak, self.length)
        return chunk.count

    def _drop(self, chunk: Chunk, now: int) -> None:
        self.dropped += chunk.count
        chunk.flow.on_dropped(chunk, now, "queue")

    def head_size(self) -> int:
        return self._items[0].size if self._items else 0

    def take(self, max_packets: int | None = None, max_bits: int | None = None) -> list[Chunk]:
        """Pop up to ``max_packets`` packets and ``max_bits`` bits from the head."""
        out = []
        packets = self.length if max_packets is None else min(max_packets, self.length)
        bits = max_bits
        while packets > 0 and self._items:
            head = self._items[0]
            n = min(head.count, packets)
            if bits is not None:
                n = min(n, bits // (head.size * 8))
                if n <= 0:
                    break
            if n < head.count:
                head, self._items[0] = head.split(n)
            else:
                self._items.popleft()
            out.append(head)
            self.length -= n
            packets -= n
            if bits is not None:
                bits -= head.bits
        return out


class AckQueue:
    """Holds at most one pending acknowledgement; a newer one replaces it."""

    capacity = 1

    def __init__(self):
        self._item: Chunk | None = None
        self.coalesced = 0

    def __len__(self) -> int:
        return 0 if self._item is None else 1

    @property
    def length(self) -> int:
        return len(self)

    def offer(self, chunk: Chunk, now: int) -> int:
        if self._item is not None:
            self.coalesced += 1
        self._item = chunk
        return 1

    def head_size(self) -> int:
        return self._item.size if self._item else 0

    def take(self, max_packets: int | None = None, max_bits: int | None = None) -> list[Chunk]:
        if self._item is None or max_packets == 0:
            return []
        if max_bits is not None and self._item.bits > max_bits:
            return []
        item, self._item = self._item, None
        return [item]


class Source(Protocol):
    def pull(self, now: int) -> Chunk | None: ...

    def next_arrival(self, now: int) -> int | None: ...


# ----------------------------------------------------------------- stations

class MacVariant(str, Enum):
    CONTENTION = "contention"
    SCHEDULED = "scheduled"
    IDEAL = "ideal"


@dataclass(frozen=True)
class MacConfig:
    variant: MacVariant = MacVariant.CONTENTION
    slot: float = 5e-6  # s: backoff slot (contention) or TTI (scheduled)
    beam_search: float = 0.0  # s per channel access (contention)
    handshake: float = 0.0  # s per channel access (contention)
    sense: float = 0.0  # s of idle channel before an attempt (contention)
    cw_min: int = 16
    cw_max: int = 1024
    max_retries: int = 7
    queue_capacity: int = 1000  # packets
    max_burst: int = 0  # packets per access, 0 = whatever is queued
    deafness: bool = False  # access phase invisible to carrier sense (contention)
    control_overhead: float = 0.0  # fraction of each TTI (scheduled)

    def __post_init__(self):
        object.__setattr__(self, "variant", MacVariant(self.variant))
        for name in ("slot", "beam_search", "handshake", "sense"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.slot <= 0 and self.variant is not MacVariant.IDEAL:
            raise ValueError("slot must be positive")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if not 1 <= self.cw_min <= self.cw_max:
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.max_retries < 0 or self.max_burst < 0:
            raise ValueError("max_retries and max_burst must be >= 0")
        if not 0 <= self.control_overhead < 1:
            raise ValueError("control_overhead must lie in [0, 1)")


IDLE, WAITING, PENDING, ACTIVE = "idle", "waiting", "pending", "active"


@dataclass(eq=False)
class Station:
    """One transmitter: a queue, its lazy sources and the link rate to its peer."""

    name: str
    rate: float  # bit/s
    queue: DropTailQueue | AckQueue
    illumination: Illumination | None = None
    sources: list = field(default_factory=list)
    # MAC bookkeeping
    state: str = IDLE
    retries: int = 0
    cw: int = 1
    collided: bool = False
    wake: SimEvent | None = None
    accesses: int = 0
    collisions: int = 0
    retry_drops: int = 0
    busy_ns: int = 0

    def refresh(self, now: int) -> None:
        for src in self.sources:
            chunk = src.pull(now)
            if chunk is not None:
                self.queue.offer(chunk, now)

    def next_arrival(self, now: int) -> int | None:
        times = [t for t in (s.next_arrival(now) for s in self.sources) if t is not None]
        return min(times) if times else None


def _deliver(chunks: Iterable[Chunk], now: int) -> None:
    for c in chunks:
        c.flow.on_delivered(c, now)


class Mac:
    """Common plumbing: stations, wake-ups for lazy sources, statistics."""

    def __init__(self, engine: Engine, cfg: MacConfig, rng: np.random.Generator | None = None):
        self.engine = engine
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.stations: list[Station] = []

    def add_station(self, station: Station) -> Station:
        station.cw = self.cfg.cw_min
        self.stations.append(station)
        return station

    def notify(self, station: Station) -> None:
        """Tell the MAC that ``station`` has new data or a new source."""
        if station.state == WAITING:
            station.wake.cancel()
            station.wake = None
            station.state = IDLE
        if station.state == IDLE:
            self._kick(station, backoff=False)

    def _wait_for_data(self, st: Station) -> None:
        nxt = st.next_arrival(self.engine.now)
        if nxt is None:
            return
        st.state = WAITING
        st.wake = self.engine.schedule(max(nxt, self.engine.now), st.name, "data-ready",
                                       lambda ev, st=st: self._on_data_ready(st))

    def _on_data_ready(self, st: Station) -> None:
        st.state = IDLE
        st.wake = None
        self._kick(st, backoff=False)

    def _kick(self, st: Station, backoff: bool) -> None:
        raise NotImplementedError


class IdealMac(Mac):
    """Every station sends continuously at its full link rate on its own resource."""

    def _kick(self, st: Station, backoff: bool = False) -> None:
        if st.state != IDLE or st.rate <= 0:
            return
        now = self.engine.now
        st.refresh(now)
        if not len(st.queue):
            self._wait_for_data(st)
            return
        chunks = st.queue.take(self.cfg.max_burst or None)
        duration = airtime_ns(sum(c.bits for c in chunks), st.rate)
        st.state = ACTIVE
        st.accesses += 1
        st.busy_ns += duration
        self.engine.schedule(now + duration, st.name, "burst-done",
                             lambda ev, st=st, chunks=chunks: self._done(st, chunks))

    def _done(self, st: Station, chunks: list[Chunk]) -> None:
        st.state = IDLE
        _deliver(chunks, self.engine.now)
        self._kick(st)


class ContentionMac(Mac):
    """Slotted CSMA with a beam search and a handshake at every channel access.

    All stations share one collision domain.  A station senses the channel
    idle for ``sense``, waits a random number of backoff slots (after a
    deferral, a collision or its own transmission), then starts its access
    on a slot boundary.  Accesses starting in the same slot collide: both
    lose their beam search + handshake time and double their contention
    window; after ``max_retries`` failures the head-of-line burst is dropped.
    With ``deafness`` the access phase itself cannot be sensed (the two ends
    are not yet beam-aligned), so any access starting while another is still
    in its access phase collides with it.  Data bursts are always sensed.
    Stations with an :class:`Illumination` only start accesses that fit,
    including one packet, inside the current window.
    """

    def __init__(self, engine: Engine, cfg: MacConfig, rng: np.random.Generator | None = None):
        super().__init__(engine, cfg, rng)
        self.slot_ns = seconds_to_ns(cfg.slot)
        self.sense_ns = seconds_to_ns(cfg.sense)
        self.setup_ns = seconds_to_ns(cfg.beam_search) + seconds_to_ns(cfg.handshake)
        self.busy_until = 0  # as seen by carrier sense
        self.setup_until = 0  # end of the latest access phase
        self.tx_start = -1
        self.contenders: list[Station] = []
        self.deferrals = 0

    def _align(self, t: int) -> int:
        return -(-t // self.slot_ns) * self.slot_ns

    def _fit_window(self, st: Station, t: int) -> int:
        if st.illumination is None:
            return t
        need = self.setup_ns + airtime_ns(st.queue.head_size() * 8 or 8, st.rate)
        for _ in range(4):
            start, end = st.illumination.window_at(t)
            t = self._align(max(t, start))
            if t + need <= end:
                return t
            t = end
        return t  # window shorter than one access: keep trying at window edges

    def _kick(self, st: Station, backoff: bool) -> None:
        if st.state != IDLE or st.rate <= 0:
            return
        now = self.engine.now
        st.refresh(now)
        if not len(st.queue):
            self._wait_for_data(st)
            return
        busy = self.busy_until > now
        t = max(now, self.busy_until) + self.sense_ns
        if backoff or busy:
            t += int(self.rng.integers(0, st.cw)) * self.slot_ns
        t = self._fit_window(st, self._align(t))
        st.state = PENDING
        self.engine.schedule(t, st.name, "attempt", lambda ev, st=st: self._attempt(st))

    def _attempt(self, st: Station) -> None:
        now = self.engine.now
        overlap = bool(self.contenders) and (
            self.tx_start == now or (self.cfg.deafness and now < self.setup_until))
        if overlap:
            self.setup_until = max(self.setup_until, now + self.setup_ns)
            for other in self.contenders:
                other.collided = True
            st.collided = True
            self.contenders.append(st)
        elif self.busy_until > now:
            self.deferrals += 1
            st.state = IDLE
            self._kick(st, backoff=True)
            return
        else:
            st.collided = False
            self.tx_start = now
            self.contenders = [st]
            self.setup_until = now + self.setup_ns
            if not self.cfg.deafness:
                self.busy_until = self.setup_until
        st.state = ACTIVE
        st.accesses += 1
        st.busy_ns += self.setup_ns
        self.engine.schedule(now + self.setup_ns, st.name, "access-done",
                             lambda ev, st=st: self._access_done(st))

    def _access_done(self, st: Station) -> None:
        now = self.engine.now
        if st.collided:
            st.collisions += 1
            st.retries += 1
            st.cw = min(2 * st.cw, self.cfg.cw_max)
            if st.retries > self.cfg.max_retries:
                lost = st.queue.take(self.cfg.max_burst or None)
                st.retry_drops += sum(c.count for c in lost)
                for c in lost:
                    c.flow.on_dropped(c, now, "retry")
                st.retries = 0
                st.cw = self.cfg.cw_min
            st.state = IDLE
            self._kick(st, backoff=True)
            return
        self.contenders = []
        st.refresh(now)
        max_bits = None
        if st.illumination is not None:
            _, end = st.illumination.window_at(now)
            max_bits = int(max(0, end - now) * st.rate // NS_PER_S)
        chunks = st.queue.take(self.cfg.max_burst or None, max_bits)
        if not chunks:
            self.busy_until = now
            st.state = IDLE
            self._kick(st, backoff=False)
            return
        duration = airtime_ns(sum(c.bits for c in chunks), st.rate)
        self.busy_until = now + duration
        st.busy_ns += duration
        self.engine.schedule(now + duration, st.name, "burst-done",
                             lambda ev, st=st, chunks=chunks: self._burst_done(st, chunks))

    def _burst_done(self, st: Station, chunks: list[Chunk]) -> None:
        st.retries = 0
        st.cw = self.cfg.cw_min
        st.state = IDLE
        _deliver(chunks, self.engine.now)
        self._kick(st, backoff=True)


def round_robin_grants(ues: Sequence[Any], n_slots: int, first_slot: int = 0) -> list[Any]:
    """Owner of each of ``n_slots`` consecutive data slots under plain TDMA."""
    if not ues:
        return []
    return [ues[(first_slot + i) % len(ues)] for i in range(n_slots)]


scheduled_access = round_robin_grants


class ScheduledMac(Mac):
    """Base-station-granted TDMA on a fixed slot grid.

    Downlink stations (``add_station(..., uplink=False)``) share the data
    slots round-robin by absolute slot index.  Each slot loses
    ``control_overhead`` of its airtime.  Uplink stations, which carry
    feedback such as transport acks, get a small grant in every slot and
    their queue is emptied at the end of the slot.
    """

    def __init__(self, engine: Engine, cfg: MacConfig, rng: np.random.Generator | None = None):
        super().__init__(engine, cfg, rng)
        self.slot_ns = seconds_to_ns(cfg.slot)
        self.downlink: list[Station] = []
        self.uplink: list[Station] = []
        self._credit: dict[str, int] = {}
        self._tick_event: SimEvent | None = None

    def add_station(self, station: Station, uplink: bool = False) -> Station:
        super().add_station(station)
        (self.uplink if uplink else self.downlink).append(station)
        self._credit[station.name] = 0
        return station

    def notify(self, station: Station) -> None:
        if self._tick_event is None:
            self._schedule_tick(self.engine.now)

    def _schedule_tick(self, t: int) -> None:
        start = -(-t // self.slot_ns) * self.slot_ns
        self._tick_event = self.engine.schedule(start, "scheduler", "slot", self._tick)

    def _slot_bits(self, st: Station) -> float:
        return st.rate * self.cfg.slot * (1.0 - self.cfg.control_overhead)

    def _tick(self, ev: SimEvent) -> None:
        now = self.engine.now
        self._tick_event = None
        end = now + self.slot_ns
        for st in self.stations:
            st.refresh(now)
        if self.downlink:
            st = self.downlink[(now // self.slot_ns) % len(self.downlink)]
            if st.rate > 0 and len(st.queue):
                budget = self._credit[st.name] + int(self._slot_bits(st))
                chunks = st.queue.take(self.cfg.max_burst or None, budget)
                used = sum(c.bits for c in chunks)
                self._credit[st.name] = budget - used if len(st.queue) else 0
                if chunks:
                    st.accesses += 1
                    st.busy_ns += self.slot_ns
                    self.engine.schedule(end, st.name, "slot-rx",
                                         lambda e, chunks=chunks: _deliver(chunks, self.engine.now))
        for st in self.uplink:
            if st.rate > 0 and len(st.queue):
                chunks = st.queue.take(None, int(self._slot_bits(st)))
                if chunks:
                    st.accesses += 1
                    self.engine.schedule(end, st.name, "slot-rx",
                                         lambda e, chunks=chunks: _deliver(chunks, self.engine.now))
        if self._active(end):
            self._schedule_tick(end)

    def _active(self, t: int) -> bool:
        nxt = None
        for st in self.stations:
            if len(st.queue) and st.rate > 0:
                return True
            a = st.next_arrival(t)
            if a is not None and st.rate > 0:
                nxt = a if nxt is None else min(nxt, a)
        if nxt is not None:
            # Idle until the next arrival: sleep instead of ticking empty slots.
            if nxt > t:
                self._schedule_tick(nxt)
                return False
            return True
        return False

    def _kick(self, st: Station, backoff: bool) -> None:
        self.notify(st)


def make_mac(engine: Engine, cfg: MacConfig, rng: np.random.Generator | None = None) -> Mac:
    cls = {MacVariant.CONTENTION: ContentionMac, MacVariant.SCHEDULED: ScheduledMac,
           MacVariant.IDEAL: IdealMac}[cfg.variant]
    return cls(engine, cfg, rng)


@dataclass(frozen=True)
class StackConfig:
    """One BS-UE pair: radio, MAC, geometry and the core-network delay."""

    phy: PhyConfig
    mac: MacConfig
    distance: float = 1.0  # m
    antenna: RotatingAntennaConfig | None = None
    ue_angle: float = 0.0  # rad
    core_delay: float = 0.005  # s, one way
    label: str = "stack"

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.core_delay < 0:
            raise ValueError("core_delay must be >= 0")


class LinkStack:
    """Engine, MAC and the two stations (BS downlink, UE uplink) of one link.

    The ideal MAC ignores the rotating antenna: it models continuous service.
    """

    def __init__(self, cfg: StackConfig, seed: int = 1, record: bool = False):
        self.cfg = cfg
        self.engine = Engine(record=record)
        self.rate = cfg.phy.rate_at(cfg.distance)
        rng = RngStream(seed, ("mac", cfg.label)).generator()
        self.mac = make_mac(self.engine, cfg.mac, rng)
        illum = None
        if cfg.antenna is not None and cfg.mac.variant is not MacVariant.IDEAL:
            illum = Illumination(cfg.antenna, cfg.ue_angle)
        self.downlink = Station("bs", self.rate, DropTailQueue(cfg.mac.queue_capacity), illum)
        self.uplink = Station("ue", self.rate, AckQueue(), illum)
        if isinstance(self.mac, ScheduledMac):
            self.mac.add_station(self.downlink)
            self.mac.add_station(self.uplink, uplink=True)
        else:
            self.mac.add_station(self.downlink)
            self.mac.add_station(self.uplink)


# ------------------------------------------------------------------- stats

FLOW_STATS_FIELDS = ("flow_id", "offered_bps", "delivered_bps", "drops", "mean_delay_s")


@dataclass
class FlowStats:
    flow_id: str
    duration: float  # s
    offered_bits: int = 0
    delivered_bits: int = 0
    sent_packets: int = 0
    delivered_packets: int = 0
    dropped_packets: int = 0
    delay_sum: float = 0.0  # s, summed over delivered packets

    @property
    def offered_bps(self) -> float:
        return self.offered_bits / self.duration

    @property
    def delivered_bps(self) -> float:
        return self.delivered_bits / self.duration

    @property
    def mean_delay_s(self) -> float:
        return self.delay_sum / self.delivered_packets if self.delivered_packets else float("nan")

    def row(self) -> tuple:
        return (self.flow_id, self.offered_bps, self.delivered_bps, self.dropped_packets,
                self.mean_delay_s)


def write_flow_stats(stats: Iterable[FlowStats], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(FLOW_STATS_FIELDS)
    for s in sorted(stats, key=lambda s: s.flow_id):
        w.writerow([s.flow_id] + [repr(float(v)) if isinstance(v, float) else v for v in s.row()[1:]])
