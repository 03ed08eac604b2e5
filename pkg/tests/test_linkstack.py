import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thznet.linkstack import (AckQueue, Chunk, ContentionMac, DropTailQueue, FlowStats,
                              IdealMac, Illumination, LinkStack, MacConfig, PhyConfig,
                              RotatingAntennaConfig, ScheduledMac, StackConfig, Station,
                              airtime_ns, illumination_windows, link_rate, round_robin_grants,
                              write_flow_stats)
from thznet.propagation import LinkConfig
from thznet.scenarios import THZ_PHY, stack_config
from thznet.simcore import Engine, seconds_to_ns
from thznet.transport import CbrFlowConfig, run_cbr_flow


class Sink:
    """Flow endpoint that records what the MAC does with its packets."""

    def __init__(self):
        self.delivered = []  # (time_ns, seq, count)
        self.dropped = []  # (time_ns, count, reason)

    def on_delivered(self, chunk, now):
        self.delivered.append((now, chunk.seq, chunk.count))

    def on_dropped(self, chunk, now, reason):
        self.dropped.append((now, chunk.count, reason))

    @property
    def delivered_packets(self):
        return sum(c for _, _, c in self.delivered)


class Backlog:
    """Source holding ``count`` packets that all become available at ``at`` ns."""

    def __init__(self, flow, count, size=1500, at=0):
        self.flow, self.count, self.size, self.at = flow, count, size, at
        self.done = False

    def pull(self, now):
        if self.done or now < self.at:
            return None
        self.done = True
        return Chunk(self.flow, 0, self.count, self.size, created=self.at)

    def next_arrival(self, now):
        return None if self.done else self.at


def station(name, rate, capacity, sink, packets, illum=None):
    st_ = Station(name, rate, DropTailQueue(capacity), illum)
    st_.sources.append(Backlog(sink, packets))
    return st_


# ------------------------------------------------------------------- PHY

def test_link_rate_examples():
    phy = PhyConfig(LinkConfig(1e12, 50e9), spectral_efficiency_cap=2.0, snr_floor=0.0)
    assert link_rate(-0.1, phy) == 0.0
    assert link_rate(0.0, phy) == pytest.approx(50e9)
    assert link_rate(60.0, phy) == pytest.approx(100e9)  # capped at 2 bit/s/Hz
    assert THZ_PHY.rate_at(1.0) >= 12e9


def test_airtime_rounds_up():
    assert airtime_ns(12_000, 12e9) == 1_000
    assert airtime_ns(12_001, 12e9) == 1_001
    with pytest.raises(ValueError):
        airtime_ns(8, 0.0)


# ------------------------------------------------------ rotating antenna

def test_full_beamwidth_covers_everything():
    ant = RotatingAntennaConfig(period=1e-3, beamwidth=2 * math.pi)
    assert illumination_windows(ant, 1.0, (0.0, 0.01)) == [(0.0, 0.01)]
    assert Illumination(ant).window_at(123)[0] == 123


def test_eighth_pi_beam_windows():
    ant = RotatingAntennaConfig(period=1e-3, beamwidth=math.pi / 8)
    assert ant.duty_cycle == pytest.approx(1 / 16)
    wins = illumination_windows(ant, math.pi, (0.0, 0.01))
    assert len(wins) == 10
    for a, b in wins:
        assert b - a == pytest.approx(62.5e-6, abs=1e-12)
    starts = [a for a, _ in wins]
    assert np.allclose(np.diff(starts), 1e-3)
    # the UE at azimuth pi is centred half a revolution in
    assert (wins[0][0] + wins[0][1]) / 2 == pytest.approx(0.5e-3)


@given(st.floats(0.05, 2 * math.pi - 0.05), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_windows_disjoint_and_duty_cycle(beamwidth, angle, phase):
    ant = RotatingAntennaConfig(period=1e-3, beamwidth=beamwidth, phase=phase)
    wins = illumination_windows(ant, angle, (0.0, 0.02))
    for (a0, b0), (a1, b1) in zip(wins, wins[1:]):
        assert b0 <= a1 + 1e-15
    covered = sum(b - a for a, b in wins)
    assert covered == pytest.approx(0.02 * ant.duty_cycle, abs=2 * 1e-3 * ant.duty_cycle + 1e-12)


def test_integer_illumination_matches_float_windows():
    ant = RotatingAntennaConfig(period=1e-3, beamwidth=math.pi / 8)
    ill = Illumination(ant, math.pi)
    start, end = ill.window_at(0)
    assert (start, end) == (seconds_to_ns(0.5e-3 - 31.25e-6), seconds_to_ns(0.5e-3 + 31.25e-6))
    assert ill.window_at(end) == (start + 1_000_000, end + 1_000_000)


def test_antenna_validation():
    with pytest.raises(ValueError):
        RotatingAntennaConfig(period=0, beamwidth=1)
    with pytest.raises(ValueError):
        RotatingAntennaConfig(period=1, beamwidth=7)


# ----------------------------------------------------------------- queues

def test_drop_tail_queue_splits_and_drops():
    sink = Sink()
    q = DropTailQueue(10)
    assert q.offer(Chunk(sink, 0, 6, 100), 0) == 6
    assert q.offer(Chunk(sink, 6, 6, 100), 5) == 4
    assert len(q) == 10 and q.peak == 10 and q.dropped == 2
    assert sink.dropped == [(5, 2, "queue")]
    out = q.take(max_packets=7)
    assert [(c.seq, c.count) for c in out] == [(0, 6), (6, 1)]
    out = q.take(max_bits=2 * 800 + 5)
    assert [(c.seq, c.count) for c in out] == [(7, 2)]
    assert len(q) == 1


def test_ack_queue_coalesces():
    q = AckQueue()
    sink = Sink()
    q.offer(Chunk(sink, 1, 1, 64, payload="a"), 0)
    q.offer(Chunk(sink, 2, 1, 64, payload="b"), 1)
    assert q.coalesced == 1
    assert [c.payload for c in q.take()] == ["b"]
    assert q.take() == []


def test_mac_config_validation():
    for kw in (dict(slot=0), dict(queue_capacity=0), dict(cw_min=0), dict(cw_min=8, cw_max=4),
               dict(max_retries=-1), dict(control_overhead=1.0), dict(beam_search=-1)):
        with pytest.raises(ValueError):
            MacConfig(**kw)
    assert MacConfig(variant="ideal", slot=0).variant.value == "ideal"


# ------------------------------------------------------------- contention

def test_single_sender_delay():
    cfg = MacConfig(slot=5e-6, beam_search=1e-3, handshake=10e-6, sense=0.0)
    eng = Engine()
    mac = ContentionMac(eng, cfg)
    sink = Sink()
    bs = mac.add_station(station("bs", 10e9, 100, sink, 10))
    mac.notify(bs)
    eng.run_until(seconds_to_ns(1.0))
    payload_ns = airtime_ns(10 * 1500 * 8, 10e9)
    assert sink.delivered == [(1_000_000 + 10_000 + payload_ns, 0, 10)]
    assert bs.collisions == 0


def test_two_senders_in_same_slot_collide_and_back_off():
    cfg = MacConfig(slot=5e-6, beam_search=0.0, handshake=10e-6, sense=0.0, cw_min=16)
    eng = Engine(record=True)
    mac = ContentionMac(eng, cfg, np.random.default_rng(1))
    sinks = [Sink(), Sink()]
    sts = [mac.add_station(station(n, 10e9, 100, s, 5)) for n, s in zip("ab", sinks)]
    for s in sts:
        mac.notify(s)
    eng.run_until(seconds_to_ns(0.01))
    assert all(s.collisions >= 1 for s in sts)
    assert all(s.cw >= 16 for s in sts)
    attempts = [t for t, _, kind in eng.trace if kind == "attempt"]
    assert attempts[:2] == [0, 0]
    assert all(t > 0 for t in attempts[2:])
    assert all(k.delivered_packets == 5 for k in sinks)


def test_retry_limit_drops_head_of_line():
    # deaf access phases with a one-slot window always collide
    cfg = MacConfig(slot=5e-6, beam_search=1e-3, handshake=0.0, cw_min=1, cw_max=1,
                    max_retries=2, deafness=True, max_burst=4)
    eng = Engine()
    mac = ContentionMac(eng, cfg, np.random.default_rng(0))
    sinks = [Sink(), Sink()]
    sts = [mac.add_station(station(n, 10e9, 100, s, 8)) for n, s in zip("ab", sinks)]
    for s in sts:
        mac.notify(s)
    eng.run_until(seconds_to_ns(0.02))
    for s, k in zip(sts, sinks):
        assert s.retry_drops == 8
        assert [c for _, c, _ in k.dropped] == [4, 4]
        assert all(r == "retry" for _, _, r in k.dropped)
        assert k.delivered == []


def test_contention_respects_illumination():
    ant = RotatingAntennaConfig(period=1e-3, beamwidth=math.pi / 2)
    ill = Illumination(ant, math.pi)
    cfg = MacConfig(slot=1e-6, handshake=2e-6, sense=1e-6)
    eng = Engine()
    mac = ContentionMac(eng, cfg)
    sink = Sink()
    bs = mac.add_station(station("bs", 12e9, 10_000, sink, 5000, ill))
    mac.notify(bs)
    eng.run_until(seconds_to_ns(0.05))
    assert sink.delivered_packets == 5000
    for t, _, _ in sink.delivered:
        start, end = ill.window_at(t - 1)
        assert start < t <= end


# -------------------------------------------------------- scheduled, ideal

def test_round_robin_grants():
    assert round_robin_grants(["a", "b", "c"], 7) == list("abcabca")
    assert round_robin_grants(["a", "b"], 3, first_slot=1) == list("bab")
    assert round_robin_grants([], 3) == []


def test_scheduled_is_fair_between_saturated_stations():
    cfg = MacConfig(variant="scheduled", slot=125e-6)
    eng = Engine()
    mac = ScheduledMac(eng, cfg)
    sinks = [Sink() for _ in range(3)]
    for i, s in enumerate(sinks):
        mac.add_station(station(f"s{i}", 1e9, 10**6, s, 10**6))
    for st_ in mac.stations:
        mac.notify(st_)
    eng.run_until(seconds_to_ns(0.03))
    counts = [s.delivered_packets for s in sinks]
    per_slot = 1e9 * 125e-6 / 12_000
    assert max(counts) - min(counts) <= math.ceil(per_slot)
    assert min(counts) > 0


def _saturated_throughput(mac_cls, cfg, seconds=0.02, rate=1e9):
    # bursts of at most 100 packets (1.2 ms) so the run is many bursts long
    cfg = MacConfig(**{**cfg.__dict__, "max_burst": cfg.max_burst or 100})
    eng = Engine()
    mac = mac_cls(eng, cfg)
    sink = Sink()
    bs = mac.add_station(station("bs", rate, 10**6, sink, 10**6))
    mac.notify(bs)
    eng.run_until(seconds_to_ns(seconds))
    return sink.delivered_packets * 12_000 / seconds


def test_single_station_scheduled_matches_ideal():
    one_burst = 100 * 12_000 / 0.2  # bit/s lost if the last burst is still on the air
    ideal = _saturated_throughput(IdealMac, MacConfig(variant="ideal"), seconds=0.2)
    sched = _saturated_throughput(ScheduledMac, MacConfig(variant="scheduled", slot=125e-6),
                                  seconds=0.2)
    assert 1e9 - one_burst <= ideal <= 1e9
    assert sched == pytest.approx(1e9, abs=one_burst)
    over = _saturated_throughput(ScheduledMac, MacConfig(variant="scheduled", slot=125e-6,
                                                          control_overhead=2 / 14), seconds=0.2)
    assert over == pytest.approx(1e9 * 12 / 14, abs=one_burst)


def test_mac_ordering_ideal_scheduled_contention():
    ideal = _saturated_throughput(IdealMac, MacConfig(variant="ideal"))
    sched = _saturated_throughput(ScheduledMac, MacConfig(variant="scheduled", slot=125e-6,
                                                          control_overhead=2 / 14))
    cont = _saturated_throughput(ContentionMac, MacConfig(beam_search=1e-3, handshake=10e-6,
                                                          sense=5e-6))
    assert ideal >= sched >= cont > 0


def _small_stack(variant, rate_gbps, capacity=200, **mac_kw):
    phy = PhyConfig(LinkConfig(1e12, 0.5e9), spectral_efficiency_cap=2.0)  # 1 Gbit/s at 1 m
    mac = MacConfig(variant=variant, queue_capacity=capacity, **mac_kw)
    return LinkStack(StackConfig(phy, mac, distance=1.0, label=variant)), rate_gbps * 1e9


@pytest.mark.parametrize("offered", [0.3, 0.9, 2.0])
def test_ideal_delivers_min_of_offered_and_rate(offered):
    stack, r = _small_stack("ideal", offered)
    assert stack.rate == pytest.approx(1e9)
    stats = run_cbr_flow(CbrFlowConfig(r), stack, 0.05)
    # at most one queue's worth (the burst on the air at the end) is missing
    slack = 200 * 12_000 / 0.05
    assert min(r, stack.rate) - slack <= stats.delivered_bps <= min(r, stack.rate) * 1.001


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["ideal", "scheduled", "contention"]), st.floats(0.1, 3.0),
       st.integers(5, 300))
def test_packet_conservation_and_queue_bound(variant, offered, capacity):
    kw = dict(slot=125e-6) if variant == "scheduled" else {}
    if variant == "contention":
        kw = dict(slot=5e-6, beam_search=50e-6, handshake=5e-6, sense=5e-6)
    stack, r = _small_stack(variant, offered, capacity, **kw)
    stats = run_cbr_flow(CbrFlowConfig(r), stack, 0.02)
    q = stack.downlink.queue
    assert q.peak <= capacity
    assert stats.delivered_packets + stats.dropped_packets <= stats.sent_packets
    in_flight = stats.sent_packets - stats.delivered_packets - stats.dropped_packets - len(q)
    assert 0 <= in_flight <= max(capacity, 1)
    # work conservation: a backlogged ideal link never idles
    if variant == "ideal" and r > stack.rate * 1.05:
        assert stats.delivered_bps >= stack.rate - (capacity + 1) * 12_000 / 0.02


def test_outage_counts_offered_but_delivers_nothing():
    stack = LinkStack(stack_config("thz-rotating", distance=20.0))
    assert stack.rate == 0.0
    stats = run_cbr_flow(CbrFlowConfig(4e9), stack, 0.01)
    assert stats.delivered_bits == 0
    assert stats.offered_bps == pytest.approx(4e9, rel=1e-3)


def test_flow_stats_csv():
    a = FlowStats("b", 2.0, offered_bits=4, delivered_bits=2, delivered_packets=1, delay_sum=0.5)
    b = FlowStats("a", 1.0)
    buf = io.StringIO()
    write_flow_stats([a, b], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "flow_id,offered_bps,delivered_bps,drops,mean_delay_s"
    assert lines[1] == "a,0.0,0.0,0,nan"
    assert lines[2] == "b,2.0,1.0,0,0.5"
