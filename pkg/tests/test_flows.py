"""Flow assembly: timeout semantics, canonical direction, determinism."""

import numpy as np

from flowlens.flows import (ACTIVE_TIMEOUT, END_OF_CAPTURE, FIN_RST,
                            IDLE_TIMEOUT, assemble_flows)
from flowlens.pcap import ACK, FIN, RST, SYN
from conftest import tcp_packet, udp_packet


def test_two_packets_one_second_apart_one_flow():
    pkts = [
        udp_packet(0, "10.0.0.1", 1111, "10.0.0.2", 53),
        udp_packet(1_000_000, "10.0.0.1", 1111, "10.0.0.2", 53),
    ]
    flows = assemble_flows(pkts, idle_timeout=15)
    assert len(flows) == 1
    assert len(flows[0].fwd_packets) == 2
    assert flows[0].expiry_reason == END_OF_CAPTURE


def test_idle_timeout_splits_flow():
    pkts = [
        udp_packet(0, "10.0.0.1", 1111, "10.0.0.2", 53),
        udp_packet(20_000_000, "10.0.0.1", 1111, "10.0.0.2", 53),
    ]
    flows = assemble_flows(pkts, idle_timeout=15)
    assert len(flows) == 2
    assert flows[0].expiry_reason == IDLE_TIMEOUT
    assert flows[1].expiry_reason == END_OF_CAPTURE


def test_reply_canonicalization():
    pkts = [
        tcp_packet(0, "10.0.0.1", 1234, "10.0.0.2", 80, flags=SYN),
        tcp_packet(1000, "10.0.0.2", 80, "10.0.0.1", 1234, flags=SYN | ACK),
    ]
    flows = assemble_flows(pkts)
    assert len(flows) == 1
    flow = flows[0]
    assert (flow.key.ip_a, flow.key.port_a) == ("10.0.0.1", 1234)
    assert len(flow.fwd_packets) == 1 and len(flow.bwd_packets) == 1


def test_active_timeout_splits_long_flow():
    pkts = [udp_packet(t * 10_000_000, "1.1.1.1", 1, "2.2.2.2", 2) for t in range(14)]
    flows = assemble_flows(pkts, idle_timeout=15, active_timeout=120)
    assert len(flows) == 2
    assert flows[0].expiry_reason == ACTIVE_TIMEOUT
    # split happens at the first packet past 120 s from the flow start
    assert flows[0].packet_count() == 13
    assert flows[1].packet_count() == 1


def test_fin_both_directions_closes_then_new_flow():
    pkts = [
        tcp_packet(0, "10.1.1.1", 10, "10.1.1.2", 80, flags=SYN),
        tcp_packet(100, "10.1.1.1", 10, "10.1.1.2", 80, flags=FIN | ACK),
        tcp_packet(200, "10.1.1.2", 80, "10.1.1.1", 10, flags=FIN | ACK),
        tcp_packet(300, "10.1.1.1", 10, "10.1.1.2", 80, flags=ACK),  # reopens
    ]
    flows = assemble_flows(pkts)
    assert len(flows) == 2
    assert flows[0].expiry_reason == FIN_RST
    assert flows[0].packet_count() == 3
    assert flows[1].packet_count() == 1


def test_rst_closes_flow():
    pkts = [
        tcp_packet(0, "10.1.1.1", 10, "10.1.1.2", 80, flags=SYN),
        tcp_packet(100, "10.1.1.2", 80, "10.1.1.1", 10, flags=RST),
        tcp_packet(200, "10.1.1.1", 10, "10.1.1.2", 80, flags=SYN),
    ]
    flows = assemble_flows(pkts)
    assert len(flows) == 2
    assert flows[0].expiry_reason == FIN_RST


def test_unordered_input_is_sorted_stably():
    pkts = [
        udp_packet(2_000_000, "10.0.0.1", 1, "10.0.0.2", 2),
        udp_packet(1_000_000, "10.0.0.1", 1, "10.0.0.2", 2),
    ]
    flows = assemble_flows(pkts)
    assert len(flows) == 1
    assert flows[0].first_ts == 1_000_000


def test_direction_partition_and_assignment(simple_tcp_stream):
    flows = assemble_flows(simple_tcp_stream)
    total = sum(f.packet_count() for f in flows)
    assert total == len(simple_tcp_stream)
    for f in flows:
        assert len(f.fwd_packets) + len(f.bwd_packets) == f.packet_count()
        assert f.fwd_packets, "a flow starts with its first forward packet"
        assert f.first_ts <= f.last_ts
        for _, p in f.packets:
            assert f.first_ts <= p.ts <= f.last_ts


def test_random_streams_every_packet_assigned_once():
    rng = np.random.Generator(np.random.PCG64(5))
    pkts = []
    t = 0
    for _ in range(400):
        t += int(rng.integers(0, 3_000_000))
        a = f"10.0.{rng.integers(0, 3)}.{rng.integers(1, 5)}"
        b = f"10.1.{rng.integers(0, 3)}.{rng.integers(1, 5)}"
        pkts.append(udp_packet(t, a, int(rng.integers(1, 5)), b, int(rng.integers(1, 5)),
                               payload=int(rng.integers(0, 100))))
    flows = assemble_flows(pkts, idle_timeout=4)
    assert sum(f.packet_count() for f in flows) == len(pkts)
    assert sum(f.total_ip_bytes() for f in flows) == sum(p.ip_total_len for p in pkts)
    starts = [f.first_ts for f in flows]
    assert starts == sorted(starts)
