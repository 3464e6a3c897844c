"""Bidirectional flow assembly with idle/active timeout semantics.

A flow groups packets sharing a canonicalized 5-tuple. Endpoint A is the
source of the flow's first packet; a packet is forward iff its source equals
endpoint A. Assembly is a sequential state machine over a time-ordered packet
stream; emitted flows are re-ordered by first timestamp so output is
deterministic regardless of expiry order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .pcap import FIN, PROTO_TCP, RST, PacketRecord

IDLE_TIMEOUT = "idle_timeout"
ACTIVE_TIMEOUT = "active_timeout"
END_OF_CAPTURE = "end_of_capture"
FIN_RST = "fin_rst"

# Exporter-style defaults, in seconds. Configurable everywhere they are used.
DEFAULT_IDLE_TIMEOUT = 15.0
DEFAULT_ACTIVE_TIMEOUT = 120.0
DEFAULT_ACTIVITY_TIMEOUT = 5.0


class FlowPacket(NamedTuple):
    ts: int
    ip_total_len: int
    payload_len: int
    header_len: int
    tcp_flags: int
    tcp_window: int
    ttl: int


@dataclass(frozen=True)
class FlowKey:
    ip_a: str
    port_a: int
    ip_b: str
    port_b: int
    protocol: int

    def flow_id(self) -> str:
        return f"{self.ip_a}:{self.port_a}-{self.ip_b}:{self.port_b}-{self.protocol}"


@dataclass
class FlowRecord:
    key: FlowKey
    first_ts: int
    last_ts: int
    # (is_forward, packet) in arrival order; fwd/bwd views derive from this.
    packets: list[tuple[bool, FlowPacket]] = field(default_factory=list)
    expiry_reason: str = END_OF_CAPTURE

    @property
    def fwd_packets(self) -> list[FlowPacket]:
        return [p for fwd, p in self.packets if fwd]

    @property
    def bwd_packets(self) -> list[FlowPacket]:
        return [p for fwd, p in self.packets if not fwd]

    def packet_count(self) -> int:
        return len(self.packets)

    def total_ip_bytes(self) -> int:
        return sum(p.ip_total_len for _, p in self.packets)


def _undirected(pkt: PacketRecord) -> tuple:
    a = (pkt.src_ip, pkt.src_port)
    b = (pkt.dst_ip, pkt.dst_port)
    return (min(a, b), max(a, b), pkt.protocol)


@dataclass
class _FlowState:
    record: FlowRecord
    seq: int
    fin_fwd: bool = False
    fin_bwd: bool = False
    closed: bool = False

    def add(self, pkt: PacketRecord):
        forward = (pkt.src_ip, pkt.src_port) == (self.record.key.ip_a, self.record.key.port_a)
        fp = FlowPacket(
            pkt.ts_micros,
            pkt.ip_total_len,
            pkt.payload_len,
            pkt.l4_header_len,
            pkt.tcp_flags,
            pkt.tcp_window,
            pkt.ttl,
        )
        self.record.packets.append((forward, fp))
        self.record.last_ts = max(self.record.last_ts, pkt.ts_micros)
        if pkt.protocol == PROTO_TCP:
            if pkt.tcp_flags & RST:
                self.closed = True
            if pkt.tcp_flags & FIN:
                if forward:
                    self.fin_fwd = True
                else:
                    self.fin_bwd = True
                if self.fin_fwd and self.fin_bwd:
                    self.closed = True


def assemble_flows(
    packets: Iterable[PacketRecord],
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
    active_timeout: float = DEFAULT_ACTIVE_TIMEOUT,
) -> list[FlowRecord]:
    """Group packets into bidirectional flows, expiring on timeouts.

    Timeouts are in seconds. A same-key packet arriving after the idle gap or
    the active lifetime opens a new flow; TCP flows also close after FIN in
    both directions or any RST. Remaining flows expire at end of capture.
    """
    idle_us = int(idle_timeout * 1_000_000)
    active_us = int(active_timeout * 1_000_000)

    ordered = list(packets)
    if any(ordered[i].ts_micros > ordered[i + 1].ts_micros for i in range(len(ordered) - 1)):
        ordered.sort(key=lambda p: p.ts_micros)  # stable: preserves file order on ties

    table: dict[tuple, _FlowState] = {}
    done: list[_FlowState] = []

    for pkt in ordered:
        lk = _undirected(pkt)
        state = table.get(lk)
        if state is not None:
            reason = None
            if state.closed:
                reason = FIN_RST
            elif pkt.ts_micros - state.record.last_ts > idle_us:
                reason = IDLE_TIMEOUT
            elif pkt.ts_micros - state.record.first_ts > active_us:
                reason = ACTIVE_TIMEOUT
            if reason is not None:
                state.record.expiry_reason = reason
                done.append(state)
                del table[lk]
                state = None
        if state is None:
            key = FlowKey(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.protocol)
            record = FlowRecord(key=key, first_ts=pkt.ts_micros, last_ts=pkt.ts_micros)
            state = _FlowState(record=record, seq=len(done) + len(table))
            table[lk] = state
        state.add(pkt)

    for state in table.values():
        state.record.expiry_reason = FIN_RST if state.closed else END_OF_CAPTURE
        done.append(state)

    done.sort(key=lambda st: (st.record.first_ts, st.seq))
    return [st.record for st in done]
