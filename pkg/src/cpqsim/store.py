"""Quorum-replicated last-write-wins register store.

Each host runs one coordinator.  A coordinator fans every request out to all
``rf`` replicas of the key and completes the client operation as soon as the
number of replies required by the consistency level has arrived; slower
replicas still apply writes afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .core import INITIAL_VALUE, ConsistencyLevel, OpKind, RngStream, SimTime
from .netmodel import NetworkModel
from .simkernel import Kernel

log = logging.getLogger(__name__)


class WriteStamp(NamedTuple):
    ts: SimTime
    writer_seq: int


MIN_STAMP = WriteStamp(-(1 << 62), -1)


def required_acks(level: ConsistencyLevel, rf: int) -> int:
    if rf < 1:
        raise ValueError("replication factor must be at least 1")
    if level is ConsistencyLevel.ONE:
        return 1
    if level is ConsistencyLevel.QUORUM:
        return rf // 2 + 1
    return rf


class StampConflict(AssertionError):
    pass


class Replica:
    """Per-key LWW register map held by one storage node."""

    def __init__(self, node_id: int):
        self.node_id = node_id
        self.state: dict[int, tuple[int, WriteStamp]] = {}

    def apply_write(self, key: int, value_id: int, stamp: WriteStamp) -> bool:
        """Store ``value_id`` if ``stamp`` beats the current one; returns whether it did."""
        current = self.state.get(key)
        if current is not None and current[1] >= stamp:
            if current[1] == stamp and current[0] != value_id:
                raise StampConflict(f"replica {self.node_id} key {key}: stamp {stamp} reused")
            return False
        self.state[key] = (value_id, stamp)
        return True

    def serve_read(self, key: int) -> tuple[int, WriteStamp]:
        return self.state.get(key, (INITIAL_VALUE, MIN_STAMP))


def replica_apply_write(replica: Replica, key: int, value_id: int, stamp: WriteStamp) -> bool:
    return replica.apply_write(key, value_id, stamp)


def replica_serve_read(replica: Replica, key: int) -> tuple[int, WriteStamp]:
    return replica.serve_read(key)


@dataclass
class PendingOp:
    op_id: int
    kind: OpKind
    key: int
    required_acks: int
    on_done: Callable[..., None]
    dispatched_at: SimTime
    stamp: WriteStamp | None = None
    received: list[tuple[int, int, WriteStamp]] = field(default_factory=list)
    completed: bool = False
    result: tuple[int, WriteStamp] | None = None


@dataclass
class LedgerEntry:
    """Coordinator-side record of one operation, for post-hoc protocol checks."""

    op_id: int
    kind: OpKind
    key: int
    dispatched_at: SimTime
    completed_at: SimTime
    stamp: WriteStamp
    value_id: int
    responders: tuple[int, ...]


class ReplicatedStore:
    """Storage nodes plus one coordinator per host, driven by a shared kernel.

    There are ``max(hosts, rf)`` storage nodes; key ``k`` lives on ``rf``
    consecutive nodes starting at ``k mod nodes``.
    """

    def __init__(
        self,
        kernel: Kernel,
        network: NetworkModel,
        rng: RngStream,
        rf: int = 3,
        hosts: int = 6,
        read_repair: str = "none",
        keep_ledger: bool = False,
    ):
        if read_repair not in ("none", "async"):
            raise ValueError(f"read_repair must be 'none' or 'async', not {read_repair!r}")
        if rf < 1 or hosts < 1:
            raise ValueError("rf and hosts must be positive")
        self.kernel = kernel
        self.network = network
        self.rf = rf
        self.hosts = hosts
        self.read_repair = read_repair
        self.replicas = [Replica(i) for i in range(max(hosts, rf))]
        self._net_rng = rng.substream("net")
        self._svc_rng = rng.substream("svc")
        self._hop_rng = rng.substream("hop")
        self._writer_seq = 0
        self._op_seq = 0
        self.ledger: list[LedgerEntry] | None = [] if keep_ledger else None
        self.repairs_sent = 0
        self.messages_in_flight = 0

    def replicas_for(self, key: int) -> list[Replica]:
        n = len(self.replicas)
        return [self.replicas[(key + i) % n] for i in range(self.rf)]

    # Client-facing API: includes the local client-coordinator hop both ways.

    def client_write(self, host: int, key: int, value_id: int, level: ConsistencyLevel,
                     on_done: Callable[[SimTime], None]) -> None:
        """Submit a write; ``on_done(t)`` runs when the response reaches the client."""
        hop = self.network.local_hop.sample(self._hop_rng)
        back = self.network.local_hop.sample(self._hop_rng)

        def deliver(_value_id: int) -> None:
            self.kernel.schedule_in(back, on_done, self.kernel.now() + back)

        self.kernel.schedule_in(hop, self.handle_client_write, host, key, value_id, level, deliver)

    def client_read(self, host: int, key: int, level: ConsistencyLevel,
                    on_done: Callable[[SimTime, int], None]) -> None:
        """Submit a read; ``on_done(t, value_id)`` runs when the response reaches the client."""
        hop = self.network.local_hop.sample(self._hop_rng)
        back = self.network.local_hop.sample(self._hop_rng)

        def deliver(value_id: int) -> None:
            self.kernel.schedule_in(back, on_done, self.kernel.now() + back, value_id)

        self.kernel.schedule_in(hop, self.handle_client_read, host, key, level, deliver)

    # Coordinator side.

    def _next_op(self) -> int:
        self._op_seq += 1
        return self._op_seq

    def _fan_out(self, op: PendingOp, service, on_replica) -> None:
        # All of an operation's samples are drawn at dispatch so the draw
        # order depends only on the order of operations.
        for replica in self.replicas_for(op.key):
            there = self.network.one_way.sample(self._net_rng)
            work = service.sample(self._svc_rng)
            back = self.network.one_way.sample(self._net_rng)
            self.messages_in_flight += 1
            self.kernel.schedule_in(there + work, on_replica, op, replica, back)

    def handle_client_write(self, host: int, key: int, value_id: int, level: ConsistencyLevel,
                            on_done: Callable[[int], None]) -> PendingOp:
        self._writer_seq += 1
        op = PendingOp(
            op_id=self._next_op(), kind=OpKind.WRITE, key=key,
            required_acks=required_acks(level, self.rf), on_done=on_done,
            dispatched_at=self.kernel.now(),
            stamp=WriteStamp(self.kernel.now(), self._writer_seq),
        )
        op.result = (value_id, op.stamp)
        self._fan_out(op, self.network.service.write, self._replica_write)
        return op

    def _replica_write(self, op: PendingOp, replica: Replica, back: int) -> None:
        value_id, stamp = op.result
        replica.apply_write(op.key, value_id, stamp)
        self.kernel.schedule_in(back, self._write_ack, op, replica.node_id)

    def _write_ack(self, op: PendingOp, node_id: int) -> None:
        self.messages_in_flight -= 1
        op.received.append((node_id, op.result[0], op.stamp))
        if not op.completed and len(op.received) == op.required_acks:
            op.completed = True
            self._record(op)
            op.on_done(op.result[0])

    def handle_client_read(self, host: int, key: int, level: ConsistencyLevel,
                           on_done: Callable[[int], None]) -> PendingOp:
        op = PendingOp(
            op_id=self._next_op(), kind=OpKind.READ, key=key,
            required_acks=required_acks(level, self.rf), on_done=on_done,
            dispatched_at=self.kernel.now(),
        )
        self._fan_out(op, self.network.service.read, self._replica_read)
        return op

    def _replica_read(self, op: PendingOp, replica: Replica, back: int) -> None:
        value_id, stamp = replica.serve_read(op.key)
        self.kernel.schedule_in(back, self._read_response, op, replica.node_id, value_id, stamp)

    def _read_response(self, op: PendingOp, node_id: int, value_id: int, stamp: WriteStamp) -> None:
        self.messages_in_flight -= 1
        op.received.append((node_id, value_id, stamp))
        if op.completed:
            if self.read_repair == "async" and stamp < op.result[1]:
                self._repair(op.key, op.result, node_id)
            return
        if len(op.received) < op.required_acks:
            return
        op.completed = True
        _, best_value, best_stamp = max(op.received, key=lambda r: r[2])
        op.result = (best_value, best_stamp)
        if self.read_repair == "async":
            for node, _, s in op.received:
                if s < best_stamp:
                    self._repair(op.key, op.result, node)
        self._record(op)
        op.on_done(best_value)

    def _repair(self, key: int, result: tuple[int, WriteStamp], node_id: int) -> None:
        self.repairs_sent += 1
        there = self.network.one_way.sample(self._net_rng)
        work = self.network.service.write.sample(self._svc_rng)
        replica = self.replicas[node_id]
        self.kernel.schedule_in(there + work, replica.apply_write, key, result[0], result[1])

    def _record(self, op: PendingOp) -> None:
        if self.ledger is None:
            return
        self.ledger.append(LedgerEntry(
            op.op_id, op.kind, op.key, op.dispatched_at, self.kernel.now(),
            op.result[1], op.result[0], tuple(node for node, _, _ in op.received),
        ))

    def converged(self) -> bool:
        """Whether every key's replicas hold identical (value, stamp) pairs."""
        keys = set()
        for r in self.replicas:
            keys.update(r.state)
        for key in keys:
            states = {r.state.get(key) for r in self.replicas_for(key)}
            if len(states) != 1:
                return False
        return True
