"""YCSB-style load and transaction phases driving the simulated store."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .core import ConsistencyLevel, OperationRecord, OpKind, RngStream, SimTime, Trace
from .netmodel import NetworkModel, default_network
from .policy import PolicySpec, apply_delay_accounting, select
from .simkernel import Kernel
from .store import ReplicatedStore

log = logging.getLogger(__name__)

DEFAULT_THETA = 0.99


class KeyDistribution:
    n: int

    def sample(self, rng: RngStream) -> int:
        raise NotImplementedError

    def note_insert(self, key: int) -> None:
        pass


@dataclass
class Uniform(KeyDistribution):
    n: int

    def sample(self, rng: RngStream) -> int:
        return rng.randrange(self.n)


@dataclass
class Zipfian(KeyDistribution):
    """YCSB's zipfian generator (Gray et al.); key 0 is the most popular."""

    n: int
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("zipfian needs n >= 1")
        if not 0 < self.theta < 1:
            raise ValueError("zipfian theta must lie in (0, 1)")
        theta = self.theta
        self._zetan = math.fsum(1.0 / (i ** theta) for i in range(1, self.n + 1))
        zeta2 = 1.0 + 0.5 ** theta
        self._alpha = 1.0 / (1.0 - theta)
        self._half_pow = 0.5 ** theta
        if self.n > 1:
            self._eta = (1.0 - (2.0 / self.n) ** (1.0 - theta)) / (1.0 - zeta2 / self._zetan)
        else:
            self._eta = 0.0

    def sample(self, rng: RngStream) -> int:
        u = rng.random()
        uz = u * self._zetan
        if uz < 1.0 or self.n == 1:
            return 0
        if uz < 1.0 + self._half_pow:
            return 1
        rank = int(self.n * (self._eta * u - self._eta + 1.0) ** self._alpha)
        return min(rank, self.n - 1)


@dataclass
class Latest(KeyDistribution):
    """Zipfian over recency: rank 0 is the most recently inserted key."""

    n: int = 1000
    theta: float = DEFAULT_THETA
    newest: int = field(init=False)

    def __post_init__(self):
        self._zipf = Zipfian(self.n, self.theta)
        # Keys are inserted in index order, so after a full load the highest index is newest.
        self.newest = self.n - 1

    def note_insert(self, key: int) -> None:
        self.newest = key

    def sample(self, rng: RngStream) -> int:
        inserted = self.newest + 1
        rank = self._zipf.sample(rng)
        if rank >= inserted:
            rank %= inserted
        return self.newest - rank


@dataclass
class Hotspot(KeyDistribution):
    """``hot_op_fraction`` of samples fall uniformly on the first ``ceil(hot_fraction*n)`` keys."""

    n: int = 10000
    hot_fraction: float = 0.2
    hot_op_fraction: float = 0.8

    def __post_init__(self):
        if not (0 < self.hot_fraction <= 1 and 0 <= self.hot_op_fraction <= 1):
            raise ValueError("hotspot fractions out of range")
        self.hot_n = math.ceil(self.hot_fraction * self.n)

    def sample(self, rng: RngStream) -> int:
        cold_n = self.n - self.hot_n
        if rng.random() < self.hot_op_fraction or cold_n == 0:
            return rng.randrange(self.hot_n)
        return self.hot_n + rng.randrange(cold_n)


def make_distribution(name: str, keyspace: int, theta: float = DEFAULT_THETA,
                      hot_fraction: float = 0.2, hot_op_fraction: float = 0.8) -> KeyDistribution:
    if keyspace < 1:
        raise ValueError("keyspace must be positive")
    if name == "uniform":
        return Uniform(keyspace)
    if name == "zipfian":
        return Zipfian(keyspace, theta)
    if name == "latest":
        return Latest(keyspace, theta)
    if name == "hotspot":
        return Hotspot(keyspace, hot_fraction, hot_op_fraction)
    raise ValueError(f"unknown key distribution {name!r}")


def next_key(dist: KeyDistribution, rng: RngStream) -> int:
    return dist.sample(rng)


def next_op_kind(rng: RngStream, read_fraction: float) -> OpKind:
    return OpKind.READ if rng.random() < read_fraction else OpKind.WRITE


@dataclass
class WorkloadConfig:
    read_fraction: float = 0.8
    value_size_bytes: int = 128
    clients: int = 128
    target_ops_per_host_per_s: float = 1000.0
    duration_s: float = 10.0
    distribution: str = "latest"
    keyspace: int = 1000
    theta: float = DEFAULT_THETA
    hot_fraction: float = 0.2
    hot_op_fraction: float = 0.8
    clock_skew_bound_us: int = 0

    def __post_init__(self):
        if not 0.0 <= self.read_fraction <= 1.0:
            raise ValueError("read_fraction must lie in [0, 1]")
        if self.clients < 1 or self.target_ops_per_host_per_s <= 0 or self.keyspace < 0:
            raise ValueError("clients, target rate and keyspace must be positive")
        if self.duration_s < 0 or self.clock_skew_bound_us < 0:
            raise ValueError("duration and skew bound must be non-negative")


class ClientLoop:
    """A closed-loop client: at most one outstanding operation."""

    __slots__ = ("client_id", "host", "interval", "phase", "issued", "skew", "busy")

    def __init__(self, client_id: int, host: int, interval: float, phase: float, skew: int):
        self.client_id = client_id
        self.host = host
        self.interval = interval
        self.phase = phase
        self.issued = 0
        self.skew = skew
        self.busy = False


class Simulation:
    """One simulated cluster plus its clients; produces a :class:`Trace`."""

    def __init__(
        self,
        workload: WorkloadConfig,
        policy: PolicySpec,
        *,
        seed: int = 42,
        hosts: int = 2,
        rf: int = 3,
        network: NetworkModel | None = None,
        read_repair: str = "none",
        keep_ledger: bool = False,
    ):
        self.workload = workload
        self.policy = policy
        self.seed = seed
        self.hosts = hosts
        self.kernel = Kernel()
        root = RngStream(seed, "sim")
        self.store = ReplicatedStore(
            self.kernel, network or default_network(), root.substream("store"),
            rf=rf, hosts=hosts, read_repair=read_repair, keep_ledger=keep_ledger,
        )
        self._key_rng = root.substream("keys")
        self._kind_rng = root.substream("kinds")
        self._policy_rng = root.substream("policy")
        self._phase_rng = root.substream("phase")
        skew_rng = root.substream("skew")
        self.keys = make_distribution(
            workload.distribution, max(workload.keyspace, 1), workload.theta,
            workload.hot_fraction, workload.hot_op_fraction,
        )
        bound = workload.clock_skew_bound_us
        per_host = [0] * hosts
        for c in range(workload.clients):
            per_host[c % hosts] += 1
        self.clients = []
        for c in range(workload.clients):
            host = c % hosts
            interval = per_host[host] * 1e6 / workload.target_ops_per_host_per_s
            skew = skew_rng.randint(-bound, bound) if bound else 0
            self.clients.append(ClientLoop(c, host, interval, 0.0, skew))
        self.trace = Trace()
        self._next_op_id = 0
        self._next_value = 1
        self.load_ops = 0
        self.txn_start: SimTime = 0
        self.txn_end: SimTime = 0

    # Bookkeeping shared by both phases.

    def _new_op_id(self) -> int:
        op_id = self._next_op_id
        self._next_op_id += 1
        return op_id

    def _new_value(self) -> int:
        value = self._next_value
        self._next_value += 1
        return value

    def _record(self, client: ClientLoop, op_id: int, key: int, kind: OpKind, value_id: int,
                invoke: SimTime, response: SimTime, level: ConsistencyLevel, pre: int, post: int) -> None:
        self.trace.append(OperationRecord(
            op_id, client.client_id, key, kind, value_id,
            invoke + client.skew, response + client.skew, level, pre, post,
        ))

    # Load phase.

    def run_load_phase(self) -> list[OperationRecord]:
        """Write every key once at level ONE and wait for the replicas to quiesce."""
        for client in self.clients:
            if client.client_id < self.workload.keyspace:
                self._load_next(client, client.client_id)
        self.kernel.run()
        self.trace.records.sort(key=lambda r: r.op_id)
        self.load_ops = len(self.trace)
        return list(self.trace.records)

    def _load_next(self, client: ClientLoop, key: int) -> None:
        op_id = self._new_op_id()
        value = self._new_value()
        start = self.kernel.now()
        self.keys.note_insert(key)

        def done(t: SimTime) -> None:
            self._record(client, op_id, key, OpKind.WRITE, value, start, t, ConsistencyLevel.ONE, 0, 0)
            following = key + len(self.clients)
            if following < self.workload.keyspace:
                self._load_next(client, following)

        self.store.client_write(client.host, key, value, ConsistencyLevel.ONE, done)

    # Transaction phase.

    def run_transaction_phase(self) -> list[OperationRecord]:
        self.txn_start = self.kernel.now()
        self.txn_end = self.txn_start + round(self.workload.duration_s * 1e6)
        first = len(self.trace)
        for client in self.clients:
            client.phase = self._phase_rng.random() * client.interval
            at = self.txn_start + round(client.phase)
            if at < self.txn_end:
                self.kernel.schedule(at, self._dispatch, client)
        self.kernel.run()
        txn = self.trace.records[first:]
        txn.sort(key=lambda r: r.op_id)
        self.trace.records[first:] = txn
        return txn

    def _dispatch(self, client: ClientLoop) -> None:
        now = self.kernel.now()
        if now >= self.txn_end:
            return
        client.busy = True
        client.issued += 1
        kind = next_op_kind(self._kind_rng, self.workload.read_fraction)
        key = self.keys.sample(self._key_rng)
        decision = select(self.policy, kind, self._policy_rng)
        op_id = self._new_op_id()
        if kind is OpKind.WRITE:
            value = self._new_value()
            submit = (self._submit_write, client, op_id, key, value, decision, now)
        else:
            submit = (self._submit_read, client, op_id, key, decision, now)
        if decision.pre_delay_us:
            self.kernel.schedule_in(decision.pre_delay_us, *submit)
        else:
            submit[0](*submit[1:])

    def _submit_write(self, client, op_id, key, value, decision, dispatched) -> None:
        self.store.client_write(
            client.host, key, value, decision.level,
            lambda t: self._finish(client, op_id, key, OpKind.WRITE, value, decision, dispatched, t),
        )

    def _submit_read(self, client, op_id, key, decision, dispatched) -> None:
        self.store.client_read(
            client.host, key, decision.level,
            lambda t, value: self._finish(client, op_id, key, OpKind.READ, value, decision, dispatched, t),
        )

    def _finish(self, client, op_id, key, kind, value, decision, dispatched, store_done) -> None:
        invoke, response = apply_delay_accounting(decision, dispatched, store_done)
        if response > store_done:
            self.kernel.schedule(response, self._complete, client, op_id, key, kind, value, decision, invoke, response)
        else:
            self._complete(client, op_id, key, kind, value, decision, invoke, response)

    def _complete(self, client, op_id, key, kind, value, decision, invoke, response) -> None:
        self._record(client, op_id, key, kind, value, invoke, response,
                     decision.level, decision.pre_delay_us, decision.post_delay_us)
        client.busy = False
        # Fixed-interval schedule with catch-up: lateness never shifts later slots.
        slot = self.txn_start + round(client.phase + client.issued * client.interval)
        at = max(slot, self.kernel.now())
        if at < self.txn_end:
            self.kernel.schedule(at, self._dispatch, client)

    def run(self) -> Trace:
        self.run_load_phase()
        self.run_transaction_phase()
        md = self.trace.metadata
        md["seed"] = str(self.seed)
        md["hosts"] = str(self.hosts)
        md["clients"] = str(len(self.clients))
        md["load_ops"] = str(self.load_ops)
        md["txn_start_us"] = str(self.txn_start)
        md["duration_us"] = str(self.txn_end - self.txn_start)
        md["target_ops_per_s"] = f"{self.workload.target_ops_per_host_per_s * self.hosts:g}"
        return self.trace


def run_load_phase(sim: Simulation) -> list[OperationRecord]:
    return sim.run_load_phase()


def run_transaction_phase(sim: Simulation) -> list[OperationRecord]:
    return sim.run_transaction_phase()
