"""Per-operation consistency level selection and client-side delay injection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .core import ConsistencyLevel, OpKind, RngStream, SimTime

ONE = ConsistencyLevel.ONE
QUORUM = ConsistencyLevel.QUORUM


@dataclass(frozen=True)
class Fixed:
    read_level: ConsistencyLevel = ONE
    write_level: ConsistencyLevel = ONE

    @property
    def label(self) -> str:
        short = {ONE: "ONE", QUORUM: "QUO", ConsistencyLevel.ALL: "ALL"}
        return f"{short[self.read_level]}-{short[self.write_level]}"


@dataclass(frozen=True)
class CPQ:
    """Continuous partial quorums: ``high`` with probability ``p``, else ``low``.

    The same rule applies to reads and writes, with an independent draw per
    operation.
    """

    p: float
    low: ConsistencyLevel = ONE
    high: ConsistencyLevel = QUORUM

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"CPQ probability must lie in [0, 1], got {self.p}")
        if self.low is self.high:
            raise ValueError("CPQ needs two distinct levels")

    @property
    def label(self) -> str:
        return f"CPQ(p={self.p:g})"


@dataclass(frozen=True)
class AD:
    """Artificial delays: wait before each read and/or after each write."""

    read_pre_delay_us: int = 0
    write_post_delay_us: int = 0
    read_level: ConsistencyLevel = ONE
    write_level: ConsistencyLevel = ONE

    def __post_init__(self):
        if self.read_pre_delay_us < 0 or self.write_post_delay_us < 0:
            raise ValueError("artificial delays must be non-negative")

    @property
    def label(self) -> str:
        return f"AD(r={self.read_pre_delay_us / 1000:g}ms,w={self.write_post_delay_us / 1000:g}ms)"


PolicySpec = Union[Fixed, CPQ, AD]


@dataclass(frozen=True, slots=True)
class Decision:
    level: ConsistencyLevel
    pre_delay_us: int = 0
    post_delay_us: int = 0


def select(policy: PolicySpec, kind: OpKind, rng: RngStream) -> Decision:
    is_read = kind is OpKind.READ
    if isinstance(policy, Fixed):
        return Decision(policy.read_level if is_read else policy.write_level)
    if isinstance(policy, CPQ):
        # Always draw, so the stream position never depends on p.
        return Decision(policy.high if rng.random() < policy.p else policy.low)
    if isinstance(policy, AD):
        if is_read:
            return Decision(policy.read_level, pre_delay_us=policy.read_pre_delay_us)
        return Decision(policy.write_level, post_delay_us=policy.write_post_delay_us)
    raise TypeError(f"unknown policy {policy!r}")


def apply_delay_accounting(decision: Decision, dispatch: SimTime, store_response: SimTime) -> tuple[SimTime, SimTime]:
    """Recorded (invoke, response) for an operation.

    ``dispatch`` is when the client began the operation, i.e. before any
    pre-delay, and ``store_response`` is when the store answered.  Both
    delays therefore fall inside the recorded interval.
    """
    return dispatch, store_response + decision.post_delay_us
