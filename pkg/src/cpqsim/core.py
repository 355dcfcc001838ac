"""Shared domain types, trace model, trace persistence and seeded randomness."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# Virtual time is integer microseconds since simulation start.
SimTime = int

INITIAL_VALUE = 0

TRACE_HEADER = (
    "op_id", "client_id", "key", "kind", "value_id",
    "invoke_us", "response_us", "level", "pre_delay_us", "post_delay_us",
)


class ConsistencyLevel(enum.Enum):
    ONE = "ONE"
    QUORUM = "QUORUM"
    ALL = "ALL"

    @classmethod
    def parse(cls, text: str) -> "ConsistencyLevel":
        aliases = {"QUO": "QUORUM", "MAJORITY": "QUORUM"}
        name = text.strip().upper()
        try:
            return cls(aliases.get(name, name))
        except ValueError:
            raise ValueError(f"unknown consistency level {text!r}") from None


class OpKind(enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True, slots=True)
class OperationRecord:
    op_id: int
    client_id: int
    key: int
    kind: OpKind
    value_id: int
    invoke: SimTime
    response: SimTime
    level: ConsistencyLevel = ConsistencyLevel.ONE
    pre_delay: int = 0
    post_delay: int = 0

    @property
    def is_write(self) -> bool:
        return self.kind is OpKind.WRITE

    @property
    def latency(self) -> int:
        return self.response - self.invoke

    def shifted(self, invoke: SimTime, response: SimTime) -> "OperationRecord":
        return OperationRecord(
            self.op_id, self.client_id, self.key, self.kind, self.value_id,
            invoke, response, self.level, self.pre_delay, self.post_delay,
        )


@dataclass
class Trace:
    """An ordered history of client-observed operations plus string metadata.

    Metadata is kept as strings so that persistence round-trips exactly.
    """

    records: list[OperationRecord] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[OperationRecord]:
        return iter(self.records)

    def append(self, record: OperationRecord) -> None:
        self.records.append(record)

    @property
    def reads(self) -> list[OperationRecord]:
        return [r for r in self.records if r.kind is OpKind.READ]

    @property
    def writes(self) -> list[OperationRecord]:
        return [r for r in self.records if r.kind is OpKind.WRITE]


@dataclass(frozen=True)
class Violation:
    op_id: int
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"op {self.op_id}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def validate_trace(trace: Trace) -> list[Violation]:
    """Check the trace invariants; violations are returned, never raised."""
    violations = []
    seen_ids = set()
    written: dict[tuple[int, int], int] = {}
    for rec in trace.records:
        if rec.op_id in seen_ids:
            violations.append(Violation(rec.op_id, "duplicate op_id"))
        seen_ids.add(rec.op_id)
        if rec.response < rec.invoke:
            violations.append(Violation(rec.op_id, "time order", f"response {rec.response} < invoke {rec.invoke}"))
        if rec.pre_delay < 0 or rec.post_delay < 0:
            violations.append(Violation(rec.op_id, "negative delay"))
        if rec.is_write:
            pair = (rec.key, rec.value_id)
            if pair in written:
                violations.append(Violation(rec.op_id, "duplicate write value", f"also written by op {written[pair]}"))
            else:
                written[pair] = rec.op_id
    for rec in trace.records:
        if rec.is_write or rec.value_id == INITIAL_VALUE:
            continue
        if (rec.key, rec.value_id) not in written:
            violations.append(Violation(rec.op_id, "dangling value", f"key {rec.key} value {rec.value_id}"))
    return violations


class TraceParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _format_record(rec: OperationRecord) -> list[str]:
    return [
        str(rec.op_id), str(rec.client_id), str(rec.key), rec.kind.value, str(rec.value_id),
        str(rec.invoke), str(rec.response), rec.level.value, str(rec.pre_delay), str(rec.post_delay),
    ]


def dumps_trace(trace: Trace) -> str:
    buf = io.StringIO()
    for k, v in trace.metadata.items():
        if "\n" in k or "\n" in v or "=" in k:
            raise ValueError(f"metadata entry {k!r} is not representable")
        buf.write(f"# {k}={v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for rec in trace.records:
        writer.writerow(_format_record(rec))
    return buf.getvalue()


def save_trace(trace: Trace, destination: str | Path) -> None:
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_trace(trace))


def _parse_row(row: list[str], lineno: int) -> OperationRecord:
    if len(row) != len(TRACE_HEADER):
        raise TraceParseError(lineno, f"expected {len(TRACE_HEADER)} fields, got {len(row)}")
    try:
        ints = {name: int(row[i]) for i, name in enumerate(TRACE_HEADER) if name not in ("kind", "level")}
    except ValueError as exc:
        raise TraceParseError(lineno, f"non-numeric field: {exc}") from None
    try:
        kind = OpKind(row[3])
    except ValueError:
        raise TraceParseError(lineno, f"bad kind {row[3]!r}") from None
    try:
        level = ConsistencyLevel(row[7])
    except ValueError:
        raise TraceParseError(lineno, f"bad level {row[7]!r}") from None
    return OperationRecord(
        ints["op_id"], ints["client_id"], ints["key"], kind, ints["value_id"],
        ints["invoke_us"], ints["response_us"], level, ints["pre_delay_us"], ints["post_delay_us"],
    )


def loads_trace(text: str) -> Trace:
    trace = Trace()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        if not header_seen:
            if line.startswith("#"):
                k, sep, v = line[1:].lstrip().partition("=")
                if not sep:
                    raise TraceParseError(lineno, "metadata line without '='")
                trace.metadata[k] = v
                continue
            if tuple(line.split(",")) != TRACE_HEADER:
                raise TraceParseError(lineno, "missing or malformed header")
            header_seen = True
            continue
        row = next(csv.reader([line]))
        trace.append(_parse_row(row, lineno))
    if not header_seen:
        raise TraceParseError(len(lines) + 1, "missing header")
    return trace


def load_trace(source: str | Path) -> Trace:
    with open(source, encoding="utf-8", newline="") as fh:
        return loads_trace(fh.read())


class RngStream:
    """Named pseudo-random substream.

    The stream is derived from ``sha256(seed, label)`` and backed by the
    stdlib Mersenne Twister, so identical ``(seed, label)`` pairs give
    identical draws on every platform.
    """

    __slots__ = ("seed", "label", "_rng")

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        digest = hashlib.sha256(f"{seed}/{label}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest, "big"))

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, lo: float, hi: float) -> float:
        return self._rng.uniform(lo, hi)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return self._rng.randint(lo, hi)

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def gauss(self) -> float:
        return self._rng.gauss(0.0, 1.0)

    def choice(self, items):
        return self._rng.choice(items)

    def substream(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}")


def config_digest(items: Iterable[tuple[str, str]]) -> str:
    h = hashlib.sha256()
    for k, v in sorted(items):
        h.update(f"{k}={v}\n".encode())
    return h.hexdigest()[:16]
