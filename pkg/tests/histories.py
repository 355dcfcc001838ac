"""Random single-key histories shared by property and acceptance tests."""

import random

from cpqsim.core import ConsistencyLevel, OperationRecord, OpKind


def random_history(rng: random.Random, max_ops: int = 8, horizon: int = 100, key: int = 0):
    """Unique writes plus reads that each return some written value."""
    n_writes = rng.randint(1, min(4, max_ops))
    n_reads = rng.randint(0, max_ops - n_writes)
    ops = []
    op_id = 0

    def interval():
        start = rng.randint(0, horizon)
        return start, start + rng.choice((0, rng.randint(1, horizon // 2)))

    for v in range(1, n_writes + 1):
        inv, resp = interval()
        ops.append(OperationRecord(op_id, rng.randrange(4), key, OpKind.WRITE, v, inv, resp, ConsistencyLevel.ONE))
        op_id += 1
    for _ in range(n_reads):
        inv, resp = interval()
        value = rng.randint(1, n_writes)
        ops.append(OperationRecord(op_id, rng.randrange(4), key, OpKind.READ, value, inv, resp, ConsistencyLevel.ONE))
        op_id += 1
    rng.shuffle(ops)
    return ops


def widen(ops, delta: int):
    return [op.shifted(op.invoke - delta, op.response + delta) for op in ops]


def translate(ops, offset: int):
    return [op.shifted(op.invoke + offset, op.response + offset) for op in ops]
