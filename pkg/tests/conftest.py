import itertools

import pytest

from cpqsim.core import ConsistencyLevel, OperationRecord, OpKind

_ids = itertools.count(1000)


def W(key, value, invoke, response, client=0, op_id=None):
    return OperationRecord(next(_ids) if op_id is None else op_id, client, key, OpKind.WRITE,
                           value, invoke, response, ConsistencyLevel.ONE)


def R(key, value, invoke, response, client=0, op_id=None):
    return OperationRecord(next(_ids) if op_id is None else op_id, client, key, OpKind.READ,
                           value, invoke, response, ConsistencyLevel.ONE)


def pytest_configure(config):
    config._criteria_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Assert an acceptance criterion and log a one-line verdict."""

    def check(number: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        request.config._criteria_lines.append(line)
        print(line)
        assert ok, line

    return check
