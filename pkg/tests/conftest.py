import math

import numpy as np
import pytest

from kochskew.geometry import build_domain

CENTROID = (0.5, -math.sqrt(3.0) / 6.0)


@pytest.fixture(scope="session")
def dom2():
    return build_domain(3, 2)


@pytest.fixture(scope="session")
def dom1():
    return build_domain(3, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion -> [(clause, ok, detail)]; filled by the acceptance tests
VERDICTS: dict[int, list] = {}


def verdict(criterion: int, clause: str, ok: bool, detail: str = "") -> bool:
    VERDICTS.setdefault(criterion, []).append((clause, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(VERDICTS):
        clauses = VERDICTS[c]
        status = "PASS" if all(ok for _, ok, _ in clauses) else "FAIL"
        tr.write_line(f"criterion {c}: {status}")
        for clause, ok, detail in clauses:
            tr.write_line(f"    [{'ok' if ok else 'FAIL'}] {clause}: {detail}")
