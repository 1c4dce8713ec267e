import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from logical_bell.stabilizer import Circuit, gate  # noqa: E402


def random_clifford_circuit(n: int, n_ops: int, rng: np.random.Generator, measure_p: float = 0.2) -> Circuit:
    c = Circuit(n)
    for _ in range(n_ops):
        u = rng.random()
        if u < measure_p:
            c.add_layer([gate("MeasureZ", int(rng.integers(n)))])
            continue
        kind = rng.choice(["H", "CX", "X", "Z"], p=[0.35, 0.45, 0.1, 0.1])
        if kind == "CX":
            a, b = rng.choice(n, 2, replace=False)
            c.add_layer([gate("CX", int(a), int(b))])
        else:
            c.add_layer([gate(str(kind), int(rng.integers(n)))])
    # always end with a full readout so the distribution is informative
    for q in range(n):
        c.add_layer([gate("MeasureZ", q)])
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
