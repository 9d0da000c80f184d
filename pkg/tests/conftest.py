import numpy as np
import pytest

from dcverify.circuit import CZ, Circuit, Single, linear_graph_state_circuit, random_unitary_1q
from dcverify.partition import decompose_circuit

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _local_gate(n: int, m: int, rng: np.random.Generator):
    sides = [list(range(1, m + 1)), list(range(m + 1, n + 1))]
    sides = [s for s in sides if len(s) >= 2]
    if sides and rng.random() < 0.3:
        side = sides[int(rng.integers(len(sides)))]
        c, t = rng.choice(side, size=2, replace=False)
        return CZ(int(c), int(t))
    return Single(int(rng.integers(1, n + 1)), random_unitary_1q(rng), "U")


def circuit_with_cut(n: int, m: int, D: int, rng: np.random.Generator, n_local: int = 8) -> Circuit:
    """Random circuit whose split {1..m} | {m+1..n} is crossed by exactly D CZs."""
    gates = [_local_gate(n, m, rng) for _ in range(n_local)]
    for pos in sorted(rng.integers(0, n_local + 1, size=D), reverse=True):
        a, b = int(rng.integers(1, m + 1)), int(rng.integers(m + 1, n + 1))
        gates.insert(int(pos), CZ(a, b) if rng.random() < 0.5 else CZ(b, a))
    return Circuit(n, tuple(gates), "cut-test")


def random_min_cut_circuit(rng: np.random.Generator, n_range=(2, 4), max_D: int = 2, n_local: int = 8):
    """Random circuit (and its decomposition) whose minimum cut has at most ``max_D`` crossings."""
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = (n + 1) // 2
        circ = circuit_with_cut(n, m, int(rng.integers(0, max_D + 1)), rng, n_local)
        part, L = decompose_circuit(circ)
        if L.D <= max_D:
            return circ, part, L


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def graph2():
    return linear_graph_state_circuit(2)


@pytest.fixture
def graph2_layered(graph2):
    return decompose_circuit(graph2)[1]
