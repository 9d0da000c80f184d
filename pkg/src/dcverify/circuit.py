"""Circuit IR over the gate set {single-qubit unitaries, CZ}.

Qubit indices are 1-based. Gate matrices are stored explicitly, so named
and parameterised gates are resolved at construction time and nothing
downstream needs symbolic algebra.
"""
from __future__ import annotations

import cmath
import json
import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ._tensor import apply_left
from ._validation import UNITARY_CAP, CircuitError, check_dense, is_unitary

_S2 = 1 / math.sqrt(2)

FIXED_GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
    "Tdg": np.array([[1, 0], [0, cmath.exp(-1j * math.pi / 4)]], dtype=complex),
}
ROTATIONS = ("Rx", "Ry", "Rz")
BUILTIN_LABELS = tuple(FIXED_GATES) + ROTATIONS

_PARAM_LABEL = re.compile(r"^(Rx|Ry|Rz)\(\s*([-+0-9.eE]+)\s*\)$")


def rotation(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if axis == "Rx":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "Ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "Rz":
        return np.array([[cmath.exp(-1j * theta / 2), 0], [0, cmath.exp(1j * theta / 2)]], dtype=complex)
    raise CircuitError(f"unknown rotation {axis!r}")


def gate_matrix(label: str, theta: float | None = None) -> np.ndarray:
    """Resolve a built-in label (``"H"``, ``"Rz"`` with ``theta``, ``"Rz(0.3)"``)."""
    if label in FIXED_GATES:
        return FIXED_GATES[label].copy()
    match = _PARAM_LABEL.match(label)
    if match:
        return rotation(match.group(1), float(match.group(2)))
    if label in ROTATIONS:
        if theta is None:
            raise CircuitError(f"gate {label} needs an angle")
        return rotation(label, float(theta))
    raise CircuitError(f"unknown gate label {label!r} and no matrix given")


@dataclass(frozen=True, eq=False)
class Single:
    """A single-qubit unitary on ``qubit``.

    ``artifact`` marks the Z insertions produced by cutting a CZ, which
    noise models may treat as virtual gates.
    """

    qubit: int
    matrix: np.ndarray
    label: str | None = None
    artifact: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise CircuitError(f"single-qubit matrix must be 2x2, got shape {m.shape}")
        if not is_unitary(m):
            raise CircuitError(f"matrix for gate {self.label or '?'} on qubit {self.qubit} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    def dagger(self) -> "Single":
        label = None if self.label is None else _dagger_label(self.label)
        return Single(self.qubit, self.matrix.conj().T, label, self.artifact)


@dataclass(frozen=True)
class CZ:
    c: int
    t: int

    def __post_init__(self):
        if self.c == self.t:
            raise CircuitError("CZ control equals target")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.c, self.t)

    @property
    def label(self) -> str:
        return "CZ"

    artifact = False

    def dagger(self) -> "CZ":
        return self


Gate = Union[Single, CZ]

CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def _dagger_label(label: str) -> str:
    swaps = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T"}
    if label in swaps:
        return swaps[label]
    if label in ("I", "X", "Y", "Z", "H"):
        return label
    return label + "^dg"


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = field(default_factory=tuple)
    name: str | None = None

    def __post_init__(self):
        if int(self.n_qubits) < 1:
            raise CircuitError("n_qubits must be positive")
        gates = tuple(self.gates)
        for pos, g in enumerate(gates):
            if not isinstance(g, (Single, CZ)):
                raise CircuitError(f"gate {pos} is not a Single or CZ gate")
            for q in g.qubits:
                if not 1 <= q <= self.n_qubits:
                    raise CircuitError(f"gate {pos}: qubit index {q} outside [1, {self.n_qubits}]")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def n_cz(self) -> int:
        return sum(isinstance(g, CZ) for g in self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.dagger() for g in reversed(self.gates)), self.name)

    def then(self, other: "Circuit") -> "Circuit":
        """Apply ``self`` first, then ``other``."""
        if other.n_qubits != self.n_qubits:
            raise CircuitError("cannot concatenate circuits on different registers")
        return Circuit(self.n_qubits, self.gates + other.gates, self.name)


def single(qubit: int, label: str, theta: float | None = None) -> Single:
    name = label if theta is None else f"{label}({theta!r})"
    return Single(qubit, gate_matrix(label, theta), name)


def linear_graph_state_circuit(n: int) -> Circuit:
    """H on every qubit, then CZ(i, i+1) along the line."""
    if n < 1:
        raise CircuitError("n must be positive")
    gates = [single(q, "H") for q in range(1, n + 1)]
    gates += [CZ(q, q + 1) for q in range(1, n)]
    return Circuit(n, tuple(gates), f"linear-graph-{n}")


def circuit_unitary(c: Circuit, cap: int = UNITARY_CAP) -> np.ndarray:
    """Dense unitary of ``c`` (gates applied in list order)."""
    check_dense(c.n_qubits, cap)
    n = c.n_qubits
    mat = np.eye(2**n, dtype=complex)
    for g in c.gates:
        if isinstance(g, Single):
            mat = apply_left(mat, g.matrix, (g.qubit,), n)
        else:
            mat = apply_left(mat, CZ_MATRIX, (g.c, g.t), n)
    return mat


def target_state(c: Circuit) -> np.ndarray:
    """``U|0^n>`` as a statevector."""
    n = c.n_qubits
    check_dense(n, UNITARY_CAP)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for g in c.gates:
        if isinstance(g, Single):
            psi = apply_left(psi, g.matrix, (g.qubit,), n)
        else:
            psi = apply_left(psi, CZ_MATRIX, (g.c, g.t), n)
    return psi


def random_circuit(n: int, n_gates: int, rng: np.random.Generator, cz_fraction: float = 0.35) -> Circuit:
    """Random circuit of Haar-ish single-qubit gates and CZs (for tests and demos)."""
    gates: list[Gate] = []
    for _ in range(n_gates):
        if n >= 2 and rng.random() < cz_fraction:
            c, t = rng.choice(np.arange(1, n + 1), size=2, replace=False)
            gates.append(CZ(int(c), int(t)))
        else:
            gates.append(Single(int(rng.integers(1, n + 1)), random_unitary_1q(rng), "U"))
    return Circuit(n, tuple(gates), "random")


def random_unitary_1q(rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# -- JSON -------------------------------------------------------------------

def _parse_matrix(raw, pos: int) -> np.ndarray:
    try:
        arr = np.array([[complex(float(e[0]), float(e[1])) for e in row] for row in raw], dtype=complex)
    except (TypeError, ValueError, IndexError) as exc:
        raise CircuitError(f"gate {pos}: matrix entries must be [re, im] pairs") from exc
    if arr.shape != (2, 2):
        raise CircuitError(f"gate {pos}: matrix must be 2x2")
    return arr


def circuit_from_dict(doc: dict) -> Circuit:
    if not isinstance(doc, dict):
        raise CircuitError("circuit document must be a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise CircuitError("field 'n' must be a positive integer")
    raw_gates = doc.get("gates", [])
    if not isinstance(raw_gates, list):
        raise CircuitError("field 'gates' must be a list")
    gates: list[Gate] = []
    for pos, g in enumerate(raw_gates):
        if not isinstance(g, dict):
            raise CircuitError(f"gate {pos} must be an object")
        kind = g.get("kind")
        if kind == "cz":
            c, t = g.get("c"), g.get("t")
            if not isinstance(c, int) or not isinstance(t, int):
                raise CircuitError(f"gate {pos}: CZ needs integer 'c' and 't'")
            for q in (c, t):
                if not 1 <= q <= n:
                    raise CircuitError(f"gate {pos}: qubit index {q} outside [1, {n}]")
            gates.append(CZ(c, t))
        elif kind == "single":
            q = g.get("q")
            if not isinstance(q, int) or not 1 <= q <= n:
                raise CircuitError(f"gate {pos}: qubit index {q!r} outside [1, {n}]")
            label = g.get("label")
            if "matrix" in g and g["matrix"] is not None:
                matrix = _parse_matrix(g["matrix"], pos)
            elif label is not None:
                matrix = gate_matrix(label, g.get("theta"))
                if g.get("theta") is not None and label in ROTATIONS:
                    label = f"{label}({float(g['theta'])!r})"
            else:
                raise CircuitError(f"gate {pos}: single gate needs a label or a matrix")
            if not is_unitary(matrix):
                raise CircuitError(f"gate {pos}: matrix is not unitary")
            gates.append(Single(q, matrix, label))
        else:
            raise CircuitError(f"gate {pos}: unknown kind {kind!r}")
    return Circuit(n, tuple(gates), doc.get("name"))


def parse_circuit(text: str) -> Circuit:
    """Parse and validate the circuit JSON document format."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitError(f"malformed JSON: {exc}") from exc
    return circuit_from_dict(doc)


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


def circuit_to_dict(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        if isinstance(g, CZ):
            gates.append({"kind": "cz", "c": g.c, "t": g.t})
            continue
        entry: dict = {"kind": "single", "q": g.qubit}
        if g.label is not None:
            entry["label"] = g.label
        if g.label is None or g.label not in FIXED_GATES:
            entry["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in g.matrix]
        gates.append(entry)
    doc: dict = {"n": c.n_qubits, "gates": gates}
    if c.name is not None:
        doc["name"] = c.name
    return doc


def serialize_circuit(c: Circuit) -> str:
    return json.dumps(circuit_to_dict(c), indent=1)
