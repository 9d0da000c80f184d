"""Dense statevector / density-matrix simulator with Kraus noise.

The density-matrix engine gives exact expectations and is the default for
registers up to ``DM_MAX_QUBITS``; statevectors with stochastic Kraus
unravelling cover larger registers on the sampling paths.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuit import FIXED_GATES, Circuit, Single
from ._tensor import apply_left, conjugate, permute_axes, replace_with_mixed
from ._validation import check_probability

DM_MAX_QUBITS = 10

I2 = FIXED_GATES["I"]
X = FIXED_GATES["X"]
Y = FIXED_GATES["Y"]
Z = FIXED_GATES["Z"]
H = FIXED_GATES["H"]
S = FIXED_GATES["S"]
PAULIS = (I2, X, Y, Z)


class SimulationError(RuntimeError):
    pass


class QuantumState:
    """Statevector (``kind="sv"``) or density matrix (``kind="dm"``) on r qubits."""

    __slots__ = ("data", "n", "kind")

    def __init__(self, data: np.ndarray, kind: str):
        data = np.asarray(data, dtype=complex)
        if kind == "sv":
            n = int(round(np.log2(data.shape[0])))
            if data.ndim != 1 or 2**n != data.shape[0]:
                raise ValueError("statevector length must be a power of two")
        elif kind == "dm":
            n = int(round(np.log2(data.shape[0])))
            if data.ndim != 2 or data.shape != (2**n, 2**n):
                raise ValueError("density matrix must be square with power-of-two size")
        else:
            raise ValueError(f"unknown state kind {kind!r}")
        self.data, self.n, self.kind = data, n, kind

    @classmethod
    def zeros(cls, n: int, kind: str = "dm") -> "QuantumState":
        if kind == "sv":
            v = np.zeros(2**n, dtype=complex)
            v[0] = 1
            return cls(v, "sv")
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1
        return cls(rho, "dm")

    @classmethod
    def from_statevector(cls, psi) -> "QuantumState":
        return cls(np.asarray(psi, dtype=complex), "sv")

    @classmethod
    def from_density(cls, rho) -> "QuantumState":
        return cls(np.asarray(rho, dtype=complex), "dm")

    @classmethod
    def maximally_mixed(cls, n: int) -> "QuantumState":
        return cls(np.eye(2**n, dtype=complex) / 2**n, "dm")

    def copy(self) -> "QuantumState":
        return QuantumState(self.data.copy(), self.kind)

    def density_matrix(self) -> np.ndarray:
        if self.kind == "dm":
            return self.data
        return np.outer(self.data, self.data.conj())

    def to_density(self) -> "QuantumState":
        return self if self.kind == "dm" else QuantumState(self.density_matrix(), "dm")

    def probabilities(self) -> np.ndarray:
        """Born probabilities over all 2**n basis states (index LSB = qubit 1)."""
        if self.kind == "sv":
            p = np.abs(self.data) ** 2
        else:
            p = np.real(np.diag(self.data)).copy()
        p[p < 0] = 0.0
        return p / p.sum()

    def tensor(self, other: "QuantumState") -> "QuantumState":
        """Append ``other`` as the higher-index qubits."""
        if self.kind == other.kind == "sv":
            return QuantumState(np.kron(other.data, self.data), "sv")
        return QuantumState(np.kron(other.density_matrix(), self.density_matrix()), "dm")

    def check(self, tol: float = 1e-10) -> None:
        """Assert physical validity (norm / Hermiticity / trace / PSD)."""
        if self.kind == "sv":
            if abs(np.linalg.norm(self.data) - 1) > tol:
                raise SimulationError("statevector is not normalised")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise SimulationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > tol:
            raise SimulationError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise SimulationError("density matrix is not positive semidefinite")


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate noise.

    After each gate its touched qubits see: depolarizing ``p1`` (single
    qubit gates) or ``p2`` (CZ and controlled gates, applied jointly on all
    touched qubits), then amplitude damping ``gamma`` on each touched qubit,
    then any Kraus set registered under the gate label in ``custom``.
    ``readout_flip`` is a classical bit flip per measured qubit.
    """

    p1: float = 0.0
    p2: float = 0.0
    gamma: float = 0.0
    readout_flip: float = 0.0
    custom: Mapping[str, Sequence[np.ndarray]] = field(default_factory=dict)
    virtual_artifacts: bool = False

    def __post_init__(self):
        for name in ("p1", "p2", "gamma", "readout_flip"):
            check_probability(getattr(self, name), name)
        for label, kraus in self.custom.items():
            total = sum(np.asarray(k).conj().T @ np.asarray(k) for k in kraus)
            if np.max(np.abs(total - np.eye(total.shape[0]))) > 1e-10:
                raise ValueError(f"Kraus set for {label!r} is not trace preserving")

    @property
    def is_ideal(self) -> bool:
        return not (self.p1 or self.p2 or self.gamma or self.readout_flip or self.custom)

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "gamma": self.gamma, "readout_flip": self.readout_flip}


IDEAL = NoiseModel()


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def depolarize(state: QuantumState, qubits: Sequence[int], p: float, rng=None) -> QuantumState:
    """With probability p replace the touched qubits by the maximally mixed state.

    For a statevector this is unravelled as a uniformly random w-qubit Pauli
    (identity included) with probability p, i.e. a non-identity Pauli with
    total weight ``p (4^w - 1) / 4^w``.
    """
    if p == 0:
        return state
    if state.kind == "dm":
        mixed = state.data
        for q in qubits:
            mixed = replace_with_mixed(mixed, q, state.n)
        return QuantumState((1 - p) * state.data + p * mixed, "dm")
    if rng is None:
        raise SimulationError("statevector noise needs an rng for Kraus unravelling")
    if rng.random() >= p:
        return state
    data = state.data
    for q in qubits:
        data = apply_left(data, PAULIS[int(rng.integers(4))], (q,), state.n)
    return QuantumState(data, "sv")


def apply_kraus(state: QuantumState, kraus: Sequence[np.ndarray], qubits: Sequence[int], rng=None) -> QuantumState:
    if state.kind == "dm":
        out = sum(conjugate(state.data, k, qubits, state.n) for k in kraus)
        return QuantumState(out, "dm")
    if rng is None:
        raise SimulationError("statevector noise needs an rng for Kraus unravelling")
    branches = [apply_left(state.data, k, qubits, state.n) for k in kraus]
    weights = np.array([np.vdot(b, b).real for b in branches])
    pick = int(rng.choice(len(branches), p=weights / weights.sum()))
    return QuantumState(branches[pick] / np.sqrt(weights[pick]), "sv")


def apply_noise(state: QuantumState, qubits: Sequence[int], label: str | None, noise: NoiseModel | None,
                rng=None, artifact: bool = False) -> QuantumState:
    if noise is None or (artifact and noise.virtual_artifacts):
        return state
    p = noise.p1 if len(qubits) == 1 else noise.p2
    state = depolarize(state, qubits, p, rng)
    if noise.gamma:
        kraus = amplitude_damping_kraus(noise.gamma)
        for q in qubits:
            state = apply_kraus(state, kraus, (q,), rng)
    if label is not None and label in noise.custom:
        kraus = [np.asarray(k, dtype=complex) for k in noise.custom[label]]
        if kraus[0].shape[0] == 2 ** len(qubits):
            state = apply_kraus(state, kraus, qubits, rng)
    return state


def apply_matrix(state: QuantumState, mat: np.ndarray, qubits: Sequence[int]) -> QuantumState:
    if state.kind == "sv":
        return QuantumState(apply_left(state.data, mat, qubits, state.n), "sv")
    return QuantumState(conjugate(state.data, mat, qubits, state.n), "dm")


def _gate_op(g) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(g, Single):
        return g.matrix, (g.qubit,)
    return np.diag([1, 1, 1, -1]).astype(complex), (g.c, g.t)


def _resolve(qmap, q: int) -> int:
    return q if qmap is None else qmap[q]


def apply_gate(state: QuantumState, g, noise: NoiseModel | None = None, qubit_map=None, rng=None) -> QuantumState:
    mat, local = _gate_op(g)
    qubits = tuple(_resolve(qubit_map, q) for q in local)
    state = apply_matrix(state, mat, qubits)
    return apply_noise(state, qubits, g.label, noise, rng, g.artifact)


def apply_circuit(state: QuantumState, c: Circuit, noise: NoiseModel | None = None,
                  qubit_map: Mapping[int, int] | None = None, rng=None) -> QuantumState:
    """Apply ``c`` gate by gate, each followed by its noise channel.

    ``qubit_map`` sends circuit qubits to register qubits (identity when
    omitted). Noise on a statevector requires ``rng``.
    """
    if qubit_map is None and c.n_qubits > state.n:
        raise SimulationError(f"circuit on {c.n_qubits} qubits does not fit a {state.n}-qubit register")
    if state.kind == "sv" and noise is not None and not noise.is_ideal and rng is None:
        raise SimulationError("noisy statevector simulation needs an rng (Kraus unravelling)")
    for g in c.gates:
        state = apply_gate(state, g, noise, qubit_map, rng)
    return state


def controlled_matrix(mat: np.ndarray) -> np.ndarray:
    """``|0><0| x I + |1><1| x mat`` with the control as the top local qubit."""
    d = mat.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = mat
    return out


def apply_controlled(state: QuantumState, control: int, c: Circuit, anti: bool = False,
                     noise: NoiseModel | None = None, qubit_map: Mapping[int, int] | None = None,
                     rng=None) -> QuantumState:
    """Apply ``Lambda(c)``: every gate of ``c`` controlled on ``control``.

    Single-qubit gates become controlled-U, CZ becomes CCZ. ``anti`` wraps
    the whole thing in X on the control (those two X gates are noisy too).
    """
    data = [_resolve(qubit_map, q) for q in range(1, c.n_qubits + 1)]
    if control in data:
        raise SimulationError(f"control qubit {control} collides with the data register")
    if anti:
        state = apply_gate(state, Single(control, X, "X"), noise, None, rng)
    for g in c.gates:
        mat, local = _gate_op(g)
        qubits = tuple(_resolve(qubit_map, q) for q in local) + (control,)
        state = apply_matrix(state, controlled_matrix(mat), qubits)
        state = apply_noise(state, qubits, None, noise, rng, g.artifact)
    if anti:
        state = apply_gate(state, Single(control, X, "X"), noise, None, rng)
    return state


def _collapse(state: QuantumState, qubits: Sequence[int], outcome: Sequence[int]) -> QuantumState:
    idx = np.arange(2**state.n)
    keep = np.ones(2**state.n, dtype=bool)
    for q, b in zip(qubits, outcome):
        keep &= ((idx >> (q - 1)) & 1) == b
    if state.kind == "sv":
        data = np.where(keep, state.data, 0)
        norm = np.vdot(data, data).real
        if norm <= 0:
            raise SimulationError("collapse onto a zero-probability outcome")
        return QuantumState(data / np.sqrt(norm), "sv")
    data = state.data * np.outer(keep, keep)
    tr = np.trace(data).real
    if tr <= 0:
        raise SimulationError("collapse onto a zero-probability outcome")
    return QuantumState(data / tr, "dm")


def marginal(probs: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Distribution over ``qubits`` (first listed qubit = least significant bit)."""
    t = probs.reshape((2,) * n)
    keep_axes = [n - q for q in qubits]
    drop = tuple(a for a in range(n) if a not in keep_axes)
    t = t.sum(axis=drop) if drop else t
    remaining = sorted(keep_axes)
    order = [remaining.index(a) for a in reversed(keep_axes)]
    return np.transpose(t, order).reshape(-1)


def measure_z(state: QuantumState, qubits: Sequence[int], rng: np.random.Generator,
              readout_flip: float = 0.0) -> tuple[tuple[int, ...], QuantumState]:
    """Sample a joint Z-basis outcome, collapse, then flip recorded bits."""
    qubits = tuple(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError("measured qubits must be distinct")
    dist = marginal(state.probabilities(), qubits, state.n)
    x = int(rng.choice(dist.size, p=dist / dist.sum()))
    outcome = tuple((x >> pos) & 1 for pos in range(len(qubits)))
    post = _collapse(state, qubits, outcome)
    if readout_flip:
        flips = rng.random(len(qubits)) < readout_flip
        outcome = tuple(b ^ int(f) for b, f in zip(outcome, flips))
    return outcome, post


# -- Pauli-basis settings ----------------------------------------------------

def pauli_setting(l) -> tuple[int, int, int]:
    l = tuple(int(b) for b in (l if not isinstance(l, str) else l))
    if len(l) != 3 or any(b not in (0, 1) for b in l):
        raise ValueError("a Pauli-basis setting is three bits")
    return l  # type: ignore[return-value]


def clifford_gates(l) -> list[str]:
    """Gate labels of ``C_l = S^{[l1=1][l2=0]} H^{[l1+l2=1]} X^{l3}`` in time order."""
    l1, l2, l3 = pauli_setting(l)
    gates = []
    if l3:
        gates.append("X")
    if l1 + l2 == 1:
        gates.append("H")
    if l1 == 1 and l2 == 0:
        gates.append("S")
    return gates


def clifford_matrix(l) -> np.ndarray:
    out = np.eye(2, dtype=complex)
    for name in clifford_gates(l):
        out = FIXED_GATES[name] @ out
    return out


ALL_SETTINGS: tuple[tuple[int, int, int], ...] = tuple(itertools.product((0, 1), repeat=3))


def ignores_outcome(l) -> bool:
    """Settings 000 and 001 drop the cut-qubit outcome from the sign."""
    l1, l2, _ = pauli_setting(l)
    return l1 == 0 and l2 == 0


def prepare_pauli_state(l) -> QuantumState:
    """``C_l|0>`` as a one-qubit statevector."""
    return QuantumState(clifford_matrix(l)[:, 0].copy(), "sv")


def measure_pauli_basis(state: QuantumState, qubit: int, l, rng: np.random.Generator
                        ) -> tuple[int, QuantumState]:
    """Project ``qubit`` onto ``{C_l|0>, C_l|1>}``; returns outcome and post-state."""
    c = clifford_matrix(l)
    rotated = apply_matrix(state, c.conj().T, (qubit,))
    (o,), post = measure_z(rotated, (qubit,), rng)
    return o, apply_matrix(post, c, (qubit,))


def permute_register(state: QuantumState, perm: Mapping[int, int] | Sequence[int]) -> QuantumState:
    """Move qubit ``q`` to position ``perm[q]`` (1-based).

    A sequence is read as ``perm[q - 1]`` for q = 1..n.
    """
    if not isinstance(perm, Mapping):
        perm = {q: int(p) for q, p in enumerate(perm, start=1)}
    n = state.n
    if sorted(perm) != list(range(1, n + 1)) or sorted(perm.values()) != list(range(1, n + 1)):
        raise ValueError("permutation must be a bijection on 1..n")
    return QuantumState(permute_axes(state.data, dict(perm), n, state.kind == "dm"), state.kind)


def cyclic_shift(r: int) -> dict[int, int]:
    """Qubit i goes to i+1, the last qubit wraps to position 1."""
    return {q: q % r + 1 for q in range(1, r + 1)}


def partial_trace(state: QuantumState, keep: Sequence[int]) -> QuantumState:
    """Reduced density matrix on ``keep`` (kept in ascending order, relabelled 1..)."""
    rho = state.density_matrix()
    n = state.n
    keep = sorted(keep)
    t = rho.reshape((2,) * (2 * n))
    drop = [q for q in range(1, n + 1) if q not in keep]
    for q in sorted(drop, reverse=True):
        cur = t.ndim // 2
        a = cur - q
        t = np.trace(t, axis1=a, axis2=a + cur)
    d = 2 ** len(keep)
    return QuantumState(t.reshape(d, d), "dm")


def prepare_state(c: Circuit, noise: NoiseModel | None = None, kind: str = "dm", rng=None) -> QuantumState:
    """Run ``c`` on ``|0^n>`` under ``noise``."""
    return apply_circuit(QuantumState.zeros(c.n_qubits, kind), c, noise, rng=rng)


def apply_readout_flips(probs: np.ndarray, qubits: Sequence[int], n: int, flip: float) -> np.ndarray:
    """Exact effect of independent readout bit flips on a distribution."""
    if not flip:
        return probs
    t = probs.reshape((2,) * n)
    for q in qubits:
        a = n - q
        t = (1 - flip) * t + flip * np.flip(t, axis=a)
    return t.reshape(-1)
