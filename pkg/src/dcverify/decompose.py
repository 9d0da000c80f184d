"""Space cut of the crossing CZs into half-operators V_i, W_j.

Each crossing CZ is replaced by ``1/2 sum_{ij} (-1)^{ij} sigma(i) x sigma(j)``
with ``sigma(0) = I`` and ``sigma(1) = Z``. Collecting the choices over all
crossings gives ``U = 2^-D sum_{i,j} (-1)^{i.j} V_i x W_j``, where ``V_i``
acts on side A and ``W_j`` on side B.

Half-operators are circuits, so the estimator can run them gate by gate
under noise; dense matrices appear only in the checking helpers here.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import FIXED_GATES, Circuit, Single, circuit_unitary
from .partition import LayeredDecomposition
from ._tensor import embed, z_string
from ._validation import check_bits, check_dense, dot2

Z = FIXED_GATES["Z"]


def cz_term_expansion() -> list[tuple[int, int, int]]:
    """The four ``(i, j, sign)`` terms of CZ; each carries weight 1/2."""
    return [(i, j, -1 if i & j else 1) for i in (0, 1) for j in (0, 1)]


def sigma(bit: int) -> np.ndarray:
    return Z.copy() if bit else FIXED_GATES["I"].copy()


@dataclass(frozen=True)
class HalfOperator:
    side: str
    bits: tuple[int, ...]
    circuit: Circuit


def build_half_operator(L: LayeredDecomposition, side: str, bits) -> HalfOperator:
    """``V_i`` (side ``"A"``) or ``W_j`` (side ``"B"``) as a circuit.

    Blocks are laid down in time order with a Z inserted at the local
    crossing qubit wherever the corresponding bit is 1. Inserted gates are
    flagged as cut artifacts.
    """
    bits = check_bits(bits, L.D, "bits")
    if side == "A":
        blocks, nq, pick = L.blocks_v, L.m, 0
    elif side == "B":
        blocks, nq, pick = L.blocks_w, L.n - L.m, 1
    else:
        raise ValueError("side must be 'A' or 'B'")
    gates = list(blocks[0].gates)
    for k, bit in enumerate(bits):
        if bit:
            gates.append(Single(L.crossings[k][pick], Z, "Z", artifact=True))
        gates.extend(blocks[k + 1].gates)
    return HalfOperator(side, bits, Circuit(nq, tuple(gates)))


def all_bits(length: int) -> list[tuple[int, ...]]:
    return [tuple(b) for b in itertools.product((0, 1), repeat=length)]


def q_dagger_matrix(L: LayeredDecomposition, i, j) -> np.ndarray:
    """Dense ``Q^dagger_{i,j} = V_i x W_j`` on the relabelled register."""
    check_dense(L.n)
    v = circuit_unitary(build_half_operator(L, "A", i).circuit)
    w = circuit_unitary(build_half_operator(L, "B", j).circuit)
    # A occupies the low-order qubits
    return np.kron(w, v)


def reconstruct_check(L: LayeredDecomposition) -> float:
    """Max-abs deviation of ``2^-D sum (-1)^{i.j} V_i x W_j`` from ``U``."""
    check_dense(L.n)
    u = circuit_unitary(L.circuit)
    total = np.zeros_like(u)
    for i in all_bits(L.D):
        v = circuit_unitary(build_half_operator(L, "A", i).circuit)
        for j in all_bits(L.D):
            w = circuit_unitary(build_half_operator(L, "B", j).circuit)
            total += (-1) ** dot2(i, j) * np.kron(w, v)
    total /= 2**L.D
    return float(np.max(np.abs(total - u)))


@dataclass(frozen=True)
class StabilizerSpec:
    """``s_k = U (prod_i Z_i^{k_i}) U^dagger`` for the decomposition's circuit."""

    k: tuple[int, ...]
    layered: LayeredDecomposition


def stabilizer_matrix(spec: StabilizerSpec | Circuit, k=None) -> np.ndarray:
    """Dense generalised stabilizer; accepts a spec or ``(circuit, k)``."""
    if isinstance(spec, StabilizerSpec):
        circuit, k = spec.layered.circuit, spec.k
    else:
        circuit = spec
    check_dense(circuit.n_qubits)
    k = check_bits(k, circuit.n_qubits, "k")
    u = circuit_unitary(circuit)
    return (u * z_string(k)[None, :]) @ u.conj().T


def stabilizer_expansion_check(U: Circuit) -> float:
    """Max-abs deviation of ``2^-n sum_k s_k`` from ``|psi_t><psi_t|``."""
    n = U.n_qubits
    check_dense(n, 8)
    u = circuit_unitary(U)
    psi = u[:, 0]
    total = np.zeros((2**n, 2**n), dtype=complex)
    for k in all_bits(n):
        total += (u * z_string(k)[None, :]) @ u.conj().T
    total /= 2**n
    return float(np.max(np.abs(total - np.outer(psi, psi.conj()))))


# -- Pauli-frame reduction --------------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """Per-k quadruple that carries the whole stabilizer weight.

    When every cut insertion propagates to the output as a mutually
    commuting involution and ``Q_00^dagger Z^k Q_00`` commutes or
    anticommutes with each of them, the quadruple sum collapses:
    ``Tr[rho s_k]`` equals the single cross term ``(k, u, v, 0, 0)``.
    ``table`` maps k to ``(u, v)``.
    """

    table: dict

    def quadruple(self, k) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        u, v = self.table[tuple(k)]
        zero = (0,) * len(u)
        return u, v, zero, zero


def _propagated_insertions(blocks: Sequence[Circuit], crossings, pick: int) -> list[np.ndarray]:
    """``G_k = P_k Z_{c_k} P_k^dagger`` with ``P_k`` the blocks after crossing k."""
    nq = blocks[0].n_qubits
    out = []
    for k, cross in enumerate(crossings):
        tail = Circuit(nq, tuple(g for b in blocks[k + 1:] for g in b.gates))
        p = circuit_unitary(tail)
        zk = embed(Z, (cross[pick],), nq)
        out.append(p @ zk @ p.conj().T)
    return out


def _commute_sign(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> int | None:
    ab, ba = a @ b, b @ a
    if np.max(np.abs(ab - ba)) < tol:
        return 0
    if np.max(np.abs(ab + ba)) < tol:
        return 1
    return None


def find_reduction(L: LayeredDecomposition, cap: int = 8) -> Reduction | None:
    """Detect the Pauli-frame structure that lets i' = j' = 0 be fixed.

    Returns None when the structure is absent or the register exceeds
    ``cap`` qubits (detection is dense).
    """
    if L.n > cap:
        return None
    if L.D == 0:
        return Reduction({k: ((), ()) for k in all_bits(L.n)})
    nb = L.n - L.m
    ga = _propagated_insertions(L.blocks_v, L.crossings, 0)
    gb = _propagated_insertions(L.blocks_w, L.crossings, 1)
    for group in (ga, gb):
        for x, y in itertools.combinations(group, 2):
            if _commute_sign(x, y) != 0:
                return None
    full_a = [np.kron(np.eye(2**nb), g) for g in ga]
    full_b = [np.kron(g, np.eye(2**L.m)) for g in gb]
    q00_dag = q_dagger_matrix(L, (0,) * L.D, (0,) * L.D)
    table = {}
    for k in all_bits(L.n):
        mk = (q00_dag * z_string(k)[None, :]) @ q00_dag.conj().T
        a_bits, b_bits = [], []
        for g in full_a:
            s = _commute_sign(mk, g)
            if s is None:
                return None
            a_bits.append(s)
        for g in full_b:
            s = _commute_sign(mk, g)
            if s is None:
                return None
            b_bits.append(s)
        # i-index from B-side anticommutation, j-index from A-side
        table[k] = (tuple(b_bits), tuple(a_bits))
    return Reduction(table)
