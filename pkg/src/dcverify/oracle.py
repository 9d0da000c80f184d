"""Dense ground truth for every estimator path.

Nothing here samples. Everything runs on explicit 2^n matrices, so sizes
are capped (n <= 10 by default, see ``DCVERIFY_DENSE_CAP``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuit import Circuit, target_state
from .decompose import all_bits, q_dagger_matrix, stabilizer_matrix
from .estimate import CrossTermEngine, expected_alpha, required_shots
from .partition import LayeredDecomposition
from .sim import IDEAL, NoiseModel, QuantumState
from ._tensor import z_string
from ._validation import check_bits, check_dense, dot2

EIG_CUTOFF = 1e-12


@dataclass
class OracleReport:
    quantity: str
    value: float | complex
    method: str
    tolerance: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(self.value, complex):
            out["value"] = [self.value.real, self.value.imag]
        return out


def _density(rho) -> np.ndarray:
    if isinstance(rho, QuantumState):
        return rho.density_matrix()
    arr = np.asarray(rho, dtype=complex)
    return np.outer(arr, arr.conj()) if arr.ndim == 1 else arr


def exact_fidelity(rho, target: Circuit) -> float:
    """``<psi_t| rho |psi_t>`` with ``psi_t = U|0^n>``."""
    n = target.n_qubits
    check_dense(n, what="oracle")
    r = _density(rho)
    if r.shape != (2**n, 2**n):
        raise ValueError("rho does not match the target register")
    psi = target_state(target)
    return float(np.real(np.vdot(psi, r @ psi)))


def fidelity_via_stabilizers(rho, target: Circuit) -> float:
    """``Tr[rho 2^-n sum_k s_k]``; should agree with exact_fidelity."""
    n = target.n_qubits
    check_dense(n, 8, "stabilizer sum")
    r = _density(rho)
    total = sum(np.trace(r @ stabilizer_matrix(target, k)) for k in all_bits(n))
    return float(np.real(total)) / 2**n


def _cross_operator(L: LayeredDecomposition, k, i, j, ip, jp) -> tuple[int, np.ndarray]:
    left = q_dagger_matrix(L, i, j)
    right = q_dagger_matrix(L, ip, jp).conj().T
    sign = -1 if dot2(i, j) ^ dot2(ip, jp) else 1
    return sign, (left * z_string(k)[None, :]) @ right


def _check_args(L, k, i, j, ip, jp):
    check_dense(L.n, what="oracle")
    return (check_bits(k, L.n, "k"), check_bits(i, L.D, "i"), check_bits(j, L.D, "j"),
            check_bits(ip, L.D, "i'"), check_bits(jp, L.D, "j'"))


def exact_cross_term(rho, L: LayeredDecomposition, k, i, j, ip, jp) -> float:
    """``(-1)^{i.j + i'.j'} Re Tr[rho Q^dag_{ij} Z^k Q_{i'j'}]`` on the relabelled register."""
    k, i, j, ip, jp = _check_args(L, k, i, j, ip, jp)
    sign, op = _cross_operator(L, k, i, j, ip, jp)
    return float(sign * np.real(np.trace(_density(rho) @ op)))


def cross_term_from_probabilities(rho, L: LayeredDecomposition, k, i, j, ip, jp) -> float:
    """Same quantity through the Hadamard-test success probability.

    ``rho`` is split into eigencomponents; for each pure component the
    probability of alpha = +1 is ``(1 + (-1)^{i.j+i'.j'} Re<psi|M|psi>)/2``
    and the mean of alpha is twice that minus one.
    """
    k, i, j, ip, jp = _check_args(L, k, i, j, ip, jp)
    sign, op = _cross_operator(L, k, i, j, ip, jp)
    r = _density(rho)
    vals, vecs = np.linalg.eigh((r + r.conj().T) / 2)
    total = 0.0
    for lam, psi in zip(vals, vecs.T):
        if lam < EIG_CUTOFF:
            continue
        p_plus = (1 + sign * np.real(np.vdot(psi, op @ psi))) / 2
        total += lam * (2 * p_plus - 1)
    return float(total)


def stabilizer_trace_from_cross_terms(rho, L: LayeredDecomposition, k) -> float:
    """``4^-D sum_{i,j,i',j'} cross term``; should equal ``Tr[rho s_k]``."""
    D = L.D
    quads = [(i, j, ip, jp) for i in all_bits(D) for j in all_bits(D) for ip in all_bits(D) for jp in all_bits(D)]
    return sum(exact_cross_term(rho, L, k, *q) for q in quads) / 4**D


def verify_split_identity(rho, L: LayeredDecomposition, k, i, j, ip, jp, noise: NoiseModel = IDEAL) -> float:
    """``|sum_l E[beta(l)] / 2 - exact cross term|`` from exact channel expectations."""
    check_dense(L.n, 8, "split-circuit check")
    k, i, j, ip, jp = _check_args(L, k, i, j, ip, jp)
    state = rho if isinstance(rho, QuantumState) else QuantumState.from_density(_density(rho))
    engine = CrossTermEngine(L, state, noise)
    return abs(engine.analytic_cross_term(k, (i, j, ip, jp)) - exact_cross_term(rho, L, k, i, j, ip, jp))


def verify_joint_identity(rho, L: LayeredDecomposition, k, i, j, ip, jp) -> float:
    """``|E[alpha] - exact cross term|`` for the unsplit Hadamard-test circuit."""
    k, i, j, ip, jp = _check_args(L, k, i, j, ip, jp)
    state = rho if isinstance(rho, QuantumState) else QuantumState.from_density(_density(rho))
    return abs(expected_alpha(L, state, k, i, j, ip, jp) - exact_cross_term(rho, L, k, i, j, ip, jp))


def explicit_budget(epsilon: float, delta: float, D: int) -> tuple[float, int]:
    """Unrounded and rounded T from ``16 c^2 / eps^2 * ln(10240 c^4 / (delta eps^4))``, c = 5 4^D + 1."""
    c = 5 * 4**D + 1
    raw = 16 * c**2 / epsilon**2 * math.log(10240 * c**4 / (delta * epsilon**4))
    return raw, math.ceil(raw)


def verify_budget_shape(epsilon: float, delta: float, D: int) -> dict:
    """Monotonicity and explicit-constant checks for the shot budget."""
    _, t, total = required_shots(epsilon, delta, D)
    _, t_explicit = explicit_budget(epsilon, delta, D)
    eps_up = min(1 - 1e-9, epsilon * 1.5)
    delta_up = min(1 - 1e-9, delta * 1.5)
    shape = (2 ** (12 * D) / epsilon**6) * (D + math.log(1 / (delta * epsilon**4))) ** 3
    checks = {
        "explicit_constants_match": t == t_explicit,
        "nonincreasing_in_epsilon": required_shots(eps_up, delta, D)[1] <= t,
        "nonincreasing_in_delta": required_shots(epsilon, delta_up, D)[1] <= t,
        "nondecreasing_in_D": required_shots(epsilon, delta, D + 1)[1] >= t,
        "total_is_8T3": total == 8 * t**3,
    }
    return {
        "epsilon": epsilon,
        "delta": delta,
        "D": D,
        "T": t,
        "total": total,
        "shape_ratio": total / shape,
        "checks": checks,
        "ok": all(checks.values()),
    }
