"""The split-circuit fidelity estimator.

Three sampling levels: stabilizer index ``k`` (T1), cut quadruple
``(i, j, i', j')`` (T2) and, for every Pauli-basis setting ``l``, T3 shots
of the two split circuits. Each shot yields a +-1 value ``beta'``; for one
quadruple ``sum_l mean(beta'(l)) / 2`` estimates the cross term
``(-1)^{i.j + i'.j'} Re Tr[rho Q^dag_{ij} Z^k Q_{i'j'}]``.

Register layout for the joint simulations: data qubits 1..n (A side at
1..m after relabelling), the first block's ancilla at n+1 and the qubit
prepared in ``C_l|0>`` for the second block at n+2.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .circuit import FIXED_GATES, Circuit, Single
from .decompose import Reduction, all_bits, build_half_operator, find_reduction
from .partition import LayeredDecomposition, decompose_circuit
from .sim import (
    DM_MAX_QUBITS,
    IDEAL,
    NoiseModel,
    QuantumState,
    apply_controlled,
    apply_gate,
    apply_readout_flips,
    clifford_gates,
    cyclic_shift,
    ignores_outcome,
    marginal,
    measure_z,
    partial_trace,
    permute_register,
    prepare_state,
    ALL_SETTINGS,
)
from ._validation import (
    BudgetExceeded,
    NonCliffordError,
    bits_to_str,
    check_bits,
    check_open_unit,
    dot2,
)
from . import report

MODES = ("sampled", "enumerated", "analytic")
_INV = {"S": "Sdg", "Sdg": "S", "H": "H", "X": "X"}


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorConfig:
    """Run parameters.

    ``mode``: ``sampled`` draws k and quadruples at random (T1, T2) and runs
    T3 shots per setting; ``enumerated`` averages exactly over every k and
    quadruple but still samples T3 shots; ``analytic`` replaces the shots
    by exact outcome probabilities. A zero T means "take T from the
    shot-budget theorem". ``noise`` acts on the verification circuits,
    ``state_noise`` on the preparation of rho_out.
    """

    epsilon: float = 0.1
    delta: float = 0.05
    t1: int = 0
    t2: int = 0
    t3: int = 0
    mode: str = "enumerated"
    seed: int = 0
    noise: NoiseModel = IDEAL
    state_noise: NoiseModel = IDEAL
    cut_mode: str = "exact"
    reduce: str = "auto"
    max_shots: int = 10**9
    max_terms: int = 2**16
    record_shots: bool = False

    def __post_init__(self):
        check_open_unit(self.epsilon, "epsilon")
        check_open_unit(self.delta, "delta")
        for name in ("t1", "t2", "t3"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reduce not in ("auto", "on", "off"):
            raise ValueError("reduce must be 'auto', 'on' or 'off'")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("noise", "state_noise")}
        out["noise"] = self.noise.to_dict()
        out["state_noise"] = self.state_noise.to_dict()
        return out


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


# -- shot budget ----------------------------------------------------------------

def required_shots(epsilon: float, delta: float, D: int) -> tuple[float, int, int]:
    """``(eps_h, T, 8 T^3)`` with ``eps_h = eps / (2 (5 4^D + 1))`` and
    ``T = ceil(4 / eps_h^2 * ln(640 / (delta eps_h^4)))``."""
    check_open_unit(epsilon, "epsilon")
    check_open_unit(delta, "delta")
    if int(D) < 0:
        raise ValueError("D must be non-negative")
    eps_h = epsilon / (2 * (5 * 4 ** int(D) + 1))
    t = math.ceil(4 / eps_h**2 * math.log(640 / (delta * eps_h**4)))
    return eps_h, t, 8 * t**3


# -- records --------------------------------------------------------------------

@dataclass(frozen=True)
class ShotRecord:
    k: tuple[int, ...]
    i: tuple[int, ...]
    j: tuple[int, ...]
    ip: tuple[int, ...]
    jp: tuple[int, ...]
    l: tuple[int, int, int]
    o: int
    b: int
    z: tuple[int, ...]
    beta: int

    def setting(self) -> tuple:
        return (self.k, self.i, self.j, self.ip, self.jp, self.l)


def beta_value(k, i, j, ip, jp, l, o: int, b: int, z) -> int:
    alpha = 1 if (dot2(z, k) == (dot2(i, j) ^ dot2(ip, jp) ^ b)) else -1
    return alpha if ignores_outcome(l) else alpha * (-1) ** o


@dataclass
class ShotBatch:
    """T3 shots of one setting, stored as joint outcome indices over n+2 bits."""

    n: int
    k: tuple[int, ...]
    quad: tuple
    l: tuple[int, int, int]
    outcomes: np.ndarray

    def records(self) -> Iterator[ShotRecord]:
        i, j, ip, jp = self.quad
        n = self.n
        for x in self.outcomes.tolist():
            z = tuple((x >> q) & 1 for q in range(n))
            o, b = (x >> n) & 1, (x >> (n + 1)) & 1
            yield ShotRecord(self.k, i, j, ip, jp, self.l, o, b, z, beta_value(self.k, i, j, ip, jp, self.l, o, b, z))


@dataclass
class FidelityEstimate:
    f_est: float
    shots_used: int
    mode: str
    t1: int
    t2: int
    t3: int
    denseness: int
    m: int
    n: int
    seed: int
    reduced: bool
    hoeffding_half_width: float
    config: dict
    partial: list = field(default_factory=list)
    wall_time: float = 0.0
    batches: list = field(default_factory=list, repr=False)

    @property
    def out_of_range(self) -> bool:
        return not 0.0 <= self.f_est <= 1.0

    def records(self) -> Iterator[ShotRecord]:
        for batch in self.batches:
            yield from batch.records()


# -- circuit pieces -------------------------------------------------------------

def _named(q: int, name: str) -> Single:
    return Single(q, FIXED_GATES[name], name)


def _rotate_out(state, anc: int, l, noise, rng):
    """``C_l^dagger`` on the ancilla so a Z measurement reads the C_l basis."""
    for name in reversed(clifford_gates(l)):
        state = apply_gate(state, _named(anc, _INV[name]), noise, None, rng)
    return state


def _prepare_setting(state, anc: int, l, noise, rng):
    """``C_l`` on a qubit sitting in |0>."""
    for name in clifford_gates(l):
        state = apply_gate(state, _named(anc, name), noise, None, rng)
    return state


class HalfCircuits:
    """Cached inverse half-operators ``V_i^dagger`` and ``W_j^dagger``."""

    def __init__(self, L: LayeredDecomposition):
        self.L = L
        self._v: dict = {}
        self._w: dict = {}

    def v_dag(self, i) -> Circuit:
        i = tuple(i)
        if i not in self._v:
            self._v[i] = build_half_operator(self.L, "A", i).circuit.inverse()
        return self._v[i]

    def w_dag(self, j) -> Circuit:
        j = tuple(j)
        if j not in self._w:
            self._w[j] = build_half_operator(self.L, "B", j).circuit.inverse()
        return self._w[j]


def block_one(state, L: LayeredDecomposition, halves: HalfCircuits, i, ip, anc: int, noise, rng=None,
              qubit_map=None):
    """H, X, Lambda(V_i^dag), X, Lambda(V_i'^dag) with the ancilla as control."""
    state = apply_gate(state, _named(anc, "H"), noise, None, rng)
    state = apply_controlled(state, anc, halves.v_dag(i), True, noise, qubit_map, rng)
    return apply_controlled(state, anc, halves.v_dag(ip), False, noise, qubit_map, rng)


def block_two(state, L: LayeredDecomposition, halves: HalfCircuits, j, jp, anc: int, noise, rng=None,
              qubit_map=None):
    """X, Lambda(W_j^dag), X, Lambda(W_j'^dag), H on the prepared qubit."""
    state = apply_controlled(state, anc, halves.w_dag(j), True, noise, qubit_map, rng)
    state = apply_controlled(state, anc, halves.w_dag(jp), False, noise, qubit_map, rng)
    return apply_gate(state, _named(anc, "H"), noise, None, rng)


# -- parity helpers ---------------------------------------------------------

@lru_cache(maxsize=32)
def _parity_table(nbits: int) -> np.ndarray:
    par = np.zeros(2**nbits, dtype=np.int8)
    idx = np.arange(2**nbits)
    for q in range(nbits):
        par ^= ((idx >> q) & 1).astype(np.int8)
    return par


def _mask(bits: Sequence[int]) -> int:
    return sum(b << q for q, b in enumerate(bits))


def beta_signs(n: int, k, quad, l) -> np.ndarray:
    """beta for every joint outcome index over n+2 bits."""
    i, j, ip, jp = quad
    nbits = n + 2
    idx = np.arange(2**nbits)
    par = _parity_table(nbits)
    zpar = par[idx & _mask(k)].astype(np.int64)
    b = (idx >> (n + 1)) & 1
    flag = zpar ^ (dot2(i, j) ^ dot2(ip, jp)) ^ b
    beta = 1 - 2 * flag
    if not ignores_outcome(l):
        beta = beta * (1 - 2 * ((idx >> n) & 1))
    return beta.astype(float)


def alpha_signs(n: int, k, quad) -> np.ndarray:
    """alpha for every joint outcome over n data bits plus the ancilla (bit n+1)."""
    i, j, ip, jp = quad
    idx = np.arange(2 ** (n + 1))
    par = _parity_table(n + 1)
    zpar = par[idx & _mask(k)].astype(np.int64)
    b = (idx >> n) & 1
    return (1 - 2 * (zpar ^ (dot2(i, j) ^ dot2(ip, jp)) ^ b)).astype(float)


# -- the engine -----------------------------------------------------------------

def _check_quad(L: LayeredDecomposition, k, i, j, ip, jp):
    return (
        check_bits(k, L.n, "k"),
        (check_bits(i, L.D, "i"), check_bits(j, L.D, "j"), check_bits(ip, L.D, "i'"), check_bits(jp, L.D, "j'")),
    )


class CrossTermEngine:
    """Outcome distributions of the split circuits for a fixed rho_out.

    ``rho`` lives on the relabelled register; None means "run the target
    under ``state_noise``". Distributions do not depend on k, so they are
    cached per (quadruple, setting). Registers beyond the density-matrix
    cap fall back to shot-by-shot statevector trajectories.
    """

    def __init__(self, L: LayeredDecomposition, rho: QuantumState | None, noise: NoiseModel = IDEAL,
                 state_noise: NoiseModel = IDEAL):
        self.L = L
        self.n = L.n
        self.noise = noise
        self.state_noise = state_noise
        self.exact = self.n + 2 <= DM_MAX_QUBITS
        if rho is None and self.exact:
            rho = prepare_state(L.circuit, state_noise, "dm")
        self.rho = rho.to_density() if rho is not None and self.exact else rho
        self.halves = HalfCircuits(L)
        self._dists: dict = {}
        self._block1: dict = {}
        self._block1_cap = max(8, int(2**28 // (16 * 4 ** (self.n + 2))))

    def _after_block_one(self, i, ip, l) -> QuantumState:
        key = (i, ip, l)
        if key not in self._block1:
            if len(self._block1) >= self._block1_cap:
                self._block1.clear()
            n = self.n
            state = self.rho.tensor(QuantumState.zeros(2, "dm"))
            state = block_one(state, self.L, self.halves, i, ip, n + 1, self.noise)
            self._block1[key] = _rotate_out(state, n + 1, l, self.noise, None)
        return self._block1[key]

    def distribution(self, quad, l) -> np.ndarray:
        """Joint outcome probabilities over (z, o, b); index bit q-1 = z_q, bit n = o, bit n+1 = b."""
        quad = tuple(tuple(x) for x in quad)
        l = tuple(l)
        key = (quad, l)
        if key not in self._dists:
            if not self.exact:
                raise BudgetExceeded(f"{self.n + 2}-qubit joint register exceeds the density-matrix cap", 0)
            i, j, ip, jp = quad
            n, m = self.n, self.L.m
            state = self._after_block_one(i, ip, l)
            state = _prepare_setting(state, n + 2, l, self.noise, None)
            qmap = {q: m + q for q in range(1, n - m + 1)}
            state = block_two(state, self.L, self.halves, j, jp, n + 2, self.noise, None, qmap)
            probs = apply_readout_flips(state.probabilities(), range(1, n + 3), n + 2, self.noise.readout_flip)
            self._dists[key] = probs / probs.sum()
        return self._dists[key]

    def expected_beta(self, k, quad, l) -> float:
        return float(self.distribution(quad, l) @ beta_signs(self.n, k, quad, l))

    def analytic_cross_term(self, k, quad) -> float:
        return sum(self.expected_beta(k, quad, l) for l in ALL_SETTINGS) / 2

    def sample_setting(self, k, quad, l, shots: int, rng: np.random.Generator) -> ShotBatch:
        if self.exact:
            outcomes = rng.choice(2 ** (self.n + 2), size=shots, p=self.distribution(quad, l))
        else:
            cfg = EstimatorConfig(state_noise=self.state_noise)
            outcomes = np.array([
                _record_index(run_beta_shot(self.L, k, *quad, l, cfg, rng, noise=self.noise, rho=self.rho,
                                            halves=self.halves), self.n)
                for _ in range(shots)
            ], dtype=np.int64)
        return ShotBatch(self.n, tuple(k), tuple(tuple(x) for x in quad), tuple(l), np.asarray(outcomes, dtype=np.int64))

    def sampled_cross_term(self, k, quad, shots: int, seed: int, key: tuple, batches: list | None = None) -> float:
        total = 0.0
        for li, l in enumerate(ALL_SETTINGS):
            batch = self.sample_setting(k, quad, l, shots, stream(seed, 3, *key, li))
            signs = beta_signs(self.n, k, quad, l)[batch.outcomes]
            total += signs.sum() / (2 * shots)
            if batches is not None:
                batches.append(batch)
        return total


def _record_index(rec: ShotRecord, n: int) -> int:
    return _mask(rec.z) | (rec.o << n) | (rec.b << (n + 1))


# -- single shots -----------------------------------------------------------------

def _drop_measured(state: QuantumState, measured: Sequence[int], keep: Sequence[int], outcome) -> QuantumState:
    """Remove collapsed qubits from a post-measurement state."""
    if state.kind == "dm":
        return partial_trace(state, keep)
    n = state.n
    t = state.data.reshape((2,) * n)
    index = [slice(None)] * n
    for q, b in zip(measured, outcome):
        index[n - q] = b
    return QuantumState(np.ascontiguousarray(t[tuple(index)]).reshape(-1), "sv")


def run_beta_shot(L: LayeredDecomposition, k, i, j, ip, jp, l, config: EstimatorConfig | None = None,
                  rng: np.random.Generator | None = None, *, noise: NoiseModel | None = None,
                  rho: QuantumState | None = None, halves: HalfCircuits | None = None) -> ShotRecord:
    """One run of the two split circuits on a fresh copy of rho_out.

    Block one acts on the A-side data plus an ancilla and ends with a C_l
    basis measurement of that ancilla (o) and Z measurements of the data.
    Block two starts from a qubit prepared in C_l|0>, placed after the B-side
    data by a cyclic register shift, and ends with Z measurements (b, z_B).
    """
    k, quad = _check_quad(L, k, i, j, ip, jp)
    l = tuple(l)
    i, j, ip, jp = quad
    config = config or EstimatorConfig()
    noise = config.noise if noise is None else noise
    rng = rng if rng is not None else stream(config.seed, 9)
    halves = halves or HalfCircuits(L)
    n, m = L.n, L.m
    nb = n - m
    if rho is None:
        kind = "dm" if n + 2 <= DM_MAX_QUBITS else "sv"
        state = prepare_state(L.circuit, config.state_noise, kind, rng)
    else:
        state = rho if rho.kind == "sv" or n + 2 > DM_MAX_QUBITS else rho.to_density()
    # block one on (A data, ancilla at n+1)
    state = state.tensor(QuantumState.zeros(1, state.kind))
    state = block_one(state, L, halves, i, ip, n + 1, noise, rng)
    state = _rotate_out(state, n + 1, l, noise, rng)
    measured = tuple(range(1, m + 1)) + (n + 1,)
    bits, state = measure_z(state, measured, rng, noise.readout_flip)
    z_a, o = bits[:m], bits[m]
    true_bits = _true_outcome(state, measured)
    state = _drop_measured(state, measured, range(m + 1, n + 1), true_bits)
    # block two: fresh qubit first, then shift it behind the B data
    fresh = _prepare_setting(QuantumState.zeros(1, state.kind), 1, l, noise, rng)
    local = fresh.tensor(state)
    shift_back = {q: p for p, q in cyclic_shift(nb + 1).items()}
    local = permute_register(local, shift_back)
    local = block_two(local, L, halves, j, jp, nb + 1, noise, rng)
    bits, _ = measure_z(local, tuple(range(1, nb + 2)), rng, noise.readout_flip)
    z_b, b = bits[:nb], bits[nb]
    z = tuple(z_a) + tuple(z_b)
    return ShotRecord(k, i, j, ip, jp, l, o, b, z, beta_value(k, i, j, ip, jp, l, o, b, z))


def _true_outcome(state: QuantumState, qubits: Sequence[int]) -> tuple[int, ...]:
    """Read the (deterministic) values of just-collapsed qubits."""
    p = state.probabilities()
    x = int(np.argmax(p))
    return tuple((x >> (q - 1)) & 1 for q in qubits)


# -- joint (unsplit) circuit ------------------------------------------------------

def alpha_distribution(L: LayeredDecomposition, rho: QuantumState, quad, noise: NoiseModel = IDEAL,
                       halves: HalfCircuits | None = None) -> np.ndarray:
    """Outcome probabilities of the (n+1)-qubit Hadamard-test circuit."""
    halves = halves or HalfCircuits(L)
    i, j, ip, jp = quad
    n, m = L.n, L.m
    anc = n + 1
    qmap_b = {q: m + q for q in range(1, n - m + 1)}
    state = rho.to_density().tensor(QuantumState.zeros(1, "dm"))
    state = apply_gate(state, _named(anc, "H"), noise)
    state = apply_gate(state, _named(anc, "X"), noise)
    state = apply_controlled(state, anc, halves.v_dag(i), False, noise)
    state = apply_controlled(state, anc, halves.w_dag(j), False, noise, qmap_b)
    state = apply_gate(state, _named(anc, "X"), noise)
    state = apply_controlled(state, anc, halves.v_dag(ip), False, noise)
    state = apply_controlled(state, anc, halves.w_dag(jp), False, noise, qmap_b)
    state = apply_gate(state, _named(anc, "H"), noise)
    probs = apply_readout_flips(state.probabilities(), range(1, n + 2), n + 1, noise.readout_flip)
    return probs / probs.sum()


def expected_alpha(L: LayeredDecomposition, rho: QuantumState, k, i, j, ip, jp, noise: NoiseModel = IDEAL) -> float:
    k, quad = _check_quad(L, k, i, j, ip, jp)
    return float(alpha_distribution(L, rho, quad, noise) @ alpha_signs(L.n, k, quad))


def run_alpha_shot(L: LayeredDecomposition, k, i, j, ip, jp, config: EstimatorConfig | None = None,
                   rng: np.random.Generator | None = None, rho: QuantumState | None = None) -> int:
    """One shot of the unsplit circuit; returns alpha in {-1, +1}."""
    k, quad = _check_quad(L, k, i, j, ip, jp)
    config = config or EstimatorConfig()
    rng = rng if rng is not None else stream(config.seed, 8)
    if rho is None:
        rho = prepare_state(L.circuit, config.state_noise)
    dist = alpha_distribution(L, rho, quad, config.noise)
    x = int(rng.choice(dist.size, p=dist))
    return int(alpha_signs(L.n, k, quad)[x])


# -- cross terms and the full protocol -----------------------------------------------

def _prepared_rho(target: Circuit, L: LayeredDecomposition, config: EstimatorConfig, rho) -> QuantumState | None:
    if rho is None:
        if L.n + 2 > DM_MAX_QUBITS:
            return None  # shots re-prepare rho_out as trajectories
        state = prepare_state(target, config.state_noise, "dm")
    elif isinstance(rho, QuantumState):
        state = rho.to_density()
    else:
        state = QuantumState.from_density(rho)
    if state.n != target.n_qubits:
        raise ValueError("rho_out does not match the target register")
    return permute_register(state, L.mapping)


def estimate_cross_term(target: Circuit | LayeredDecomposition, k, i, j, ip, jp, T3: int = 0,
                        config: EstimatorConfig | None = None, rng_key: tuple = (0, 0),
                        rho=None) -> float:
    """Estimate one cross term from the split circuits.

    ``analytic`` mode returns ``sum_l E[beta(l)] / 2`` exactly; otherwise
    T3 shots are drawn per setting. Passing a LayeredDecomposition skips
    the cut search and takes ``rho`` on the relabelled register.
    """
    config = config or EstimatorConfig()
    if isinstance(target, LayeredDecomposition):
        L = target
        if rho is None or isinstance(rho, QuantumState):
            state = rho
        else:
            state = QuantumState.from_density(rho)
    else:
        _, L = decompose_circuit(target, config.cut_mode)
        state = _prepared_rho(target, L, config, rho)
    k, quad = _check_quad(L, k, i, j, ip, jp)
    engine = CrossTermEngine(L, state, config.noise, config.state_noise)
    if config.mode == "analytic":
        return engine.analytic_cross_term(k, quad)
    if T3 < 1:
        raise ValueError("sampled cross terms need T3 >= 1")
    return engine.sampled_cross_term(k, quad, T3, config.seed, rng_key)


def resolve_shot_counts(config: EstimatorConfig, D: int) -> tuple[int, int, int]:
    """Fill zero shot counts from the budget theorem (T1 = T2 = T3 = T)."""
    if config.t1 and config.t2 and config.t3:
        return config.t1, config.t2, config.t3
    _, t, _ = required_shots(config.epsilon, config.delta, D)
    return config.t1 or t, config.t2 or t, config.t3 or t


def planned_shots(config: EstimatorConfig, n: int, D: int, reduced: bool) -> tuple[int, int]:
    """``(copies of rho_out, cross terms evaluated)`` for a run."""
    t1, t2, t3 = resolve_shot_counts(config, D)
    per_k = 1 if reduced else (t2 if config.mode == "sampled" else 16**D)
    n_k = t1 if config.mode == "sampled" else 2**n
    terms = n_k * per_k
    shots = 0 if config.mode == "analytic" else terms * 8 * t3
    return shots, terms


def _band(config: EstimatorConfig, n: int, D: int, reduced: bool, t1: int, t2: int, t3: int) -> float:
    """Hoeffding half-width of F_est at confidence 1 - delta."""
    delta = config.delta
    if config.mode == "analytic":
        return 0.0
    scale = 1 if reduced else 4**D
    if config.mode == "enumerated":
        n_terms = 2**n * (1 if reduced else 16**D)
        w = scale / (2**n * (1 if reduced else 16**D))
        return report.weighted_hoeffding(8 * n_terms * w**2 / t3, delta)
    # sampled: split delta over the three levels and add the half-widths
    per_k = 1 if reduced else t2
    h1 = report.hoeffding_band(t1, 1 - delta / 3, 2.0)
    h2 = 0.0 if reduced else scale * report.hoeffding_band(t2, 1 - delta / 3, 2.0)
    h3 = report.weighted_hoeffding(8 * scale**2 / (t1 * per_k * t3), delta / 3)
    return h1 + h2 + h3


def algorithm1(target: Circuit, config: EstimatorConfig | None = None, rho=None, *,
               side_a=None, decomposition: tuple | None = None) -> FidelityEstimate:
    """Estimate ``<psi_t| rho_out |psi_t>`` with the split circuits.

    ``rho`` (density matrix on the original qubit labels) defaults to the
    target circuit run under ``config.state_noise``. The estimate is not
    clamped to [0, 1].
    """
    config = config or EstimatorConfig()
    start = time.perf_counter()
    if decomposition is None:
        decomposition = decompose_circuit(target, config.cut_mode, side_a)
    partition, L = decomposition
    n, D = L.n, L.D
    reduction: Reduction | None = None
    if config.reduce != "off":
        reduction = find_reduction(L)
        if reduction is None and config.reduce == "on":
            raise ValueError("the decomposition does not admit the i' = j' = 0 reduction")
    reduced = reduction is not None
    t1, t2, t3 = resolve_shot_counts(config, D)
    shots, terms = planned_shots(config, n, D, reduced)
    if config.mode != "sampled" and terms > config.max_terms:
        raise BudgetExceeded(f"enumeration needs {terms} cross terms, above max_terms={config.max_terms}", terms)
    if shots > config.max_shots:
        raise BudgetExceeded(f"run needs {shots} copies of rho_out, above max_shots={config.max_shots}", shots)

    state = _prepared_rho(target, L, config, rho)
    engine = CrossTermEngine(L, state, config.noise, config.state_noise)
    batches: list | None = [] if config.record_shots else None

    if config.mode == "sampled":
        ks = [tuple(int(b) for b in row) for row in stream(config.seed, 1).integers(0, 2, size=(t1, n))]
    else:
        ks = all_bits(n)
    every_quad = None if reduced or config.mode == "sampled" else [
        (i, j, ip, jp) for i in all_bits(D) for j in all_bits(D) for ip in all_bits(D) for jp in all_bits(D)
    ]
    if every_quad is not None and engine.exact:
        # fill distributions in block-one order to keep the cache warm
        for q in sorted(every_quad, key=lambda q: (q[0], q[2])):
            for l in ALL_SETTINGS:
                engine.distribution(q, l)

    partial = []
    values = []
    for a, k in enumerate(ks):
        if reduced:
            quads = [reduction.quadruple(k)]
        elif config.mode == "sampled":
            draws = stream(config.seed, 2, a).integers(0, 2, size=(t2, 4, D))
            quads = [tuple(tuple(int(x) for x in part) for part in row) for row in draws]
        else:
            quads = every_quad
        terms_k = []
        for b, quad in enumerate(quads):
            if config.mode == "analytic":
                terms_k.append(engine.analytic_cross_term(k, quad))
            else:
                terms_k.append(engine.sampled_cross_term(k, quad, t3, config.seed, (a, b), batches))
        tr_sk = float(np.mean(terms_k)) * (1 if reduced else 4**D)
        partial.append([bits_to_str(k), tr_sk])
        values.append(tr_sk)
    f_est = float(np.mean(values))
    return FidelityEstimate(
        f_est=f_est,
        shots_used=shots,
        mode=config.mode,
        t1=t1 if config.mode == "sampled" else 0,
        t2=t2 if config.mode == "sampled" and not reduced else 0,
        t3=t3 if config.mode != "analytic" else 0,
        denseness=D,
        m=L.m,
        n=n,
        seed=int(config.seed),
        reduced=reduced,
        hoeffding_half_width=_band(config, n, D, reduced, t1, t2, t3),
        config=config.to_dict(),
        partial=partial,
        wall_time=time.perf_counter() - start,
        batches=batches or [],
    )


# -- direct Pauli estimator -------------------------------------------------------

_PAULI = {"I": FIXED_GATES["I"], "X": FIXED_GATES["X"], "Y": FIXED_GATES["Y"], "Z": FIXED_GATES["Z"]}


def _local_pauli(labels: Sequence[str]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for lab in labels:  # first label = local LSB
        out = np.kron(_PAULI[lab], out)
    return out


def _identify_pauli(mat: np.ndarray, width: int) -> tuple[int, tuple[str, ...]]:
    for labels in itertools.product("IXYZ", repeat=width):
        coeff = np.trace(_local_pauli(labels).conj().T @ mat) / 2**width
        if abs(abs(coeff) - 1) < 1e-9:
            if abs(coeff.imag) > 1e-9:
                raise AssertionError("Hermitian stabilizer picked up an imaginary phase")
            return (1 if coeff.real > 0 else -1), labels
    raise NonCliffordError("gate does not map Paulis to Paulis")


def stabilizer_pauli(target: Circuit, k) -> tuple[int, tuple[str, ...]]:
    """``(sign, labels)`` with ``s_k = sign * P_1 x ... x P_n`` for Clifford targets."""
    n = target.n_qubits
    k = check_bits(k, n, "k")
    labels = ["Z" if b else "I" for b in k]
    sign = 1
    for g in target.gates:
        qubits = g.qubits
        if all(labels[q - 1] == "I" for q in qubits):
            continue
        local = _local_pauli([labels[q - 1] for q in qubits])
        mat = g.matrix if isinstance(g, Single) else np.diag([1, 1, 1, -1]).astype(complex)
        s, new = _identify_pauli(mat @ local @ mat.conj().T, len(qubits))
        sign *= s
        for q, lab in zip(qubits, new):
            labels[q - 1] = lab
    return sign, tuple(labels)


def is_clifford(target: Circuit) -> bool:
    """True when every single-qubit gate maps X and Z to signed Paulis (CZ always does)."""
    try:
        for g in target.gates:
            if isinstance(g, Single):
                for lab in ("X", "Z"):
                    _identify_pauli(g.matrix @ _PAULI[lab] @ g.matrix.conj().T, 1)
    except NonCliffordError:
        return False
    return True


def _basis_change(state: QuantumState, labels: Sequence[str], noise, rng) -> QuantumState:
    for q, lab in enumerate(labels, start=1):
        if lab == "X":
            state = apply_gate(state, _named(q, "H"), noise, None, rng)
        elif lab == "Y":
            state = apply_gate(state, _named(q, "Sdg"), noise, None, rng)
            state = apply_gate(state, _named(q, "H"), noise, None, rng)
    return state


def direct_pauli_distribution(target: Circuit, k, config: EstimatorConfig | None = None, rho=None):
    """``(sign, measured qubits, distribution over them)`` for the direct estimator."""
    config = config or EstimatorConfig()
    if not is_clifford(target):
        raise NonCliffordError("direct Pauli estimation needs a Clifford target")
    sign, labels = stabilizer_pauli(target, k)
    support = tuple(q for q, lab in enumerate(labels, start=1) if lab != "I")
    if rho is None:
        state = prepare_state(target, config.state_noise, "dm")
    else:
        state = rho if isinstance(rho, QuantumState) else QuantumState.from_density(rho)
    state = _basis_change(state.to_density(), labels, config.noise, None)
    n = target.n_qubits
    probs = apply_readout_flips(state.probabilities(), support, n, config.noise.readout_flip)
    return sign, support, marginal(probs, support, n)


def direct_pauli_expectation(target: Circuit, k, config: EstimatorConfig | None = None, rho=None) -> float:
    sign, support, dist = direct_pauli_distribution(target, k, config, rho)
    if not support:
        return float(sign)
    par = _parity_table(len(support))
    return float(sign * dist @ (1 - 2 * par.astype(float)))


def direct_pauli_estimate(target: Circuit, k, shots: int, config: EstimatorConfig | None = None,
                          rng: np.random.Generator | None = None, rho=None) -> float:
    """Empirical mean of the +-1 product of local Pauli outcomes for ``s_k``."""
    config = config or EstimatorConfig()
    sign, support, dist = direct_pauli_distribution(target, k, config, rho)
    if not support:
        return float(sign)
    rng = rng if rng is not None else stream(config.seed, 5, _mask(k))
    outcomes = rng.choice(dist.size, size=shots, p=dist / dist.sum())
    par = _parity_table(len(support))[outcomes]
    return float(sign * np.mean(1 - 2 * par.astype(float)))


def direct_fidelity_estimate(target: Circuit, shots: int, config: EstimatorConfig | None = None,
                             rho=None, analytic: bool = False) -> tuple[float, float]:
    """Average the direct Pauli estimates over every k; returns ``(value, half-width)``."""
    config = config or EstimatorConfig()
    n = target.n_qubits
    total = 0.0
    for k in all_bits(n):
        if not any(k):
            total += 1.0
        elif analytic:
            total += direct_pauli_expectation(target, k, config, rho)
        else:
            total += direct_pauli_estimate(target, k, shots, config, stream(config.seed, 5, _mask(k)), rho)
    value = total / 2**n
    if analytic:
        return value, 0.0
    n_terms = 2**n - 1
    weight = 1 / 2**n
    return value, report.weighted_hoeffding(n_terms * shots * (2 * weight / shots) ** 2, config.delta)
