import math

import numpy as np
from hypothesis import given, settings, strategies as st

from dcverify.circuit import CZ, Circuit, Single, parse_circuit, random_unitary_1q, serialize_circuit
from dcverify.decompose import reconstruct_check
from dcverify.estimate import CrossTermEngine, beta_signs, required_shots
from dcverify.partition import count_crossings, decompose_circuit, find_min_cut
from dcverify.report import emit_histograms, hoeffding_band, outcome_bin
from dcverify.sim import NoiseModel, prepare_state
from dcverify.oracle import exact_cross_term


@st.composite
def circuits(draw, n_min=2, n_max=4, max_gates=10):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(draw(st.integers(0, max_gates))):
        if draw(st.booleans()):
            c, t = draw(st.lists(st.integers(1, n), min_size=2, max_size=2, unique=True))
            gates.append(CZ(c, t))
        else:
            gates.append(Single(draw(st.integers(1, n)), random_unitary_1q(rng), "U"))
    return Circuit(n, tuple(gates))


@settings(max_examples=40, deadline=None)
@given(circuits(max_gates=8))
def test_reconstruction_property(c):
    _, L = decompose_circuit(c)
    assert reconstruct_check(L) < 1e-9


@settings(max_examples=40, deadline=None)
@given(circuits(n_max=6, max_gates=14))
def test_min_cut_is_balanced_and_minimal_over_contiguous(c):
    p = find_min_cut(c)
    n = c.n_qubits
    assert math.ceil(n / 2) <= p.m <= n - 1
    assert p.denseness <= count_crossings(c, range(1, math.ceil(n / 2) + 1))
    assert set(p.side_a) | set(p.side_b) == set(range(1, n + 1))


@settings(max_examples=30, deadline=None)
@given(circuits(max_gates=8))
def test_json_round_trip_property(c):
    c2 = parse_circuit(serialize_circuit(c))
    assert len(c2) == len(c)
    for a, b in zip(c.gates, c2.gates):
        assert type(a) is type(b)
        if isinstance(a, Single):
            assert np.allclose(a.matrix, b.matrix)


@settings(max_examples=15, deadline=None)
@given(circuits(max_gates=6), st.integers(0, 2**32 - 1))
def test_split_cross_term_matches_oracle(c, seed):
    _, L = decompose_circuit(c)
    if L.D > 2:
        return
    rng = np.random.default_rng(seed)
    rho = prepare_state(L.circuit, NoiseModel(p1=0.05, gamma=0.02))
    k = tuple(int(b) for b in rng.integers(0, 2, L.n))
    quad = tuple(tuple(int(b) for b in rng.integers(0, 2, L.D)) for _ in range(4))
    engine = CrossTermEngine(L, rho)
    assert abs(engine.analytic_cross_term(k, quad) - exact_cross_term(rho, L, k, *quad)) < 1e-9


@settings(max_examples=15, deadline=None)
@given(circuits(max_gates=6), st.integers(0, 2**16))
def test_sampled_cross_terms_are_bounded(c, seed):
    _, L = decompose_circuit(c)
    if L.D > 2:
        return
    engine = CrossTermEngine(L, prepare_state(L.circuit), NoiseModel(p1=0.02))
    zero = (0,) * L.D
    k = (1,) * L.n
    quad = (zero, zero, zero, zero)
    batches = []
    value = engine.sampled_cross_term(k, quad, 16, seed, (0, 0), batches)
    assert abs(value) <= 4
    for batch in batches:
        signs = beta_signs(L.n, k, quad, batch.l)
        assert set(np.unique(signs)) <= {-1.0, 1.0}
    recs = [r for b in batches for r in b.records()]
    assert sum(t.total for t in emit_histograms(recs)) == len(recs) == 8 * 16


@given(st.integers(1, 10**6), st.floats(0.01, 0.99), st.floats(0.1, 4))
def test_hoeffding_band_monotone(T, conf, width):
    assert hoeffding_band(T + 1, conf, width) <= hoeffding_band(T, conf, width)
    assert hoeffding_band(T, min(conf + 0.005, 0.995), width) >= hoeffding_band(T, conf, width)


@given(st.floats(0.01, 0.95), st.floats(0.01, 0.95), st.integers(0, 3))
def test_budget_monotone(eps, delta, D):
    t = required_shots(eps, delta, D)[1]
    assert required_shots(min(eps * 1.5, 0.99), delta, D)[1] <= t
    assert required_shots(eps, delta, D + 1)[1] >= t
    assert required_shots(eps, delta, D)[0] < eps


@given(st.integers(0, 1), st.lists(st.integers(0, 1), min_size=1, max_size=6), st.integers(0, 1))
def test_bin_encoding_is_injective(b, z, o):
    code = outcome_bin(b, z, o)
    n = len(z)
    assert code >> (n + 1) == b and code & 1 == o
    assert [(code >> (q + 1)) & 1 for q in range(n)] == z
