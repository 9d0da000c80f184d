import math

import numpy as np
import pytest

import dcverify.estimate as est_mod
from conftest import circuit_with_cut, random_min_cut_circuit
from dcverify.circuit import CZ, Circuit, linear_graph_state_circuit, single
from dcverify.estimate import (
    CrossTermEngine,
    EstimatorConfig,
    ShotBatch,
    algorithm1,
    beta_value,
    direct_fidelity_estimate,
    direct_pauli_estimate,
    direct_pauli_expectation,
    estimate_cross_term,
    expected_alpha,
    is_clifford,
    planned_shots,
    required_shots,
    run_alpha_shot,
    run_beta_shot,
    stabilizer_pauli,
    stream,
)
from dcverify.oracle import exact_cross_term, exact_fidelity
from dcverify.partition import decompose_circuit
from dcverify.sim import NoiseModel, QuantumState, prepare_state
from dcverify._validation import BudgetExceeded, NonCliffordError

# golden values computed once by direct formula evaluation, then frozen
GOLDEN_T_D0 = 45774  # eps = delta = 0.5
GOLDEN_T_D1 = 23721016  # eps = 0.1, delta = 0.05


def test_required_shots_golden():
    eps_h, t, total = required_shots(0.5, 0.5, 0)
    assert eps_h == pytest.approx(1 / 24)
    assert t == GOLDEN_T_D0 and total == 8 * GOLDEN_T_D0**3
    eps_h, t, _ = required_shots(0.1, 0.05, 1)
    assert eps_h == pytest.approx(0.1 / 42)
    assert t == GOLDEN_T_D1


@pytest.mark.parametrize("args", [(0, 0.5, 0), (0.5, 1.0, 0), (0.5, 0.5, -1)])
def test_required_shots_rejects(args):
    with pytest.raises(ValueError):
        required_shots(*args)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        EstimatorConfig(t3=-1)
    with pytest.raises(ValueError):
        EstimatorConfig(mode="fast")
    with pytest.raises(ValueError):
        EstimatorConfig(reduce="maybe")


def test_beta_value_rule():
    k, i, j = (1, 1), (1,), (1,)
    zero = (0,)
    # parity z.k = 0, i.j = 1, b = 1 -> alpha = +1
    assert beta_value(k, i, j, zero, zero, (0, 0, 0), 1, 1, (1, 1)) == 1
    assert beta_value(k, i, j, zero, zero, (1, 0, 0), 1, 1, (1, 1)) == -1
    assert beta_value(k, i, j, zero, zero, (0, 0, 1), 1, 1, (1, 1)) == 1
    assert beta_value(k, i, j, zero, zero, (0, 0, 0), 0, 0, (1, 1)) == -1


def test_trivial_d0_cross_term():
    c = Circuit(2, (single(1, "H"), single(2, "X")))
    _, L = decompose_circuit(c)
    rho = prepare_state(L.circuit)
    assert CrossTermEngine(L, rho).analytic_cross_term((0, 0), ((), (), (), ())) == pytest.approx(1.0, abs=1e-12)


def test_graph_state_instance_matches_oracle(graph2_layered):
    L = graph2_layered
    rho = prepare_state(L.circuit)
    quad = ((1,), (1,), (0,), (0,))
    value = estimate_cross_term(L, (1, 1), *quad, config=EstimatorConfig(mode="analytic"), rho=rho)
    assert value == pytest.approx(exact_cross_term(rho, L, (1, 1), *quad), abs=1e-9)
    assert value == pytest.approx(1.0, abs=1e-9)


def test_identical_settings_give_identical_distributions(rng):
    _, _, L = random_min_cut_circuit(rng, (3, 4), 2)
    engine = CrossTermEngine(L, prepare_state(L.circuit, NoiseModel(p1=0.05)), NoiseModel(p1=0.01, p2=0.02))
    zero = (0,) * L.D
    ones = (1,) * L.D
    quad = (ones, zero, zero, ones)
    assert np.array_equal(engine.distribution(quad, (0, 0, 0)), engine.distribution(quad, (1, 1, 0)))


def test_split_equals_joint_equals_oracle(rng):
    for _ in range(6):
        _, _, L = random_min_cut_circuit(rng, (2, 4), 2)
        rho = prepare_state(L.circuit, NoiseModel(p1=0.04, p2=0.04, gamma=0.02))
        engine = CrossTermEngine(L, rho)
        k = tuple(int(b) for b in rng.integers(0, 2, L.n))
        quad = tuple(tuple(int(b) for b in rng.integers(0, 2, L.D)) for _ in range(4))
        exact = exact_cross_term(rho, L, k, *quad)
        assert engine.analytic_cross_term(k, quad) == pytest.approx(exact, abs=1e-9)
        assert expected_alpha(L, rho, k, *quad) == pytest.approx(exact, abs=1e-9)


def test_alpha_always_one_for_equal_operators(graph2_layered):
    g = np.random.default_rng(0)
    zero = (0,)
    for _ in range(20):
        assert run_alpha_shot(graph2_layered, (0, 0), zero, (1,), zero, (1,), rng=g) == 1


def test_beta_shot_distribution_matches_engine():
    c = linear_graph_state_circuit(4)
    _, L = decompose_circuit(c)
    noise = NoiseModel(p1=0.03, p2=0.03, readout_flip=0.02)
    cfg = EstimatorConfig(noise=noise, state_noise=NoiseModel(p1=0.02))
    engine = CrossTermEngine(L, prepare_state(L.circuit, cfg.state_noise), noise)
    k, quad, l = (1, 0, 1, 1), ((1,), (0,), (0,), (1,)), (1, 0, 1)
    expected = engine.expected_beta(k, quad, l)
    g = stream(3, 0)
    shots = [run_beta_shot(L, k, *quad, l, cfg, g).beta for _ in range(1500)]
    # beta is +-1: 4-sigma binomial band
    assert abs(np.mean(shots) - expected) < 4 / math.sqrt(1500)


def test_beta_shot_trajectory_path(monkeypatch):
    c = linear_graph_state_circuit(2)
    _, L = decompose_circuit(c)
    noise = NoiseModel(p1=0.05, p2=0.05)
    cfg = EstimatorConfig(noise=noise, state_noise=noise)
    engine = CrossTermEngine(L, prepare_state(L.circuit, noise), noise)
    k, quad, l = (1, 1), ((1,), (1,), (0,), (0,)), (0, 1, 0)
    expected = engine.expected_beta(k, quad, l)
    monkeypatch.setattr(est_mod, "DM_MAX_QUBITS", 2)
    g = stream(4, 0)
    recs = [run_beta_shot(L, k, *quad, l, cfg, g) for _ in range(2000)]
    assert abs(np.mean([r.beta for r in recs]) - expected) < 4 / math.sqrt(2000)


def test_shot_batch_records_agree_with_signs(graph2_layered):
    engine = CrossTermEngine(graph2_layered, prepare_state(graph2_layered.circuit))
    quad = ((1,), (0,), (0,), (0,))
    batch = engine.sample_setting((0, 1), quad, (1, 0, 0), 50, stream(0, 1))
    assert isinstance(batch, ShotBatch)
    for rec, x in zip(batch.records(), batch.outcomes):
        assert rec.beta == int(est_mod.beta_signs(2, (0, 1), quad, (1, 0, 0))[x])


def test_algorithm1_ideal_and_mixed(rng):
    c = linear_graph_state_circuit(4)
    cfg = EstimatorConfig(mode="analytic", reduce="off")
    assert algorithm1(c, cfg).f_est == pytest.approx(1.0, abs=1e-8)
    mixed = QuantumState.maximally_mixed(4)
    assert algorithm1(c, cfg, mixed).f_est == pytest.approx(1 / 16, abs=1e-8)


def test_algorithm1_reduced_and_full_agree_under_state_noise():
    c = linear_graph_state_circuit(4)
    noise = NoiseModel(p1=0.03, p2=0.05)
    full = algorithm1(c, EstimatorConfig(mode="analytic", reduce="off", state_noise=noise))
    red = algorithm1(c, EstimatorConfig(mode="analytic", reduce="on", state_noise=noise))
    exact = exact_fidelity(prepare_state(c, noise), c)
    assert red.reduced and not full.reduced
    assert full.f_est == pytest.approx(exact, abs=1e-10)
    assert red.f_est == pytest.approx(exact, abs=1e-10)


def test_algorithm1_partial_sums_average_to_estimate(graph2):
    est = algorithm1(graph2, EstimatorConfig(mode="analytic"))
    assert [p[0] for p in est.partial] == ["00", "01", "10", "11"]
    assert np.mean([p[1] for p in est.partial]) == pytest.approx(est.f_est)


def test_algorithm1_noisy_graph_state_enumerated():
    c = linear_graph_state_circuit(2)
    noise = NoiseModel(p1=0.01, p2=0.01)
    est = algorithm1(c, EstimatorConfig(t3=10_000, state_noise=noise, seed=7))
    assert abs(est.f_est - exact_fidelity(prepare_state(c, noise), c)) < 0.05


def test_sampled_mode_runs_and_is_deterministic():
    c = linear_graph_state_circuit(2)
    cfg = EstimatorConfig(mode="sampled", t1=6, t2=3, t3=64, seed=11, reduce="off", record_shots=True)
    a = algorithm1(c, cfg)
    b = algorithm1(c, cfg)
    assert a.f_est == b.f_est
    assert [r for r in a.records()] == [r for r in b.records()]
    assert a.shots_used == 6 * 3 * 8 * 64 == sum(len(x.outcomes) for x in a.batches)
    assert a.hoeffding_half_width > 0
    assert algorithm1(c, EstimatorConfig(mode="sampled", t1=6, t2=3, t3=64, seed=12, reduce="off")).f_est != a.f_est


def test_estimate_is_not_clamped():
    c = linear_graph_state_circuit(2)
    values = [algorithm1(c, EstimatorConfig(t3=4, seed=s)).f_est for s in range(40)]
    assert max(values) > 1.0


def test_budget_refusal():
    c = linear_graph_state_circuit(4)
    with pytest.raises(BudgetExceeded) as info:
        algorithm1(c, EstimatorConfig(epsilon=0.1, delta=0.05, t3=0, reduce="off"))
    assert info.value.total > 10**9
    shots, terms = planned_shots(EstimatorConfig(t3=1024, reduce="off"), 4, 1, False)
    assert terms == 16 * 16 and shots == terms * 8 * 1024
    with pytest.raises(BudgetExceeded):
        algorithm1(c, EstimatorConfig(mode="analytic", max_terms=10, reduce="off"))


def test_reduce_on_requires_structure(rng):
    c = circuit_with_cut(3, 2, 2, rng)
    with pytest.raises(ValueError, match="reduction"):
        algorithm1(c, EstimatorConfig(mode="analytic", reduce="on"), side_a=[1, 2])


def test_streams_are_independent_of_order():
    a = stream(5, 3, 1, 2).integers(0, 1000, 5)
    stream(5, 3, 0, 0).integers(0, 1000, 5)
    assert np.array_equal(a, stream(5, 3, 1, 2).integers(0, 1000, 5))


# -- direct estimator -----------------------------------------------------------

def test_stabilizer_pauli_graph_state(graph2):
    assert stabilizer_pauli(graph2, (0, 1)) == (1, ("Z", "X"))
    assert stabilizer_pauli(graph2, (1, 0)) == (1, ("X", "Z"))
    assert stabilizer_pauli(graph2, (1, 1)) == (1, ("Y", "Y"))


def test_stabilizer_pauli_sign():
    c = Circuit(1, (single(1, "X"),))
    assert stabilizer_pauli(c, (1,)) == (-1, ("Z",))


def test_direct_estimator(graph2):
    assert direct_pauli_estimate(graph2, (0, 0), 10) == 1.0
    assert direct_pauli_estimate(graph2, (1, 0), 100) == 1.0
    assert direct_pauli_expectation(graph2, (1, 1)) == pytest.approx(1.0)
    mixed = QuantumState.maximally_mixed(2)
    values = [direct_pauli_estimate(graph2, (1, 1), 2000, rng=stream(s, 0), rho=mixed) for s in range(5)]
    assert all(abs(v) < 4 / math.sqrt(2000) for v in values)


def test_direct_fidelity_matches_oracle_under_noise():
    c = linear_graph_state_circuit(4)
    cfg = EstimatorConfig(state_noise=NoiseModel(p1=0.02, p2=0.02))
    value, width = direct_fidelity_estimate(c, 1, cfg, analytic=True)
    assert width == 0.0
    assert value == pytest.approx(exact_fidelity(prepare_state(c, cfg.state_noise), c), abs=1e-10)


def test_direct_rejects_non_clifford():
    c = Circuit(2, (single(1, "T"), CZ(1, 2)))
    assert not is_clifford(c)
    with pytest.raises(NonCliffordError):
        direct_pauli_estimate(c, (1, 0), 10)
