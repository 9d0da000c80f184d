import json
import math

import numpy as np
import pytest

from dcverify.circuit import (
    CZ,
    Circuit,
    Single,
    circuit_to_dict,
    circuit_unitary,
    gate_matrix,
    linear_graph_state_circuit,
    load_circuit,
    parse_circuit,
    random_circuit,
    serialize_circuit,
    single,
    target_state,
)
from dcverify._validation import CircuitError, DenseCapError


def test_graph_state_two_qubits():
    psi = target_state(linear_graph_state_circuit(2))
    assert np.allclose(psi, np.array([1, 1, 1, -1]) / 2)


def test_qubit_one_is_least_significant():
    psi = target_state(Circuit(3, (single(1, "X"),)))
    assert np.argmax(np.abs(psi)) == 1
    psi = target_state(Circuit(3, (single(3, "X"),)))
    assert np.argmax(np.abs(psi)) == 4


def test_unitary_matches_statevector(rng):
    c = random_circuit(4, 20, rng)
    assert np.allclose(circuit_unitary(c)[:, 0], target_state(c))


def test_inverse_gives_identity(rng):
    c = random_circuit(3, 15, rng)
    u = circuit_unitary(c.then(c.inverse()))
    assert np.allclose(u, np.eye(8))


def test_rotation_labels():
    assert np.allclose(gate_matrix("Rz(0.3)"), gate_matrix("Rz", 0.3))
    assert np.allclose(gate_matrix("Rx", math.pi), -1j * gate_matrix("X"))
    with pytest.raises(CircuitError):
        gate_matrix("Rz")
    with pytest.raises(CircuitError):
        gate_matrix("Foo")


def test_non_unitary_rejected():
    with pytest.raises(CircuitError, match="not unitary"):
        Single(1, np.array([[1, 1], [0, 1]]))


def test_cz_self_loop_rejected():
    with pytest.raises(CircuitError, match="control equals target"):
        CZ(2, 2)


def test_out_of_range_qubit():
    with pytest.raises(CircuitError, match="outside"):
        Circuit(2, (single(3, "H"),))


def test_dense_cap():
    with pytest.raises(DenseCapError):
        circuit_unitary(Circuit(13))


def test_json_round_trip(rng):
    c = random_circuit(3, 12, rng)
    c2 = parse_circuit(serialize_circuit(c))
    assert np.allclose(circuit_unitary(c), circuit_unitary(c2))


def test_json_named_gates():
    doc = {"n": 2, "gates": [{"kind": "single", "q": 1, "label": "H"},
                             {"kind": "single", "q": 2, "label": "Rz", "theta": 0.5},
                             {"kind": "cz", "c": 1, "t": 2}]}
    c = parse_circuit(json.dumps(doc))
    assert c.n_cz == 1
    assert "matrix" not in circuit_to_dict(c)["gates"][0]
    assert np.allclose(c.gates[1].matrix, gate_matrix("Rz", 0.5))


@pytest.mark.parametrize("text, message", [
    ("{not json", "malformed JSON"),
    ('{"gates": []}', "'n'"),
    ('{"n": 2, "gates": [{"kind": "cz", "c": 1, "t": 3}]}', "outside"),
    ('{"n": 2, "gates": [{"kind": "cz", "c": 1, "t": 1}]}', "control equals target"),
    ('{"n": 2, "gates": [{"kind": "single", "q": 1, "matrix": [[[1,0],[1,0]],[[0,0],[1,0]]]}]}', "not unitary"),
    ('{"n": 2, "gates": [{"kind": "toffoli"}]}', "unknown kind"),
    ('{"n": 2, "gates": [{"kind": "single", "q": 1}]}', "label or a matrix"),
])
def test_json_validation(text, message):
    with pytest.raises(CircuitError, match=message):
        parse_circuit(text)


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(serialize_circuit(linear_graph_state_circuit(4)))
    c = load_circuit(path)
    assert c.n_qubits == 4 and c.n_cz == 3
