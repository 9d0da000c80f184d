import itertools

import numpy as np
import pytest

from conftest import circuit_with_cut
from dcverify.circuit import CZ, Circuit, circuit_unitary, linear_graph_state_circuit, random_circuit, single
from dcverify.partition import (
    count_crossings,
    decompose_circuit,
    find_min_cut,
    make_partition,
    relabel,
)
from dcverify._validation import PartitionError


def _brute_force_min(c):
    n = c.n_qubits
    best = None
    for m in range((n + 1) // 2, n):
        for side in itertools.combinations(range(1, n + 1), m):
            d = count_crossings(c, side)
            best = d if best is None else min(best, d)
    return best


def test_graph_state_cut():
    p = find_min_cut(linear_graph_state_circuit(4))
    assert p.denseness == 1 and p.m == 2 and p.side_a == (1, 2)
    assert p.to_dict() == {"m": 2, "side_a": [1, 2], "denseness": 1, "crossings": [[2, 3]]}


def test_no_cz_circuit_has_zero_denseness():
    c = Circuit(3, (single(1, "H"), single(2, "X")))
    p = find_min_cut(c)
    assert p.denseness == 0 and p.m == 2


def test_exact_matches_brute_force(rng):
    for _ in range(15):
        c = random_circuit(int(rng.integers(2, 7)), 14, rng, cz_fraction=0.5)
        assert find_min_cut(c).denseness == _brute_force_min(c)


def test_heuristic_never_worse_than_contiguous_seed(rng):
    for _ in range(10):
        c = random_circuit(6, 20, rng, cz_fraction=0.6)
        p = find_min_cut(c, "heuristic")
        assert p.denseness <= count_crossings(c, range(1, 4))
        assert 3 <= p.m <= 5


def test_balance_enforced():
    c = linear_graph_state_circuit(4)
    with pytest.raises(PartitionError, match="violates"):
        make_partition(c, [1])
    with pytest.raises(PartitionError):
        make_partition(c, [1, 2, 3, 4])
    with pytest.raises(PartitionError, match="duplicates"):
        make_partition(c, [1, 1, 2])


def test_single_qubit_cannot_be_cut():
    with pytest.raises(PartitionError):
        find_min_cut(Circuit(1))


def test_relabel_preserves_unitary_up_to_permutation(rng):
    c = random_circuit(4, 16, rng, cz_fraction=0.5)
    p = make_partition(c, [2, 4])
    r, mapping = relabel(c, p)
    assert mapping == {2: 1, 4: 2, 1: 3, 3: 4}
    assert np.isclose(abs(np.vdot(_permuted(circuit_unitary(c)[:, 0], mapping, 4), circuit_unitary(r)[:, 0])), 1)


def _permuted(psi, mapping, n):
    out = np.zeros_like(psi)
    for x in range(2**n):
        y = 0
        for old, new in mapping.items():
            y |= ((x >> (old - 1)) & 1) << (new - 1)
        out[y] = psi[x]
    return out


def test_layerize_structure(rng):
    c = circuit_with_cut(5, 3, 2, rng)
    _, L = decompose_circuit(c, side_a=[1, 2, 3])
    assert L.D == 2 and len(L.blocks_v) == 3 and len(L.blocks_w) == 3
    assert all(b.n_qubits == 3 for b in L.blocks_v) and all(b.n_qubits == 2 for b in L.blocks_w)
    for ca, cb in L.crossings:
        assert 1 <= ca <= 3 and 1 <= cb <= 2


def test_adjacent_crossings_leave_empty_blocks():
    c = Circuit(2, (CZ(1, 2), CZ(2, 1)))
    _, L = decompose_circuit(c)
    assert L.D == 2
    assert all(len(b) == 0 for b in L.blocks_v + L.blocks_w)
