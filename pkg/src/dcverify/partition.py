"""Balanced bipartitions minimising crossing CZs, and the layered normal form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .circuit import CZ, Circuit, Single
from ._validation import PartitionError

EXACT_MAX_QUBITS = 20


@dataclass(frozen=True)
class Partition:
    """Qubit bipartition A:B of a circuit.

    ``crossing`` holds ``(gate position, c, t)`` for every CZ with one end on
    each side, in circuit order, using the circuit's own qubit labels.
    """

    n: int
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]
    crossing: tuple[tuple[int, int, int], ...]

    @property
    def m(self) -> int:
        return len(self.side_a)

    @property
    def denseness(self) -> int:
        return len(self.crossing)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "side_a": list(self.side_a),
            "denseness": self.denseness,
            "crossings": [[c, t] for _, c, t in self.crossing],
        }


def _balance_range(n: int) -> range:
    return range(math.ceil(n / 2), n)


def make_partition(c: Circuit, side_a) -> Partition:
    """Partition ``c`` with an explicit A side; enforces ceil(n/2) <= m <= n-1."""
    n = c.n_qubits
    side_list = [int(q) for q in side_a]
    a = tuple(sorted(set(side_list)))
    if len(a) != len(side_list):
        raise PartitionError("side_a contains duplicates")
    if any(not 1 <= q <= n for q in a):
        raise PartitionError("side_a contains out-of-range qubits")
    if len(a) not in _balance_range(n):
        raise PartitionError(f"|A| = {len(a)} violates ceil(n/2) <= m <= n-1 for n = {n}")
    b = tuple(q for q in range(1, n + 1) if q not in a)
    in_a = set(a)
    crossing = tuple(
        (pos, g.c, g.t)
        for pos, g in enumerate(c.gates)
        if isinstance(g, CZ) and ((g.c in in_a) != (g.t in in_a))
    )
    return Partition(n, a, b, crossing)


def _cz_edges(c: Circuit) -> dict[tuple[int, int], int]:
    edges: dict[tuple[int, int], int] = {}
    for g in c.gates:
        if isinstance(g, CZ):
            key = (min(g.c, g.t), max(g.c, g.t))
            edges[key] = edges.get(key, 0) + 1
    return edges


def count_crossings(c: Circuit, side_a) -> int:
    in_a = set(side_a)
    return sum(1 for g in c.gates if isinstance(g, CZ) and ((g.c in in_a) != (g.t in in_a)))


def _exact(c: Circuit) -> tuple[int, ...]:
    n = c.n_qubits
    if n > EXACT_MAX_QUBITS:
        raise PartitionError(f"exact cut search is limited to {EXACT_MAX_QUBITS} qubits; use heuristic mode")
    masks = np.arange(2**n, dtype=np.int64)
    pop = np.zeros_like(masks)
    for q in range(n):
        pop += (masks >> q) & 1
    lo = math.ceil(n / 2)
    cost = np.zeros_like(masks)
    for (u, v), w in _cz_edges(c).items():
        cost += w * (((masks >> (u - 1)) ^ (masks >> (v - 1))) & 1)
    valid = (pop >= lo) & (pop <= n - 1)
    best = cost[valid].min()
    for m in _balance_range(n):
        hits = masks[valid & (cost == best) & (pop == m)]
        if hits.size:
            sides = [tuple(q + 1 for q in range(n) if (int(h) >> q) & 1) for h in hits]
            return min(sides)
    raise AssertionError("no valid bipartition")  # unreachable for n >= 2


def _heuristic(c: Circuit) -> tuple[int, ...]:
    n = c.n_qubits
    m = math.ceil(n / 2)
    seed_a = set(range(1, m + 1))
    graph = nx.Graph()
    graph.add_nodes_from(range(1, n + 1))
    for (u, v), w in _cz_edges(c).items():
        graph.add_edge(u, v, weight=w)
    seed_b = set(range(m + 1, n + 1))
    part_a, part_b = nx.algorithms.community.kernighan_lin_bisection(
        graph, partition=(seed_a, seed_b), weight="weight", seed=0
    )
    a = part_a if len(part_a) >= len(part_b) else part_b
    if count_crossings(c, a) > count_crossings(c, seed_a):
        a = seed_a
    return tuple(sorted(a))


def find_min_cut(c: Circuit, mode: str = "exact") -> Partition:
    """Balanced bipartition with the fewest crossing CZs.

    ``exact`` enumerates every split with ceil(n/2) <= m <= n-1 and breaks
    ties by smallest m, then lexicographically smallest A. ``heuristic``
    runs Kernighan-Lin swaps from the contiguous split {1..ceil(n/2)}.
    """
    if c.n_qubits < 2:
        raise PartitionError("need at least 2 qubits to cut")
    if mode == "exact":
        side_a = _exact(c)
    elif mode == "heuristic":
        side_a = _heuristic(c)
    else:
        raise ValueError(f"unknown cut mode {mode!r}")
    return make_partition(c, side_a)


def relabel(c: Circuit, p: Partition) -> tuple[Circuit, dict[int, int]]:
    """Move side A onto qubits 1..m and side B onto m+1..n (order preserved)."""
    if p.n != c.n_qubits or sorted(p.side_a + p.side_b) != list(range(1, c.n_qubits + 1)):
        raise PartitionError("partition does not match the circuit register")
    mapping = {old: new for new, old in enumerate(p.side_a + p.side_b, start=1)}
    gates = []
    for g in c.gates:
        if isinstance(g, Single):
            gates.append(Single(mapping[g.qubit], g.matrix, g.label, g.artifact))
        else:
            gates.append(CZ(mapping[g.c], mapping[g.t]))
    return Circuit(c.n_qubits, tuple(gates), c.name), mapping


@dataclass(frozen=True)
class LayeredDecomposition:
    """``U = (v[D] x w[D]) CZ(c_D,t_D) ... CZ(c_1,t_1) (v[0] x w[0])``.

    ``blocks_v`` are circuits on the m A-side qubits, ``blocks_w`` on the
    n-m B-side qubits (local indices), and ``crossings`` holds the local
    pair (c_k, t_k) for each cut CZ in order.
    """

    m: int
    n: int
    blocks_v: tuple[Circuit, ...]
    blocks_w: tuple[Circuit, ...]
    crossings: tuple[tuple[int, int], ...]
    circuit: Circuit
    mapping: dict = field(default_factory=dict)

    @property
    def D(self) -> int:
        return len(self.crossings)


def layerize(c: Circuit, p: Partition, mapping: dict[int, int] | None = None) -> LayeredDecomposition:
    """Scan ``c`` (already relabelled so A = 1..m) into alternating block pairs."""
    n, m = c.n_qubits, p.m
    if p.n != n:
        raise PartitionError("partition does not match circuit")
    nb = n - m
    blocks_v: list[list] = [[]]
    blocks_w: list[list] = [[]]
    crossings: list[tuple[int, int]] = []
    for g in c.gates:
        if isinstance(g, Single):
            if g.qubit <= m:
                blocks_v[-1].append(g)
            else:
                blocks_w[-1].append(Single(g.qubit - m, g.matrix, g.label, g.artifact))
            continue
        lo, hi = min(g.c, g.t), max(g.c, g.t)
        if hi <= m:
            blocks_v[-1].append(g)
        elif lo > m:
            blocks_w[-1].append(CZ(g.c - m, g.t - m))
        else:
            crossings.append((lo, hi - m))
            blocks_v.append([])
            blocks_w.append([])
    if len(crossings) != p.denseness:
        raise PartitionError("crossing count disagrees with partition; was the circuit relabelled?")
    return LayeredDecomposition(
        m=m,
        n=n,
        blocks_v=tuple(Circuit(m, tuple(b)) for b in blocks_v),
        blocks_w=tuple(Circuit(nb, tuple(b)) for b in blocks_w),
        crossings=tuple(crossings),
        circuit=c,
        mapping=dict(mapping) if mapping is not None else {q: q for q in range(1, n + 1)},
    )


def decompose_circuit(c: Circuit, mode: str = "exact", side_a=None) -> tuple[Partition, LayeredDecomposition]:
    """Cut, relabel and layerize in one call."""
    p = find_min_cut(c, mode) if side_a is None else make_partition(c, side_a)
    relabelled, mapping = relabel(c, p)
    p_rel = make_partition(relabelled, range(1, p.m + 1))
    return p, layerize(relabelled, p_rel, mapping)
