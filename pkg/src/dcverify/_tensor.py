"""Low-level tensor kernels shared by the dense matrix and simulator paths.

Qubits are 1-based and qubit 1 is the least significant bit of a basis
index, so in a ``(2,) * n`` reshape qubit ``q`` lives on axis ``n - q``.
Local operator matrices follow the same convention over the qubit list
they are applied to: ``qubits[0]`` is the local least significant bit.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def apply_left(arr: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Return ``(mat on qubits) @ arr`` for ``arr`` with leading dimension 2**n."""
    k = len(qubits)
    shape = arr.shape
    t = arr.reshape((2,) * n + (-1,))
    m = np.asarray(mat).reshape((2,) * (2 * k))
    axes = [n - q for q in reversed(qubits)]
    t = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(shape)


def conjugate(rho: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """``M rho M^dagger`` for a local operator ``M``."""
    tmp = apply_left(rho, mat, qubits, n)
    return apply_left(tmp.conj().T, mat, qubits, n).conj().T


def embed(mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Dense 2**n matrix of a local operator."""
    return apply_left(np.eye(2**n, dtype=complex), mat, qubits, n)


def bit_of(index: np.ndarray | int, qubit: int):
    return (index >> (qubit - 1)) & 1


def z_string(k: Sequence[int]) -> np.ndarray:
    """Diagonal of ``prod_i Z_i^{k_i}`` as a real vector."""
    n = len(k)
    idx = np.arange(2**n)
    parity = np.zeros(2**n, dtype=np.int64)
    for q, kq in enumerate(k, start=1):
        if kq:
            parity ^= bit_of(idx, q)
    return 1.0 - 2.0 * parity


def replace_with_mixed(rho: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Trace out one qubit of a density matrix and put back I/2 in its place."""
    dim = rho.shape[0]
    t = rho.reshape((2,) * (2 * n))
    a = n - qubit
    t = np.moveaxis(t, [a, a + n], [0, 1])
    reduced = 0.5 * (t[0, 0] + t[1, 1])
    out = np.zeros_like(t)
    out[0, 0] = reduced
    out[1, 1] = reduced
    out = np.moveaxis(out, [0, 1], [a, a + n])
    return out.reshape(dim, dim)


def permute_axes(arr: np.ndarray, mapping: dict[int, int], n: int, density: bool) -> np.ndarray:
    """Relabel qubits so that old qubit ``q`` becomes new qubit ``mapping[q]``."""
    axes = [0] * n
    for old, new in mapping.items():
        axes[n - new] = n - old
    if density:
        t = arr.reshape((2,) * (2 * n))
        t = np.transpose(t, axes + [a + n for a in axes])
        return t.reshape(2**n, 2**n)
    t = arr.reshape((2,) * n)
    return np.transpose(t, axes).reshape(2**n)
