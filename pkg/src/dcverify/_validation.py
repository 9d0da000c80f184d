"""Input validation helpers and the package's exception types."""
from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np

UNITARY_TOL = 1e-10
DEFAULT_DENSE_CAP = 10
UNITARY_CAP = 12


class CircuitError(ValueError):
    """Malformed or invalid circuit description."""


class PartitionError(ValueError):
    pass


class DenseCapError(ValueError):
    """Register too large for a dense representation."""


class BudgetExceeded(RuntimeError):
    """The requested shot budget is above the configured cap."""

    def __init__(self, message: str, total: int):
        super().__init__(message)
        self.total = total


class NonCliffordError(ValueError):
    pass


def dense_cap() -> int:
    """Oracle register cap, overridable through ``DCVERIFY_DENSE_CAP``."""
    raw = os.environ.get("DCVERIFY_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"DCVERIFY_DENSE_CAP must be an integer, got {raw!r}") from exc


def check_dense(n: int, cap: int | None = None, what: str = "register") -> None:
    cap = dense_cap() if cap is None else cap
    if n > cap:
        raise DenseCapError(f"{what} of {n} qubits exceeds the dense cap of {cap}")


def check_open_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_bits(bits: str | Iterable[int], length: int | None = None, name: str = "bits") -> tuple[int, ...]:
    """Normalise a bit string (``"0110"`` or a sequence of 0/1) to a tuple."""
    if isinstance(bits, str):
        if any(ch not in "01" for ch in bits):
            raise ValueError(f"{name} must be a 0/1 string, got {bits!r}")
        out = tuple(int(ch) for ch in bits)
    else:
        out = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in out):
            raise ValueError(f"{name} must contain only 0 and 1")
    if length is not None and len(out) != length:
        raise ValueError(f"{name} must have length {length}, got {len(out)}")
    return out


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def dot2(a: Sequence[int], b: Sequence[int]) -> int:
    """Bitwise inner product modulo 2."""
    return sum(x & y for x, y in zip(a, b)) & 1


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    eye = np.eye(matrix.shape[0])
    return float(np.max(np.abs(matrix @ matrix.conj().T - eye))) <= tol
