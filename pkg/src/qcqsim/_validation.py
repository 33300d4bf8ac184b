"""Input validation helpers shared by the estimators and free functions."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

UNITARY_ATOL = 1e-12
HERMITIAN_ATOL = 1e-10


class DualFrameError(ValueError):
    """A coefficient matrix fails the generalized-inverse condition."""


def check_square(matrix, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    return arr


def check_unitary(U, n_qubits: int | None = None, atol: float = UNITARY_ATOL) -> np.ndarray:
    """Return ``U`` as a complex array after checking ``U^dagger U = I``.

    The tolerance is applied to the maximum absolute entry of ``U^dagger U - I``.
    """
    U = check_square(np.asarray(U, dtype=complex), "unitary")
    if n_qubits is not None and U.shape[0] != 2**n_qubits:
        raise ValueError(f"unitary of dimension {U.shape[0]} does not act on {n_qubits} qubit(s)")
    dev = np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()
    if dev > atol:
        raise ValueError(f"matrix is not unitary (max deviation {dev:.3e})")
    return U


def check_hermitian(O, atol: float = HERMITIAN_ATOL, name: str = "observable") -> np.ndarray:
    O = check_square(np.asarray(O, dtype=complex), name)
    dev = np.abs(O - O.conj().T).max()
    if dev > atol:
        raise ValueError(f"{name} is not Hermitian (max deviation {dev:.3e})")
    return O


def check_strength(lam: float, name: str = "lambda") -> float:
    lam = float(lam)
    if not (0.0 <= lam <= 1.0) or np.isnan(lam):
        raise ValueError(f"{name} must lie in [0, 1], got {lam}")
    return lam


def check_qubits(qubits: Iterable[int], n_qubits: int) -> tuple[int, ...]:
    qs = tuple(int(q) for q in qubits)
    if len(set(qs)) != len(qs):
        raise ValueError(f"target qubits must be distinct, got {qs}")
    for q in qs:
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit {q} out of range for {n_qubits} qubit(s)")
    return qs


def check_probabilities(p: Sequence[float], atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    return np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    Accepts ``None``, an int, a :class:`~numpy.random.SeedSequence` or an
    existing generator (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
