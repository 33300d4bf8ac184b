"""Dense density-matrix simulation.

Qubit 0 is the most significant bit of the computational-basis index. The
array-level helpers (``apply_unitary_array`` and friends) accept an optional
stack of operators in the leading axis; the :class:`DensityMatrix` wrappers
check physical invariants and are meant for the public API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import (
    check_hermitian,
    check_probabilities,
    check_qubits,
    check_random_state,
    check_strength,
    check_unitary,
)

MAX_QUBITS = 12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)


def _n_from_dim(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _apply_left(t: np.ndarray, op: np.ndarray, axes: tuple) -> np.ndarray:
    """Contract the input legs of ``op`` (shape ``(2,)*2k``) into ``axes`` of ``t``."""
    k = len(axes)
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_unitary_array(mat: np.ndarray, U: np.ndarray, qubits, n: int) -> np.ndarray:
    """``U mat U^dagger`` with ``U`` acting on ``qubits``; ``mat`` may be a stack."""
    k = len(qubits)
    batch = mat.shape[:-2]
    b = len(batch)
    t = mat.reshape(batch + (2,) * (2 * n))
    Ut = np.asarray(U, dtype=complex).reshape((2,) * (2 * k))
    t = _apply_left(t, Ut, tuple(b + q for q in qubits))
    t = _apply_left(t, Ut.conj(), tuple(b + n + q for q in qubits))
    return t.reshape(mat.shape)


def depolarize_array(mat: np.ndarray, qubit: int, lam: float, n: int) -> np.ndarray:
    """Single-qubit depolarizing channel in Kraus form on ``qubit``."""
    if lam == 0.0:
        return mat
    out = (4 - 3 * lam) / 4 * mat
    for P in PAULIS:
        out = out + lam / 4 * apply_unitary_array(mat, P, (qubit,), n)
    return out


def depolarize_operator(op: np.ndarray, lam: float) -> np.ndarray:
    """Depolarize every qubit of a small operator (stack allowed) with strength ``lam``."""
    if lam == 0.0:
        return op
    n = _n_from_dim(op.shape[-1])
    for q in range(n):
        op = depolarize_array(op, q, lam, n)
    return op


def _split(mat: np.ndarray, qubits, n: int) -> np.ndarray:
    """Reorder ``mat`` as ``[s, rest, s, rest]`` with ``s = qubits`` (batch preserved)."""
    batch = mat.shape[:-2]
    b = len(batch)
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    perm = list(range(b)) + [b + q for q in order] + [b + n + q for q in order]
    t = mat.reshape(batch + (2,) * (2 * n)).transpose(perm)
    ds, dr = 2 ** len(qubits), 2 ** len(rest)
    return t.reshape(batch + (ds, dr, ds, dr))


def partial_trace_array(mat: np.ndarray, keep, n: int) -> np.ndarray:
    """Reduced operator on ``keep`` (in the given order); trailing batch axes not supported."""
    keep = tuple(keep)
    t = _split(mat, keep, n)
    return np.einsum("...iaja->...ij", t)


def compose_array(sub: np.ndarray, rest: np.ndarray, qubits, n: int) -> np.ndarray:
    """Operator equal to ``sub`` on ``qubits`` tensored with ``rest`` on the others.

    Either argument may carry one leading batch axis.
    """
    others = [q for q in range(n) if q not in qubits]
    order = list(qubits) + others
    full = np.einsum("...ij,...kl->...ikjl", sub, rest)
    batch = full.shape[:-4]
    b = len(batch)
    t = full.reshape(batch + (2,) * (2 * n))
    inv = np.argsort(order)
    perm = list(range(b)) + [b + int(i) for i in inv] + [b + n + int(i) for i in inv]
    d = 2**n
    return t.transpose(perm).reshape(batch + (d, d))


def conditional_rest_array(mat: np.ndarray, elements: np.ndarray, qubits, n: int) -> np.ndarray:
    """``Tr_s[(M_a (x) I) mat]`` for every element ``M_a``; shape ``(D, d_rest, d_rest)``."""
    t = _split(mat, tuple(qubits), n)
    return np.einsum("aji,irjq->arq", elements, t)


def embed_operator(op: np.ndarray, qubits, n: int) -> np.ndarray:
    """Extend an operator on ``qubits`` by the identity on the remaining qubits."""
    rest = np.eye(2 ** (n - len(qubits)), dtype=complex)
    return compose_array(np.asarray(op, dtype=complex), rest, tuple(qubits), n)


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing strengths for gates, interface measurement and repreparation.

    ``unit`` acts on both qubits after every CNOT (gates synthesized from
    CNOTs receive it once per CNOT), ``meas`` on interface qubits right before
    the interface measurement, ``reprep`` on interface qubits right after
    repreparation.
    """

    unit: float = 0.0
    meas: float = 0.0
    reprep: float = 0.0

    def __post_init__(self):
        for name in ("unit", "meas", "reprep"):
            object.__setattr__(self, name, check_strength(getattr(self, name), name))

    @property
    def is_noiseless(self) -> bool:
        return self.unit == self.meas == self.reprep == 0.0


NOISELESS = NoiseModel()


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """An ``n_qubits``-qubit density operator stored as a dense matrix."""

    data: np.ndarray
    n_qubits: int

    def __post_init__(self):
        d = 2**self.n_qubits
        if self.data.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix for {self.n_qubits} qubits")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    @classmethod
    def from_array(cls, mat) -> "DensityMatrix":
        mat = np.asarray(mat, dtype=complex)
        return cls(mat, _n_from_dim(mat.shape[0]))

    def check(self, atol: float = 1e-10, pos_atol: float = 1e-8) -> "DensityMatrix":
        """Raise if the matrix is not Hermitian, unit-trace and positive."""
        check_hermitian(self.data, atol, "density matrix")
        tr = np.trace(self.data).real
        if abs(tr - 1) > atol:
            raise ValueError(f"density matrix has trace {tr}")
        if np.linalg.eigvalsh(self.data).min() < -pos_atol:
            raise ValueError("density matrix is not positive semidefinite")
        return self


def _check_n(n: int) -> int:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must lie in [1, {MAX_QUBITS}], got {n}")
    return int(n)


def init_state(n_qubits: int) -> DensityMatrix:
    """The all-zero product state on ``n_qubits`` qubits (at most 12)."""
    n = _check_n(n_qubits)
    mat = np.zeros((2**n, 2**n), dtype=complex)
    mat[0, 0] = 1
    return DensityMatrix(mat, n)


def apply_gate(rho: DensityMatrix, U, qubits) -> DensityMatrix:
    qubits = check_qubits(qubits, rho.n_qubits)
    U = check_unitary(U, len(qubits))
    return DensityMatrix(apply_unitary_array(rho.data, U, qubits, rho.n_qubits), rho.n_qubits)


def apply_depolarizing(rho: DensityMatrix, qubit: int, lam: float) -> DensityMatrix:
    (qubit,) = check_qubits((qubit,), rho.n_qubits)
    lam = check_strength(lam)
    return DensityMatrix(depolarize_array(rho.data, qubit, lam, rho.n_qubits), rho.n_qubits)


def outcome_probabilities(rho: DensityMatrix, frame, qubits) -> np.ndarray:
    """``Tr[(M_a (x) I) rho]`` for every outcome of ``frame`` on ``qubits``."""
    qubits = check_qubits(qubits, rho.n_qubits)
    reduced = partial_trace_array(rho.data, qubits, rho.n_qubits)
    return np.einsum("aij,ji->a", frame.elements, reduced).real


def povm_measure(rho: DensityMatrix, frame, qubits, rng=None, lam_meas: float = 0.0):
    """Sample an outcome of ``frame`` on ``qubits`` and apply the Lueders instrument.

    Depolarizing noise of strength ``lam_meas`` is applied to the measured
    qubits first. Returns ``(outcome_index, post_measurement_state)``.
    """
    qubits = check_qubits(qubits, rho.n_qubits)
    lam_meas = check_strength(lam_meas, "lam_meas")
    rng = check_random_state(rng)
    n = rho.n_qubits
    mat = rho.data
    for q in qubits:
        mat = depolarize_array(mat, q, lam_meas, n)
    reduced = partial_trace_array(mat, qubits, n)
    probs = check_probabilities(np.einsum("aij,ji->a", frame.elements, reduced).real)
    a = int(rng.choice(len(probs), p=probs))
    w, v = np.linalg.eigh(frame.elements[a])
    kraus = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    post = apply_unitary_array(mat, kraus, qubits, n) / probs[a]
    return a, DensityMatrix(post, n)


def reprepare(rho: DensityMatrix, qubits, sigma, lam_reprep: float = 0.0) -> DensityMatrix:
    """Discard ``qubits`` and replace them by ``sigma`` (then depolarize them)."""
    qubits = check_qubits(qubits, rho.n_qubits)
    lam_reprep = check_strength(lam_reprep, "lam_reprep")
    n = rho.n_qubits
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (2 ** len(qubits),) * 2:
        raise ValueError("sigma does not match the number of reprepared qubits")
    if len(qubits) == n:
        out = compose_array(sigma, np.ones((1, 1), dtype=complex), qubits, n)
    else:
        rest = partial_trace_array(rho.data, [q for q in range(n) if q not in qubits], n)
        out = compose_array(sigma, rest, qubits, n)
    for q in qubits:
        out = depolarize_array(out, q, lam_reprep, n)
    return DensityMatrix(out, n)


def expectation(rho, O) -> float:
    """``Tr[rho O]`` for a Hermitian ``O``."""
    O = check_hermitian(O)
    mat = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    val = np.einsum("ij,ji->", mat, O)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def pauli_string(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"ZIX"`` (qubit 0 first)."""
    table = {"I": I2, "X": X, "Y": Y, "Z": Z}
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, table[ch])
    return out
