"""POVM frames, overlap matrices and dual frames.

A frame is a spanning set of Hermitian operators ``M_a``. A dual frame is
parametrized by a real coefficient matrix ``G`` (``dual_a = sum_a' G[a, a'] M_a'``)
and is valid whenever ``T G T = T`` for the overlap matrix
``T[a, a'] = Tr[M_a M_a']``.

Outcome strings of a :class:`FactorableFrame` are enumerated in mixed radix
with qubit 0 most significant, so every multi-qubit matrix is the Kronecker
product of its per-qubit blocks in qubit order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ._validation import DualFrameError, check_square, check_unitary

PAULI6_LABELS = ("x+", "x-", "y+", "y-", "z+", "z-")
PAULI6_ORDERING = "pauli6:" + ",".join(PAULI6_LABELS)

# callers treat residuals at or below this as a valid generalized inverse
DUAL_ATOL = 1e-8
PINV_RCOND = 1e-10


def _kron_all(mats):
    return reduce(np.kron, mats)


@dataclass(frozen=True, eq=False)
class SingleQubitFrame:
    """Single-qubit POVM given by its ordered elements.

    Parameters
    ----------
    elements : array-like of shape (K, 2, 2)
        Positive semidefinite elements summing to the identity.
    labels : tuple of str
        One identifier per element.
    name : str
        Ordering tag used when matrices are serialized.
    """

    elements: np.ndarray
    labels: tuple
    name: str = "custom"

    def __post_init__(self):
        els = np.array(self.elements, dtype=complex)
        if els.ndim != 3 or els.shape[1:] != (2, 2):
            raise ValueError(f"elements must have shape (K, 2, 2), got {els.shape}")
        if len(self.labels) != len(els):
            raise ValueError("one label per element is required")
        if np.abs(els - els.conj().transpose(0, 2, 1)).max() > 1e-12:
            raise ValueError("POVM elements must be Hermitian")
        if np.linalg.eigvalsh(els).min() < -1e-12:
            raise ValueError("POVM elements must be positive semidefinite")
        if np.abs(els.sum(axis=0) - np.eye(2)).max() > 1e-12:
            raise ValueError("POVM elements must sum to the identity")
        gram = np.einsum("aij,bji->ab", els, els).real
        if np.linalg.matrix_rank(gram, tol=1e-10) != 4:
            raise ValueError("POVM is not informationally complete")
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    @property
    def traces(self) -> np.ndarray:
        return np.einsum("aii->a", self.elements).real

    @property
    def states(self) -> np.ndarray:
        """Normalized repreparation states ``M_a / Tr[M_a]``."""
        return self.elements / self.traces[:, None, None]

    @property
    def ordering(self) -> str:
        return self.name + ":" + ",".join(self.labels)


def pauli6_frame() -> SingleQubitFrame:
    """The Pauli-6 POVM: one third of each Pauli eigenprojector.

    Elements are ordered ``(x+, x-, y+, y-, z+, z-)``.
    """
    s = 1 / np.sqrt(2)
    kets = [
        (s, s), (s, -s),
        (s, 1j * s), (s, -1j * s),
        (1, 0), (0, 1),
    ]
    els = [np.outer(k, np.conj(k)) / 3 for k in np.array(kets, dtype=complex)]
    return SingleQubitFrame(np.array(els), PAULI6_LABELS, name="pauli6")


@dataclass(frozen=True, eq=False)
class FactorableFrame:
    """Tensor-product frame built from one single-qubit POVM per qubit."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("a factorable frame needs at least one qubit")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def uniform(cls, frame: SingleQubitFrame, n_qubits: int) -> "FactorableFrame":
        return cls((frame,) * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple:
        return tuple(f.n_outcomes for f in self.factors)

    @property
    def n_outcomes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ordering(self) -> str:
        return "|".join(f.ordering for f in self.factors)

    def restrict(self, qubits) -> "FactorableFrame":
        return FactorableFrame(tuple(self.factors[q] for q in qubits))

    def index(self, outcome) -> int:
        """Flat index of a per-qubit outcome tuple (indices or labels)."""
        idx = 0
        for f, a in zip(self.factors, outcome, strict=True):
            if not isinstance(a, (int, np.integer)):
                a = f.labels.index(a)
            idx = idx * f.n_outcomes + int(a)
        return idx

    def outcome(self, index: int) -> tuple:
        return tuple(int(a) for a in np.unravel_index(index, self.shape))

    def labels(self, index: int) -> tuple:
        return tuple(f.labels[a] for f, a in zip(self.factors, self.outcome(index)))

    def element(self, outcome) -> np.ndarray:
        if isinstance(outcome, (int, np.integer)):
            outcome = self.outcome(outcome)
        else:
            outcome = self.outcome(self.index(outcome))
        return _kron_all([f.elements[a] for f, a in zip(self.factors, outcome)])

    @property
    def elements(self) -> np.ndarray:
        """All elements, shape ``(D, 2**n, 2**n)``, in outcome-index order."""
        out = self.factors[0].elements
        for f in self.factors[1:]:
            out = np.einsum("aij,bkl->abikjl", out, f.elements)
            d = out.shape[2] * out.shape[3]
            out = out.reshape(-1, d, d)
        return out

    @property
    def traces(self) -> np.ndarray:
        return _kron_all([f.traces for f in self.factors])

    @property
    def states(self) -> np.ndarray:
        return self.elements / self.traces[:, None, None]


def as_factorable(frame) -> FactorableFrame:
    if isinstance(frame, FactorableFrame):
        return frame
    if isinstance(frame, SingleQubitFrame):
        return FactorableFrame((frame,))
    raise TypeError(f"expected a frame, got {type(frame).__name__}")


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Hilbert-Schmidt Gram matrix ``T[a, a'] = Tr[M_a M_a']`` of a frame."""

    matrix: np.ndarray
    ordering: str = ""
    factors: tuple = ()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class DualCoefficients:
    """Real coefficient matrix of a dual frame.

    ``factors`` holds the per-qubit blocks when the coefficients are a
    Kronecker product; ``provenance`` records how they were produced
    (``"canonical"`` or ``"annealed"``).
    """

    matrix: np.ndarray
    provenance: str = "canonical"
    ordering: str = ""
    factors: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if np.iscomplexobj(m):
            if np.abs(m.imag).max() > 1e-12:
                raise DualFrameError("dual coefficients must be real")
            m = m.real
        m = np.array(check_square(m, "dual coefficients"), dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "factors", tuple(self.factors))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def shape(self):
        return self.matrix.shape

    @classmethod
    def from_factors(cls, factors, provenance: str | None = None) -> "DualCoefficients":
        factors = tuple(factors)
        if provenance is None:
            provenance = "annealed" if any(f.provenance == "annealed" for f in factors) else "canonical"
        return cls(
            _kron_all([f.matrix for f in factors]),
            provenance=provenance,
            ordering="|".join(f.ordering for f in factors),
            factors=factors,
        )


@dataclass(frozen=True, eq=False)
class ChannelTransferMatrix:
    """``T_U[b, a] = Tr[M_b U M_a U^dagger]`` for a unitary ``U``."""

    matrix: np.ndarray
    gate: str = ""
    ordering: str = ""

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def shape(self):
        return self.matrix.shape


def overlap_matrix(frame) -> OverlapMatrix:
    """Overlap matrix of a single-qubit or factorable frame.

    For factorable frames the result is assembled as the Kronecker product of
    per-qubit overlaps; ``factors`` keeps those blocks.
    """
    frame = as_factorable(frame)
    blocks = []
    for f in frame.factors:
        els = f.elements
        blocks.append(np.einsum("aij,bji->ab", els, els).real)
    return OverlapMatrix(_kron_all(blocks), ordering=frame.ordering, factors=tuple(blocks))


def _matrix(x) -> np.ndarray:
    return np.asarray(x.matrix if hasattr(x, "matrix") else x, dtype=float)


def validate_dual(T, dual) -> float:
    """Max absolute entry of ``T - T G T``; at most ``1e-8`` means valid."""
    T, G = _matrix(T), _matrix(dual)
    if T.shape != G.shape:
        raise ValueError(f"dimension mismatch: overlap {T.shape} vs dual {G.shape}")
    return float(np.abs(T - T @ G @ T).max())


def canonical_dual(T) -> DualCoefficients:
    """Moore-Penrose pseudo-inverse of the overlap matrix.

    Singular values below ``1e-10`` times the largest one are treated as zero.
    Factorable overlaps are inverted block by block so the result keeps its
    per-qubit factors.
    """
    if isinstance(T, OverlapMatrix) and len(T.factors) > 1:
        parts = [canonical_dual(OverlapMatrix(b)) for b in T.factors]
        dual = DualCoefficients.from_factors(parts, provenance="canonical")
        dual = DualCoefficients(dual.matrix, "canonical", T.ordering, dual.factors)
    else:
        mat = _matrix(T)
        pinv = np.linalg.pinv(mat, rcond=PINV_RCOND)
        ordering = T.ordering if isinstance(T, OverlapMatrix) else ""
        dual = DualCoefficients(pinv, "canonical", ordering)
    res = validate_dual(T, dual)
    if res > DUAL_ATOL:
        raise DualFrameError(f"pseudo-inverse fails reconstruction check (residual {res:.3e})")
    return dual


def dual_elements(frame, dual) -> np.ndarray:
    """Dual operators ``sum_a' G[a, a'] M_a'``, shape ``(D, d, d)``."""
    els = as_factorable(frame).elements
    return np.einsum("ab,bij->aij", _matrix(dual), els)


def dual_normalization(frame, dual) -> dict:
    """Report the affine-normalization diagnostics of a dual.

    Returns the column sums of the coefficient matrix and the traces of the
    dual elements. For a valid dual every dual element has unit trace; the
    column sums equal ``1 / t`` for frames with constant element trace ``t``.
    """
    G = _matrix(dual)
    traces = G @ as_factorable(frame).traces
    return {"column_sums": G.sum(axis=0), "element_traces": traces}


def reconstruct(frame, dual, rho) -> np.ndarray:
    """``sum_a Tr[M_a rho] dual_a``; equals ``rho`` for any valid dual."""
    frame = as_factorable(frame)
    probs = np.einsum("aij,ji->a", frame.elements, rho)
    return np.einsum("a,aij->ij", probs, dual_elements(frame, dual))


def channel_transfer(U, frame, gate: str = "") -> ChannelTransferMatrix:
    """Transfer matrix of the unitary channel ``rho -> U rho U^dagger``.

    Entries are ``Tr[M_b U M_a U^dagger]`` indexed ``[b, a]``; the imaginary
    residue is checked to be below ``1e-12`` and discarded.
    """
    frame = as_factorable(frame)
    U = check_unitary(U, frame.n_qubits)
    els = frame.elements
    evolved = U @ els @ U.conj().T
    full = np.einsum("bij,aji->ba", els, evolved)
    if np.abs(full.imag).max() > 1e-12:
        raise ValueError("transfer matrix has a non-negligible imaginary part")
    return ChannelTransferMatrix(full.real, gate=gate, ordering=frame.ordering)


def dual_channel_matrix(dual_out, transfer, dual_in, overlap=None) -> np.ndarray:
    """``G_out T_U G_in^T``, i.e. ``[b, a] -> (dual_b | U | dual_a)``.

    If ``overlap`` is given both duals are validated against it first.
    """
    G_out, TU, G_in = _matrix(dual_out), _matrix(transfer), _matrix(dual_in)
    if not (G_out.shape == TU.shape == G_in.shape):
        raise ValueError("dual and transfer matrices must share one dimension")
    if overlap is not None:
        for name, G in (("output", G_out), ("input", G_in)):
            res = validate_dual(overlap, G)
            if res > DUAL_ATOL:
                raise DualFrameError(f"{name} dual is not a generalized inverse (residual {res:.3e})")
    return G_out @ TU @ G_in.T


def all_outcomes(frame):
    """Iterate over the per-qubit outcome tuples in index order."""
    return itertools.product(*(range(n) for n in as_factorable(frame).shape))
