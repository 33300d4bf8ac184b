"""Benchmark circuits: Bell/CHSH preparation and the TFIM variational ansatz.

Conventions
-----------
* qubits are 0-indexed; the ring-closing bond of an ``N``-qubit chain is ``(0, N-1)``
* ``rx(t) = exp(-i t X / 2)``, ``rz(t) = exp(-i t Z / 2)``, ``zz(g) = exp(-i g Z(x)Z / 2)``
* ``cx`` takes ``(control, target)``
* a SWAP is synthesized from three CNOTs, a ZZ rotation from two CNOTs and an ``rz``
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import densim
from ._validation import check_qubits, check_random_state, check_unitary
from .densim import NOISELESS, NoiseModel, X, Y, Z, I2

MODES = ("swap-chain", "interfaced", "direct")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

_FIXED = {"h": _H, "x": X, "y": Y, "z": Z, "s": _S, "i": I2, "cx": _CX, "cz": _CZ, "swap": _SWAP}
_ROTATIONS = {"rx": X, "ry": Y, "rz": Z}
_ARITY = {"h": 1, "x": 1, "y": 1, "z": 1, "s": 1, "i": 1, "rx": 1, "ry": 1, "rz": 1,
          "cx": 2, "cz": 2, "swap": 2, "zz": 2}
_CNOT_COST = {"cx": 1, "cz": 1, "swap": 3, "zz": 2}


def gate_unitary(kind: str, params: Sequence[float] = ()) -> np.ndarray:
    if kind in _FIXED:
        return _FIXED[kind]
    if kind in _ROTATIONS:
        (t,) = params
        return np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * _ROTATIONS[kind]
    if kind == "zz":
        (g,) = params
        ph = np.exp(-0.5j * g * np.array([1, -1, -1, 1]))
        return np.diag(ph)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Gate:
    """One circuit instruction.

    ``kind="unitary"`` carries an explicit ``matrix``; ``cnot_count`` overrides
    the number of CNOTs the gate is assumed to be synthesized from (this is the
    number of times gate noise is applied after it).
    """

    kind: str
    qubits: tuple
    params: tuple = ()
    matrix: np.ndarray | None = None
    cnot_count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "unitary":
            if self.matrix is None:
                raise ValueError("a 'unitary' gate needs a matrix")
            object.__setattr__(self, "matrix", check_unitary(self.matrix, len(self.qubits)))
        elif self.kind not in _ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        elif _ARITY[self.kind] != len(self.qubits):
            raise ValueError(f"{self.kind} acts on {_ARITY[self.kind]} qubit(s), got {self.qubits}")

    @property
    def unitary(self) -> np.ndarray:
        if self.kind == "unitary":
            return self.matrix
        return gate_unitary(self.kind, self.params)

    @property
    def n_cnots(self) -> int:
        if self.cnot_count is not None:
            return self.cnot_count
        return _CNOT_COST.get(self.kind, 0)

    def label(self) -> str:
        args = ",".join(f"{p:.6g}" for p in self.params)
        return f"{self.kind}({args})" if args else self.kind


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list on ``n_qubits`` qubits with a set of interface-marked gates."""

    n_qubits: int
    gates: tuple
    interfaces: frozenset = field(default_factory=frozenset)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "interfaces", frozenset(int(k) for k in self.interfaces))
        for g in self.gates:
            check_qubits(g.qubits, self.n_qubits)
        for k in self.interfaces:
            if not 0 <= k < len(self.gates):
                raise ValueError(f"interface index {k} does not name a gate")

    def __len__(self):
        return len(self.gates)

    @property
    def interface_list(self) -> list:
        return sorted(self.interfaces)

    def with_interfaces(self, interfaces) -> "Circuit":
        return Circuit(self.n_qubits, self.gates, frozenset(interfaces), self.name)

    def cnot_count(self) -> int:
        """CNOTs executed on hardware (interface-marked gates excluded)."""
        return sum(g.n_cnots for k, g in enumerate(self.gates) if k not in self.interfaces)

    def to_dict(self) -> dict:
        gates = []
        for g in self.gates:
            entry = {"kind": g.kind, "qubits": list(g.qubits), "params": list(g.params)}
            if g.matrix is not None:
                entry["matrix"] = np.stack([g.matrix.real, g.matrix.imag], axis=-1).ravel().tolist()
            if g.cnot_count is not None:
                entry["cnot_count"] = g.cnot_count
            gates.append(entry)
        return {
            "schema": "qcqsim.circuit/1",
            "name": self.name,
            "n_qubits": self.n_qubits,
            "gates": gates,
            "interfaces": self.interface_list,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        gates = []
        for entry in data["gates"]:
            matrix = None
            if "matrix" in entry:
                k = len(entry["qubits"])
                raw = np.asarray(entry["matrix"], dtype=float).reshape(2**k, 2**k, 2)
                matrix = raw[..., 0] + 1j * raw[..., 1]
            gates.append(Gate(entry["kind"], entry["qubits"], entry.get("params", ()),
                              matrix, entry.get("cnot_count")))
        return cls(int(data["n_qubits"]), gates, frozenset(data.get("interfaces", ())),
                   data.get("name", ""))


# ---------------------------------------------------------------- execution

def apply_gate_noisy(mat: np.ndarray, gate: Gate, n: int, lam_unit: float) -> np.ndarray:
    mat = densim.apply_unitary_array(mat, gate.unitary, gate.qubits, n)
    if lam_unit > 0:
        for _ in range(gate.n_cnots):
            for q in gate.qubits:
                mat = densim.depolarize_array(mat, q, lam_unit, n)
    return mat


def apply_gate_adjoint(op: np.ndarray, gate: Gate, n: int, lam_unit: float) -> np.ndarray:
    """Heisenberg-picture action of a (noisy) gate on an observable."""
    if lam_unit > 0:
        for _ in range(gate.n_cnots):
            for q in gate.qubits:
                op = densim.depolarize_array(op, q, lam_unit, n)
    return densim.apply_unitary_array(op, gate.unitary.conj().T, gate.qubits, n)


def run_circuit(circuit: Circuit, noise: NoiseModel = NOISELESS, initial=None) -> densim.DensityMatrix:
    """Dense reference simulation of ``circuit``.

    Interface-marked gates are applied as ideal unitaries sandwiched between
    the measurement and repreparation noise of ``noise``; this is the channel
    a QCQ interface reproduces on average.
    """
    n = circuit.n_qubits
    mat = (initial if initial is not None else densim.init_state(n)).data
    for k, g in enumerate(circuit.gates):
        if k in circuit.interfaces:
            for q in g.qubits:
                mat = densim.depolarize_array(mat, q, noise.meas, n)
            mat = densim.apply_unitary_array(mat, g.unitary, g.qubits, n)
            for q in g.qubits:
                mat = densim.depolarize_array(mat, q, noise.reprep, n)
        else:
            mat = apply_gate_noisy(mat, g, n, noise.unit)
    return densim.DensityMatrix(mat, n)


def statevector(circuit: Circuit) -> np.ndarray:
    """Noiseless output state vector with every gate applied as a unitary."""
    n = circuit.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    for g in circuit.gates:
        k = len(g.qubits)
        U = g.unitary.reshape((2,) * (2 * k))
        psi = np.tensordot(U, psi, axes=(list(range(k, 2 * k)), list(g.qubits)))
        psi = np.moveaxis(psi, list(range(k)), list(g.qubits))
    return psi.reshape(-1)


# ---------------------------------------------------------------- synthesis

def _swap(i: int, j: int) -> list:
    return [Gate("cx", (i, j)), Gate("cx", (j, i)), Gate("cx", (i, j))]


def _swap_chain(gate_at: callable, a: int, b: int) -> list:
    """Bring qubit ``a`` next to ``b > a`` with nearest-neighbour SWAPs, act, and swap back."""
    forward = []
    for i in range(a, b - 1):
        forward += _swap(i, i + 1)
    back = []
    for i in reversed(range(a, b - 1)):
        back += _swap(i, i + 1)
    return forward + gate_at(b - 1, b) + back


def _zz_from_cnots(i: int, j: int, gamma: float) -> list:
    return [Gate("cx", (i, j)), Gate("rz", (j,), (gamma,)), Gate("cx", (i, j))]


def bell_chsh_circuit(d: int, mode: str = "interfaced") -> Circuit:
    """Bell pair between qubits ``0`` and ``d-1`` of a ``d``-qubit line.

    ``mode`` selects how the long-range CNOT is realized: ``"swap-chain"``
    (nearest-neighbour SWAPs, three CNOTs each), ``"interfaced"`` (one CNOT
    marked for a QCQ interface) or ``"direct"`` (one long-range CNOT).
    """
    if d < 2:
        raise ValueError(f"distance must be at least 2, got {d}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    gates = [Gate("h", (0,))]
    interfaces = ()
    if mode == "swap-chain":
        gates += _swap_chain(lambda i, j: [Gate("cx", (i, j))], 0, d - 1)
    else:
        gates.append(Gate("cx", (0, d - 1)))
        if mode == "interfaced":
            interfaces = (len(gates) - 1,)
    return Circuit(d, gates, frozenset(interfaces), f"bell-d{d}-{mode}")


# A = (Z, X), B = ((Z + X)/sqrt2, (Z - X)/sqrt2); S = <A0B0> + <A0B1> + <A1B0> - <A1B1>.
# The sign layout of B is the maximizer of S on |Phi+> (see calibrate_chsh_settings).
CHSH_A = (Z, X)
CHSH_B = ((Z + X) / np.sqrt(2), (Z - X) / np.sqrt(2))
CHSH_SIGNS = ((1, 1), (1, -1))


def calibrate_chsh_settings(state=None):
    """Brute-force the sign layout of Bob's settings ``(+-Z +-X)/sqrt2``.

    Returns ``(b0_signs, b1_signs, S)`` maximizing ``S`` on ``state``
    (default ``|Phi+>``). Ties resolve to the first layout in lexicographic order.
    """
    if state is None:
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        state = np.outer(phi, phi)
    best = None
    for s0 in itertools.product((1, -1), repeat=2):
        for s1 in itertools.product((1, -1), repeat=2):
            if s0 == s1:
                continue
            B0 = (s0[0] * Z + s0[1] * X) / np.sqrt(2)
            B1 = (s1[0] * Z + s1[1] * X) / np.sqrt(2)
            op = _bell_operator(CHSH_A, (B0, B1))
            S = np.trace(state @ op).real
            if best is None or S > best[2] + 1e-12:
                best = (s0, s1, S)
    return best


def _bell_operator(A, B) -> np.ndarray:
    return np.kron(A[0], B[0]) + np.kron(A[0], B[1]) + np.kron(A[1], B[0]) - np.kron(A[1], B[1])


def chsh_operator() -> np.ndarray:
    """Two-qubit Bell operator whose expectation is the Bell polynomial ``S``."""
    return _bell_operator(CHSH_A, CHSH_B)


def chsh_correlators(rho) -> np.ndarray:
    rho = np.asarray(rho.data if hasattr(rho, "data") else rho)
    return np.array([[np.trace(rho @ np.kron(a, b)).real for b in CHSH_B] for a in CHSH_A])


def chsh_polynomial(rho) -> float:
    """Bell polynomial ``S = C00 + C01 + C10 - C11`` of a two-qubit state."""
    C = chsh_correlators(rho)
    return float(C[0, 0] + C[0, 1] + C[1, 0] - C[1, 1])


# ---------------------------------------------------------------- TFIM

@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Pauli strings (qubit 0 first in each label)."""

    n_qubits: int
    terms: tuple

    def matrix(self) -> np.ndarray:
        if self.n_qubits > densim.MAX_QUBITS:
            raise ValueError(f"dense form limited to {densim.MAX_QUBITS} qubits")
        d = 2**self.n_qubits
        out = np.zeros((d, d), dtype=complex)
        for coef, label in self.terms:
            out += coef * densim.pauli_string(label)
        return out

    @property
    def norm_bound(self) -> float:
        """Sum of absolute coefficients, an upper bound on the operator norm."""
        return float(sum(abs(c) for c, _ in self.terms))


def tfim_hamiltonian(n_qubits: int, g: float = 1.0) -> PauliSum:
    """``-sum_i (Z_i Z_{i+1} + g X_i)`` on a ring of ``n_qubits >= 3`` sites."""
    if n_qubits < 3:
        raise ValueError("the ring needs at least 3 sites")
    terms = []
    for i in range(n_qubits):
        j = (i + 1) % n_qubits
        label = ["I"] * n_qubits
        label[i] = label[j] = "Z"
        terms.append((-1.0, "".join(label)))
    for i in range(n_qubits):
        label = ["I"] * n_qubits
        label[i] = "X"
        terms.append((-float(g), "".join(label)))
    return PauliSum(n_qubits, tuple(terms))


def exact_ground_energy(n_qubits: int, g: float = 1.0) -> float:
    if n_qubits > densim.MAX_QUBITS:
        raise ValueError(f"exact diagonalization limited to {densim.MAX_QUBITS} qubits")
    H = tfim_hamiltonian(n_qubits, g).matrix()
    return float(np.linalg.eigvalsh(H)[0])


@dataclass(frozen=True)
class HVAParams:
    """Per-layer angles of the Hamiltonian variational ansatz."""

    gammas: tuple
    betas: tuple

    def __post_init__(self):
        gam = tuple(float(x) for x in self.gammas)
        bet = tuple(float(x) for x in self.betas)
        if len(gam) != len(bet):
            raise ValueError("need one (gamma, beta) pair per layer")
        if not np.all(np.isfinite(gam + bet)):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "gammas", gam)
        object.__setattr__(self, "betas", bet)

    @property
    def p(self) -> int:
        return len(self.gammas)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])

    @classmethod
    def from_vector(cls, x) -> "HVAParams":
        x = np.asarray(x, dtype=float)
        p = len(x) // 2
        return cls(tuple(x[:p]), tuple(x[p:]))

    def to_dict(self) -> dict:
        return {"gammas": list(self.gammas), "betas": list(self.betas)}


def hva_circuit(n_qubits: int, params: HVAParams, mode: str = "swap-chain",
                interfaced_layers: Sequence[int] | None = None) -> Circuit:
    """HVA circuit for the TFIM ring.

    Hadamards on all qubits, then per layer ``i``: ZZ rotations by ``gamma_i`` on
    the nearest-neighbour bonds (two CNOTs each), the ring-closing ZZ between
    qubits ``0`` and ``N-1``, and ``rx(beta_i)`` on every qubit.

    In ``"interfaced"`` mode the ring-closing gates of ``interfaced_layers``
    (1-based, default: the last layer) are interface-marked ``zz`` gates and the
    remaining ones are swap-chain synthesized.
    """
    N = n_qubits
    if N < 3:
        raise ValueError("the ring needs at least 3 sites")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    p = params.p
    if mode == "interfaced":
        selected = set(interfaced_layers) if interfaced_layers is not None else {p}
    else:
        selected = set(interfaced_layers or ())
        if selected:
            raise ValueError("interfaced_layers requires mode='interfaced'")
    bad = [layer for layer in selected if not 1 <= layer <= p]
    if bad:
        raise ValueError(f"layers {bad} do not exist (p={p})")

    gates = [Gate("h", (q,)) for q in range(N)]
    interfaces = []
    for layer, (gamma, beta) in enumerate(zip(params.gammas, params.betas), start=1):
        for i in range(N - 1):
            gates += _zz_from_cnots(i, i + 1, gamma)
        if layer in selected:
            interfaces.append(len(gates))
            gates.append(Gate("zz", (0, N - 1), (gamma,)))
        elif mode == "direct":
            gates += _zz_from_cnots(0, N - 1, gamma)
        else:
            gates += _swap_chain(lambda i, j, g=gamma: _zz_from_cnots(i, j, g), 0, N - 1)
        gates += [Gate("rx", (q,), (beta,)) for q in range(N)]
    return Circuit(N, gates, frozenset(interfaces), f"tfim-hva-n{N}-p{p}-{mode}")


def _zz_ring_diagonal(N: int) -> np.ndarray:
    bits = (np.arange(2**N)[:, None] >> (N - 1 - np.arange(N))) & 1
    z = 1 - 2 * bits
    return (z * np.roll(z, -1, axis=1)).sum(axis=1)


def hva_energy(params: HVAParams, n_qubits: int, g: float = 1.0, *, _cache={}) -> float:
    """Noiseless ``<H>`` of the HVA state, evaluated on a state vector."""
    N = n_qubits
    if N not in _cache:
        _cache[N] = _zz_ring_diagonal(N)
    zzsum = _cache[N]
    psi = np.full(2**N, 2 ** (-N / 2), dtype=complex)
    for gamma, beta in zip(params.gammas, params.betas):
        psi = psi * np.exp(-0.5j * gamma * zzsum)
        rx = gate_unitary("rx", (beta,))
        t = psi.reshape((2,) * N)
        for q in range(N):
            t = np.moveaxis(np.tensordot(rx, t, axes=(1, q)), 0, q)
        psi = t.reshape(-1)
    e_zz = -np.sum(zzsum * np.abs(psi) ** 2)
    t = psi.reshape((2,) * N)
    e_x = 0.0
    for q in range(N):
        flipped = np.flip(t, axis=q)
        e_x += np.vdot(t, flipped).real
    return float(e_zz - g * e_x)


@dataclass
class ParamSearchResult:
    params: HVAParams
    energy: float
    ground_energy: float
    converged: bool
    n_evaluations: int

    @property
    def gap(self) -> float:
        return self.energy - self.ground_energy


def optimize_params(n_qubits: int, p: int | None = None, tolerance: float = 1e-3, g: float = 1.0,
                    n_starts: int = 16, random_state=0, max_evaluations: int = 20000) -> ParamSearchResult:
    """Multi-start derivative-free search for HVA angles.

    Each start runs Powell's method from random angles; the all-zero start is
    always included so the result is never worse than ``|+>^N``. Stops early
    once ``<H> - E_gs <= tolerance``.
    """
    N = n_qubits
    p = N // 2 if p is None else p
    rng = check_random_state(random_state)
    e_gs = exact_ground_energy(N, g)

    def f(x):
        return hva_energy(HVAParams.from_vector(x), N, g)

    starts = [np.zeros(2 * p)] + [rng.uniform(-np.pi / 2, np.pi / 2, 2 * p) for _ in range(n_starts - 1)]
    best_x, best_e, evals = starts[0], f(starts[0]), 1
    for x0 in starts:
        res = optimize.minimize(f, x0, method="Powell",
                                options={"xtol": 1e-8, "ftol": 1e-12, "maxfev": max_evaluations})
        evals += res.nfev
        if res.fun < best_e:
            best_x, best_e = res.x, float(res.fun)
        if best_e - e_gs <= tolerance:
            break
    # wrap angles into (-pi, pi] for readability; energy is 2pi-periodic in every angle
    # (rx and zz are 4pi-periodic as operators but only pick up a global sign)
    best_x = np.angle(np.exp(1j * best_x))
    params = HVAParams.from_vector(best_x)
    energy = hva_energy(params, N, g)
    return ParamSearchResult(params, energy, e_gs, energy - e_gs <= tolerance, evals)
