"""QCQ interfaces and the hybrid Monte Carlo estimator.

An interface for a gate ``U`` on qubits ``s`` measures a factorable POVM on
``s`` (outcome ``a``), draws ``b`` from ``|C[a, b]| / ||C[a]||_1`` and
reprepares ``s`` in ``sigma_b = M_b / t_b``, where::

    C[a, b] = (dual_b | U | dual_a)     (input dual on a, output dual on b)

Each shot carries the weight ``v = prod ||C[a]||_1 t_b sgn C[a, b]`` over its
interfaces, and ``mean(o * v)`` is an unbiased estimate of ``Tr[O rho_f]``.

:class:`QCQSimulator` samples shots in blocks. In exact-readout mode a shot is
fully determined by its interface outcomes, so the simulator caches the
quantum state reached by every outcome prefix and evaluates the observable in
the Heisenberg picture; shot cost is then independent of the circuit depth.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from . import densim
from ._validation import DualFrameError, check_hermitian, check_random_state, check_unitary
from .circuits import Circuit, PauliSum, apply_gate_adjoint, apply_gate_noisy, run_circuit
from .densim import NOISELESS, NoiseModel
from .frames import (
    DUAL_ATOL,
    FactorableFrame,
    SingleQubitFrame,
    as_factorable,
    canonical_dual,
    channel_transfer,
    dual_channel_matrix,
    overlap_matrix,
    pauli6_frame,
    validate_dual,
)

READOUTS = ("exact", "sample")


@dataclass(frozen=True, eq=False)
class InterfaceTable:
    """Sampling table of one QCQ interface.

    ``coefficients[a, b]`` is the dual-channel coefficient for measured outcome
    ``a`` and reprepared outcome ``b``; ``values[a, b]`` is the shot weight and
    ``probabilities[a]`` the conditional distribution of ``b``.
    """

    frame: FactorableFrame
    coefficients: np.ndarray
    traces: np.ndarray
    row_norms: np.ndarray
    probabilities: np.ndarray
    signs: np.ndarray
    values: np.ndarray
    negativity: float
    dual_in: object = None
    dual_out: object = None
    gate_index: int | None = None
    qubits: tuple = ()
    gate: str = ""

    @property
    def n_outcomes(self) -> int:
        return len(self.traces)

    @property
    def states(self) -> np.ndarray:
        return self.frame.states

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probabilities, axis=1)
        return c / c[:, -1:]


def build_interface(U, frame=None, dual_in=None, dual_out=None, *, gate_index=None,
                    qubits=(), gate: str = "") -> InterfaceTable:
    """Build the sampling table of a QCQ interface for the unitary ``U``.

    ``frame`` is a single-qubit frame (repeated on every qubit of ``U``) or a
    factorable frame of matching size; it defaults to Pauli-6. Missing duals
    default to the canonical pseudo-inverse.
    """
    U = np.asarray(U, dtype=complex)
    k = int(round(math.log2(U.shape[0])))
    if frame is None:
        frame = pauli6_frame()
    if isinstance(frame, SingleQubitFrame):
        frame = FactorableFrame.uniform(frame, k)
    frame = as_factorable(frame)
    if frame.n_qubits != k:
        raise ValueError(f"frame acts on {frame.n_qubits} qubit(s), gate on {k}")
    U = check_unitary(U, k)
    T = overlap_matrix(frame)
    if dual_in is None:
        dual_in = canonical_dual(T)
    if dual_out is None:
        dual_out = dual_in
    for name, dual in (("input", dual_in), ("output", dual_out)):
        res = validate_dual(T, dual)
        if res > DUAL_ATOL:
            raise DualFrameError(f"{name} dual is not a generalized inverse (residual {res:.3e})")

    transfer = channel_transfer(U, frame, gate=gate)
    coef = dual_channel_matrix(dual_out, transfer, dual_in).T
    return table_from_coefficients(frame, coef, dual_in, dual_out, gate_index=gate_index,
                                   qubits=qubits, gate=gate)


def table_from_coefficients(frame, coef, dual_in=None, dual_out=None, *, gate_index=None,
                            qubits=(), gate: str = "") -> InterfaceTable:
    """Sampling table for a coefficient matrix indexed ``[a, b]``.

    Rows with zero l1-norm get a point distribution on ``b = 0`` and zero weight.
    """
    frame = as_factorable(frame)
    coef = np.array(coef, dtype=float)
    traces = frame.traces
    if coef.shape != (len(traces),) * 2:
        raise ValueError(f"coefficients of shape {coef.shape} do not match {len(traces)} outcomes")
    row_norms = np.abs(coef).sum(axis=1)
    signs = np.sign(coef)
    probs = np.zeros_like(coef)
    nz = row_norms > 0
    probs[nz] = np.abs(coef[nz]) / row_norms[nz, None]
    probs[~nz, 0] = 1.0
    values = row_norms[:, None] * traces[None, :] * signs
    negativity = float((row_norms[:, None] * traces[None, :]).max())
    for arr in (coef, traces, row_norms, probs, signs, values):
        arr.setflags(write=False)
    return InterfaceTable(frame, coef, traces, row_norms, probs, signs, values, negativity,
                          dual_in, dual_out, gate_index, tuple(qubits), gate)


def forward_negativity(tables) -> float:
    """Product of the interface negativities (1 for no interfaces)."""
    if isinstance(tables, dict):
        tables = tables.values()
    return float(np.prod([t.negativity for t in tables])) if tables else 1.0


def required_samples(negativity: float, norm: float, eps: float, delta: float) -> int:
    """Hoeffding shot count ``ceil(n^2 * 2 ||O||^2 log(2/delta) / eps^2)``, at least 1."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if negativity < 0 or norm < 0:
        raise ValueError("negativity and norm must be non-negative")
    if math.isinf(eps):
        return 1
    m = negativity**2 * 2 * norm**2 * math.log(2 / delta) / eps**2
    return max(1, math.ceil(m))


@dataclass
class EstimatorResult:
    """Outcome of a Monte Carlo estimate.

    ``records`` (when kept) holds per-shot arrays ``alpha`` (shape
    ``(M, n_interfaces, 2)``), ``o`` and ``v``.
    """

    n_shots: int
    mean: float
    stderr: float
    negativity: float
    records: dict | None = field(default=None, repr=False)

    @property
    def weighted(self) -> np.ndarray | None:
        if self.records is None:
            return None
        return self.records["o"] * self.records["v"]


def observable_matrix(observable, n_qubits: int) -> np.ndarray:
    if isinstance(observable, PauliSum):
        observable = observable.matrix()
    O = check_hermitian(observable)
    if O.shape != (2**n_qubits,) * 2:
        raise ValueError(f"observable of shape {O.shape} does not act on {n_qubits} qubits")
    return O


def _spectral_projectors(O: np.ndarray, atol: float = 1e-9):
    w, V = np.linalg.eigh(O)
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[start] > atol:
            groups.append((float(w[start:i].mean()), V[:, start:i]))
            start = i
    eigvals = np.array([g[0] for g in groups])
    projs = np.array([v @ v.conj().T for _, v in groups])
    return eigvals, projs


def _sample_index(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.argmax(cdf_rows > u[:, None], axis=1)


# ---------------------------------------------------------------- literal shot

def run_shot(circuit: Circuit, tables: dict, noise: NoiseModel = NOISELESS, rng=None,
             observable=None, readout: str = "exact", return_outcomes: bool = False):
    """Execute one shot gate by gate on the dense simulator.

    Gates in ``tables`` are replaced by their interface: measure, draw ``b``,
    reprepare, multiply the weight. Returns ``(o, v)`` where ``o`` is
    ``Tr[O rho_f]`` (``readout="exact"``) or a sampled eigenvalue of ``O``.
    """
    rng = check_random_state(rng)
    n = circuit.n_qubits
    O = observable_matrix(observable, n)
    missing = set(circuit.interfaces) - set(tables)
    if missing:
        raise ValueError(f"no interface table for gates {sorted(missing)}")
    rho = densim.init_state(n)
    v = 1.0
    outcomes = []
    for k, gate in enumerate(circuit.gates):
        if k in circuit.interfaces:
            tab = tables[k]
            a, post = densim.povm_measure(rho, tab.frame, gate.qubits, rng, noise.meas)
            b = int(rng.choice(tab.n_outcomes, p=tab.probabilities[a]))
            rho = densim.reprepare(post, gate.qubits, tab.states[b], noise.reprep)
            v *= tab.values[a, b]
            outcomes.append((a, b))
        else:
            rho = densim.DensityMatrix(apply_gate_noisy(rho.data, gate, n, noise.unit), n)
    if readout == "exact":
        o = densim.expectation(rho, O)
    elif readout == "sample":
        eigvals, projs = _spectral_projectors(O)
        p = np.clip(np.einsum("kij,ji->k", projs, rho.data).real, 0, None)
        o = float(eigvals[rng.choice(len(p), p=p / p.sum())])
    else:
        raise ValueError(f"readout must be one of {READOUTS}")
    if return_outcomes:
        return o, v, outcomes
    return o, v


# ---------------------------------------------------------------- oracle

def exact_hybrid_expectation(circuit: Circuit, observable, tables: dict,
                             noise: NoiseModel = NOISELESS, max_terms: int = 10**6) -> float:
    """Deterministic sum over every joint interface assignment.

    Each pair ``(a, b)`` of each interface contributes the operator
    ``C[a, b] t_b sigma_b (x) Tr_s[(M_a (x) I) rho]``, which is propagated through the
    rest of the circuit; the expectation of ``O`` is summed over all terms.
    """
    n = circuit.n_qubits
    O = observable_matrix(observable, n)
    order = circuit.interface_list
    missing = set(order) - set(tables)
    if missing:
        raise ValueError(f"no interface table for gates {sorted(missing)}")
    size = math.prod(tables[k].n_outcomes ** 2 for k in order)
    if size > max_terms:
        raise ValueError(f"enumeration of {size} terms exceeds the limit of {max_terms}")

    def propagate(stack, start, stop):
        for g in circuit.gates[start:stop]:
            stack = apply_gate_noisy(stack, g, n, noise.unit)
        return stack

    def expand(mat, j):
        k = order[j]
        tab, qubits = tables[k], circuit.gates[k].qubits
        stop = order[j + 1] if j + 1 < len(order) else len(circuit.gates)
        for q in qubits:
            mat = densim.depolarize_array(mat, q, noise.meas, n)
        rests = densim.conditional_rest_array(mat, tab.frame.elements, qubits, n)
        sigmas = densim.depolarize_operator(tab.states, noise.reprep)
        total = 0.0
        for a in range(tab.n_outcomes):
            weights = tab.coefficients[a] * tab.traces
            children = densim.compose_array(sigmas, rests[a], qubits, n) * weights[:, None, None]
            children = propagate(children, k + 1, stop)
            if j + 1 == len(order):
                total += np.einsum("bij,ji->", children, O).real
            else:
                total += sum(expand(child, j + 1) for child in children)
        return total

    if not order:
        return densim.expectation(run_circuit(circuit, noise), O)
    start = propagate(densim.init_state(n).data, 0, order[0])
    return float(expand(start, 0))


def reference_expectation(circuit: Circuit, observable, noise: NoiseModel = NOISELESS) -> float:
    """Dense simulation with interface gates applied as the channels they emulate."""
    O = observable_matrix(observable, circuit.n_qubits)
    return densim.expectation(run_circuit(circuit, noise), O)


# ---------------------------------------------------------------- estimator

@dataclass
class _Node:
    probs: np.ndarray
    cdf: np.ndarray
    rests: np.ndarray


class QCQSimulator(BaseEstimator):
    """Hybrid quantum-classical simulator for circuits with QCQ interfaces.

    Parameters
    ----------
    frame : SingleQubitFrame or None
        Single-qubit POVM used on every interface qubit (default Pauli-6).
    duals : dict or None
        Optional ``{gate_index: (dual_in, dual_out)}``; unlisted interfaces use
        the canonical dual.
    noise_unit, noise_meas, noise_reprep : float
        Depolarizing strengths (see :class:`~qcqsim.densim.NoiseModel`).
    readout : {"exact", "sample"}
        ``"exact"`` uses ``Tr[O rho_f]`` as the shot value, ``"sample"`` draws
        an eigenvalue of ``O``.
    chunk_size : int
        Shots per random stream; block ``c`` of a run with master seed ``s``
        always draws from the stream ``(s, c)``, so results do not depend on
        ``n_jobs``.
    n_jobs : int
        Worker threads for shot blocks.
    random_state : int or None
        Master seed.
    """

    def __init__(self, frame=None, duals=None, noise_unit=0.0, noise_meas=0.0, noise_reprep=0.0,
                 readout="exact", chunk_size=8192, n_jobs=1, random_state=None):
        self.frame = frame
        self.duals = duals
        self.noise_unit = noise_unit
        self.noise_meas = noise_meas
        self.noise_reprep = noise_reprep
        self.readout = readout
        self.chunk_size = chunk_size
        self.n_jobs = n_jobs
        self.random_state = random_state

    # -- fitting -----------------------------------------------------------

    def fit(self, circuit: Circuit, y=None):
        """Build interface tables and segment ``circuit`` at its interfaces."""
        if not isinstance(circuit, Circuit):
            raise TypeError("fit expects a Circuit")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if int(self.chunk_size) < 1:
            raise ValueError("chunk_size must be positive")
        self.noise_ = NoiseModel(self.noise_unit, self.noise_meas, self.noise_reprep)
        frame = self.frame if self.frame is not None else pauli6_frame()
        duals = dict(self.duals or {})
        unknown = set(duals) - set(circuit.interfaces)
        if unknown:
            raise ValueError(f"duals given for non-interface gates {sorted(unknown)}")
        self.tables_ = {}
        for k in circuit.interface_list:
            g = circuit.gates[k]
            d_in, d_out = duals.get(k, (None, None))
            self.tables_[k] = build_interface(g.unitary, frame, d_in, d_out, gate_index=k,
                                              qubits=g.qubits, gate=g.label())
        self.circuit_ = circuit
        self.order_ = circuit.interface_list
        bounds = [0] + [k for k in self.order_] + [len(circuit.gates)]
        # segment j runs from just after interface j-1 to just before interface j
        self.segments_ = [(bounds[j] + (j > 0), bounds[j + 1]) for j in range(len(bounds) - 1)]
        self.negativity_ = forward_negativity(self.tables_)
        self._nodes = {}
        self._leaves = {}
        self._sigmas = {k: densim.depolarize_operator(t.states, self.noise_.reprep)
                        for k, t in self.tables_.items()}
        return self

    def _check_fitted(self):
        if not hasattr(self, "tables_"):
            raise RuntimeError("call fit(circuit) first")

    def _propagate(self, mat, segment):
        n = self.circuit_.n_qubits
        start, stop = segment
        for g in self.circuit_.gates[start:stop]:
            mat = apply_gate_noisy(mat, g, n, self.noise_.unit)
        return mat

    def _input_state(self, prefix: tuple) -> np.ndarray:
        """State entering interface ``len(prefix) // 2`` after outcomes ``prefix``."""
        n = self.circuit_.n_qubits
        j = len(prefix) // 2
        if j == 0:
            return self._propagate(densim.init_state(n).data, self.segments_[0])
        parent = self._node(prefix[:-2])
        a, b = prefix[-2:]
        k = self.order_[j - 1]
        mat = densim.compose_array(self._sigmas[k][b], parent.rests[a],
                                   self.circuit_.gates[k].qubits, n)
        return self._propagate(mat, self.segments_[j])

    def _node(self, prefix: tuple) -> _Node:
        node = self._nodes.get(prefix)
        if node is not None:
            return node
        n = self.circuit_.n_qubits
        k = self.order_[len(prefix) // 2]
        qubits = self.circuit_.gates[k].qubits
        mat = self._input_state(prefix)
        for q in qubits:
            mat = densim.depolarize_array(mat, q, self.noise_.meas, n)
        rests = densim.conditional_rest_array(mat, self.tables_[k].frame.elements, qubits, n)
        probs = np.clip(np.einsum("aii->a", rests).real, 0, None)
        probs[probs < 1e-14] = 0.0
        probs /= probs.sum()
        live = probs > 0
        rests[live] /= probs[live, None, None]
        rests[~live] = 0
        node = _Node(probs, np.cumsum(probs) / probs.sum(), rests)
        self._nodes[prefix] = node
        return node

    # -- observables -------------------------------------------------------

    def _observable_key(self, O: np.ndarray) -> str:
        return hashlib.sha1(O.tobytes()).hexdigest() + self.readout

    def _heisenberg(self, ops: np.ndarray) -> np.ndarray:
        """Pull a stack of operators back through the final circuit segment."""
        n = self.circuit_.n_qubits
        start, stop = self.segments_[-1]
        for g in reversed(self.circuit_.gates[start:stop]):
            ops = apply_gate_adjoint(ops, g, n, self.noise_.unit)
        return ops

    def _prepare_observable(self, O: np.ndarray):
        key = self._observable_key(O)
        if key not in self._leaves:
            if self.readout == "exact":
                eigvals, ops = None, O[None]
            else:
                eigvals, ops = _spectral_projectors(O)
            self._leaves[key] = {"eigvals": eigvals, "ops": self._heisenberg(ops), "tables": {}}
        return key

    def _leaf(self, key: str, prefix: tuple) -> np.ndarray:
        """Per-``(a, b)`` readout table of the last interface after ``prefix``."""
        store = self._leaves[key]
        table = store["tables"].get(prefix)
        if table is not None:
            return table
        n = self.circuit_.n_qubits
        k = self.order_[-1]
        qubits = self.circuit_.gates[k].qubits
        node = self._node(prefix)
        sig = self._sigmas[k]
        vals = []
        for op in store["ops"]:
            Q = densim.conditional_rest_array(op, sig, qubits, n)
            vals.append(np.einsum("brq,aqr->ab", Q, node.rests).real)
        vals = np.stack(vals, axis=-1)
        if self.readout == "exact":
            table = vals[..., 0]
        else:
            vals = np.clip(vals, 0, None)
            tot = vals.sum(axis=-1, keepdims=True)
            tot[tot == 0] = 1
            table = np.cumsum(vals / tot, axis=-1)
            table[..., -1] = 1.0
        store["tables"][prefix] = table
        return table

    # -- sampling ----------------------------------------------------------

    def _final_readout(self, key: str, n_shots: int, rng) -> np.ndarray:
        store = self._leaves[key]
        rho = self._propagate(densim.init_state(self.circuit_.n_qubits).data, self.segments_[0])
        if self.readout == "exact":
            return np.full(n_shots, np.einsum("ij,ji->", rho, self._raw_obs[key]).real)
        p = np.clip(np.einsum("kij,ji->k", self._raw_projs[key], rho).real, 0, None)
        cdf = np.cumsum(p / p.sum())
        cdf[-1] = 1.0
        return store["eigvals"][np.searchsorted(cdf, rng.random(n_shots), side="right")]

    def _sample_block(self, key: str, n_shots: int, rng, keep: bool):
        n_int = len(self.order_)
        store = self._leaves[key]
        alpha = np.zeros((n_shots, n_int, 2), dtype=np.int64)
        v = np.ones(n_shots)
        o = np.empty(n_shots)
        if n_int == 0:
            o[:] = self._final_readout(key, n_shots, rng)
            return o, v, alpha if keep else None
        groups = [((), np.arange(n_shots))]
        for j, k in enumerate(self.order_):
            tab = self.tables_[k]
            cdf = tab.cdf
            nxt = []
            for prefix, idx in groups:
                node = self._node(prefix)
                a = _sample_index(node.cdf[None, :].repeat(len(idx), 0), rng.random(len(idx)))
                b = _sample_index(cdf[a], rng.random(len(idx)))
                alpha[idx, j, 0] = a
                alpha[idx, j, 1] = b
                v[idx] *= tab.values[a, b]
                if j + 1 == n_int:
                    table = self._leaf(key, prefix)
                    if self.readout == "exact":
                        o[idx] = table[a, b]
                    else:
                        lam = _sample_index(table[a, b], rng.random(len(idx)))
                        o[idx] = store["eigvals"][lam]
                else:
                    codes = a * tab.n_outcomes + b
                    uniq, inverse = np.unique(codes, return_inverse=True)
                    for u_i, code in enumerate(uniq):
                        sub = idx[inverse == u_i]
                        pair = (int(code) // tab.n_outcomes, int(code) % tab.n_outcomes)
                        nxt.append((prefix + pair, sub))
            groups = nxt
        return o, v, alpha if keep else None

    def estimate(self, observable, n_shots: int, random_state=None, keep_records: bool = False,
                 deterministic: bool = False) -> EstimatorResult:
        """Monte Carlo estimate of ``Tr[O rho_f]`` from ``n_shots`` shots.

        ``random_state`` overrides the estimator's master seed for this call.
        ``deterministic`` forces sequential evaluation of the shot blocks.
        """
        self._check_fitted()
        n_shots = int(n_shots)
        if n_shots < 1:
            raise ValueError("n_shots must be at least 1")
        O = observable_matrix(observable, self.circuit_.n_qubits)
        key = self._prepare_observable(O)
        if not self.order_:
            self._raw_obs = getattr(self, "_raw_obs", {})
            self._raw_projs = getattr(self, "_raw_projs", {})
            self._raw_obs[key] = O
            if self.readout == "sample":
                self._raw_projs[key] = _spectral_projectors(O)[1]
        seed = self.random_state if random_state is None else random_state
        if isinstance(seed, np.random.Generator):
            seed = int(seed.integers(2**63))
        root = np.random.SeedSequence(seed)
        size = int(self.chunk_size)
        blocks = [(c, min(size, n_shots - c * size)) for c in range(math.ceil(n_shots / size))]

        def work(c, m):
            rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(c,)))
            return self._sample_block(key, m, rng, keep_records)

        if deterministic or self.n_jobs == 1 or len(blocks) == 1:
            parts = [work(c, m) for c, m in blocks]
        else:
            parts = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(work)(c, m) for c, m in blocks)
        o = np.concatenate([p[0] for p in parts])
        v = np.concatenate([p[1] for p in parts])
        ov = o * v
        mean = float(ov.mean())
        stderr = float(ov.std(ddof=1) / math.sqrt(n_shots)) if n_shots > 1 else 0.0
        records = None
        if keep_records:
            records = {"alpha": np.concatenate([p[2] for p in parts]), "o": o, "v": v}
        return EstimatorResult(n_shots, mean, stderr, self.negativity_, records)

    def exact_expectation(self, observable, max_terms: int = 10**6) -> float:
        """Enumeration oracle for the expectation the estimator targets."""
        self._check_fitted()
        return exact_hybrid_expectation(self.circuit_, observable, self.tables_, self.noise_, max_terms)

    def reference_expectation(self, observable) -> float:
        self._check_fitted()
        return reference_expectation(self.circuit_, observable, self.noise_)

    def shot_moments(self, observable, max_terms: int = 10**7):
        """Exact first and second moments of the shot value ``o * v`` (exact readout).

        Enumerates every interface outcome sequence through the node cache, so
        the result is the per-shot variance the sampler realizes.
        """
        self._check_fitted()
        if self.readout != "exact":
            raise ValueError("shot moments are available for exact readout only")
        O = observable_matrix(observable, self.circuit_.n_qubits)
        if not self.order_:
            val = densim.expectation(run_circuit(self.circuit_, self.noise_), O)
            return val, val**2
        size = math.prod(self.tables_[k].n_outcomes ** 2 for k in self.order_)
        if size > max_terms:
            raise ValueError(f"enumeration of {size} terms exceeds the limit of {max_terms}")
        key = self._prepare_observable(O)

        def moments(prefix):
            j = len(prefix) // 2
            tab = self.tables_[self.order_[j]]
            node = self._node(prefix)
            w = node.probs[:, None] * tab.probabilities
            if j + 1 == len(self.order_):
                ov = tab.values * self._leaf(key, prefix)
                return float((w * ov).sum()), float((w * ov**2).sum())
            m1 = m2 = 0.0
            for a, b in zip(*np.nonzero(w)):
                c1, c2 = moments(prefix + (int(a), int(b)))
                v = tab.values[a, b]
                m1 += w[a, b] * v * c1
                m2 += w[a, b] * v**2 * c2
            return m1, m2

        return moments(())


def estimate(circuit: Circuit, observable, n_shots: int, noise: NoiseModel = NOISELESS,
             random_state=None, **kwargs) -> EstimatorResult:
    """One-call wrapper around :class:`QCQSimulator`."""
    sim = QCQSimulator(noise_unit=noise.unit, noise_meas=noise.meas, noise_reprep=noise.reprep,
                       random_state=random_state, **kwargs)
    return sim.fit(circuit).estimate(observable, n_shots)
