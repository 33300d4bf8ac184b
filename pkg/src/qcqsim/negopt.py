"""Negativity reduction by simulated annealing over dual frames.

The search space is the set of generalized inverses of the per-qubit overlap
matrix ``T``. Starting from the pseudo-inverse, proposals are generated with the
Rao parametrization ``G' = G + C - G T C T G`` (``C`` Gaussian), which keeps
``T G' T = T`` exactly, and accepted with the Metropolis rule at a cooling
temperature. The objective is the mean squared l1-norm of the interface
coefficient rows, one row per measured outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from ._validation import DualFrameError, check_random_state
from .frames import (
    DUAL_ATOL,
    DualCoefficients,
    FactorableFrame,
    SingleQubitFrame,
    _kron_all,
    canonical_dual,
    channel_transfer,
    overlap_matrix,
    pauli6_frame,
    validate_dual,
)

PROPOSALS = ("cyclic", "joint", "random")


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing schedule.

    Attributes
    ----------
    t0 : float
        Initial temperature.
    cooling : float
        Temperature factor applied after every step, in ``(0, 1)``.
    sigma2 : float
        Initial variance of the entries of the Rao perturbation ``C``.
    window : int
        Steps per acceptance-ratio window; ``sigma`` is halved when the
        window's acceptance ratio falls below ``accept_threshold``.
    tol, patience : float, int
        Stop once the best objective improved by less than ``tol`` over the
        last ``patience`` accepted steps.
    proposal : {"cyclic", "joint", "random"}
        Which factors a step perturbs: one factor in rotation, all factors
        together, or one factor drawn at random.
    """

    t0: float = 10.0
    cooling: float = 0.999
    sigma2: float = 0.1
    window: int = 100
    accept_threshold: float = 0.23
    tol: float = 1e-2
    patience: int = 100
    sigma_floor: float = 1e-6
    max_steps: int = 200_000
    proposal: str = "cyclic"
    seed: int | None = 0

    def __post_init__(self):
        for name in ("t0", "sigma2", "tol", "sigma_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if not 0 < self.accept_threshold < 1:
            raise ValueError("accept_threshold must lie in (0, 1)")
        for name in ("window", "patience", "max_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnnealResult:
    """Best duals found by :func:`anneal` and the chain trace.

    ``in_factors`` / ``out_factors`` are per-qubit coefficient matrices of the
    measurement-side and repreparation-side duals. ``trace`` maps column names
    (``step``, ``temperature``, ``sigma``, ``objective``, ``best``,
    ``accepted``) to arrays with one entry per step.
    """

    in_factors: tuple
    out_factors: tuple
    best_objective: float
    baseline: float
    trace: dict = field(repr=False)
    n_steps: int = 0
    terminated: str = ""
    max_residual: float = 0.0
    config: AnnealConfig | None = None

    @property
    def ratio(self) -> float:
        return self.best_objective / self.baseline

    def _dual(self, factors) -> DualCoefficients:
        return DualCoefficients.from_factors(
            [DualCoefficients(f, "annealed") for f in factors], provenance="annealed")

    @property
    def dual_in(self) -> DualCoefficients:
        return self._dual(self.in_factors)

    @property
    def dual_out(self) -> DualCoefficients:
        return self._dual(self.out_factors)


def rao_step(current, C, T) -> DualCoefficients:
    """Move to another generalized inverse of ``T``: ``G + C - G T C T G``."""
    G = np.asarray(current.matrix if hasattr(current, "matrix") else current, dtype=float)
    Tm = np.asarray(T.matrix if hasattr(T, "matrix") else T, dtype=float)
    C = np.asarray(C, dtype=float)
    if not (G.shape == Tm.shape == C.shape):
        raise ValueError("current, C and T must share one square shape")
    res = validate_dual(Tm, G)
    if res > DUAL_ATOL:
        raise DualFrameError(f"current dual is not a generalized inverse (residual {res:.3e})")
    new = G + C - G @ Tm @ C @ Tm @ G
    res = validate_dual(Tm, new)
    if res > DUAL_ATOL:
        raise DualFrameError(f"Rao step lost the generalized-inverse property (residual {res:.3e})")
    return DualCoefficients(new, "annealed", getattr(current, "ordering", ""))


def _coefficients(in_factors, out_factors, transfer: np.ndarray) -> np.ndarray:
    G_in = _kron_all([np.asarray(f, dtype=float) for f in in_factors])
    G_out = _kron_all([np.asarray(f, dtype=float) for f in out_factors])
    if not (G_in.shape == G_out.shape == transfer.shape):
        raise ValueError(
            f"factors compose to {G_in.shape} / {G_out.shape}, transfer matrix is {transfer.shape}")
    return G_in @ transfer.T @ G_out.T


def objective(in_factors, out_factors, transfer) -> float:
    """Mean over measured outcomes ``a`` of the squared l1-norm of row ``a``.

    The rows are those of the interface coefficient table
    ``C[a, b] = (G_in T_U^T G_out^T)[a, b]``.
    """
    TU = np.asarray(transfer.matrix if hasattr(transfer, "matrix") else transfer, dtype=float)
    coef = _coefficients(in_factors, out_factors, TU)
    return float(np.mean(np.abs(coef).sum(axis=1) ** 2))


def anneal(U, frame=None, cfg: AnnealConfig | None = None, rng=None) -> AnnealResult:
    """Anneal the input and output dual factors of the interface for ``U``.

    All factors start at the per-qubit pseudo-inverse. Proposals failing the
    ``1e-8`` generalized-inverse check are rejected, so every accepted state is
    a valid dual. ``rng`` overrides ``cfg.seed`` when given.
    """
    cfg = cfg or AnnealConfig()
    rng = check_random_state(cfg.seed if rng is None else rng)
    U = np.asarray(U, dtype=complex)
    k = int(round(math.log2(U.shape[0])))
    single = pauli6_frame() if frame is None else frame
    if isinstance(single, FactorableFrame):
        factors = single.factors
    else:
        factors = (single,) * k
    if len(factors) != k:
        raise ValueError(f"frame acts on {len(factors)} qubit(s), gate on {k}")
    full = FactorableFrame(tuple(factors))
    TU = channel_transfer(U, full).matrix
    Ts = [overlap_matrix(f).matrix for f in factors]
    pinvs = [canonical_dual(T).matrix for T in Ts]
    nf = 2 * k
    state = [p.copy() for p in pinvs + pinvs]
    overlaps = Ts + Ts

    def energy(s):
        return objective(s[:k], s[k:], TU)

    E = energy(state)
    baseline = best = E
    best_state = [s.copy() for s in state]
    temp, sigma = cfg.t0, math.sqrt(cfg.sigma2)
    window_acc = n_acc = 0
    checkpoint = best
    max_res = max(validate_dual(T, G) for T, G in zip(overlaps, state))
    rows = []
    terminated = "max_steps"
    step = 0
    for step in range(1, cfg.max_steps + 1):
        if cfg.proposal == "joint":
            idx = range(nf)
        elif cfg.proposal == "cyclic":
            idx = ((step - 1) % nf,)
        else:
            idx = (int(rng.integers(nf)),)
        prop = list(state)
        res = 0.0
        for i in idx:
            C = rng.normal(0.0, sigma, state[i].shape)
            G, T = state[i], overlaps[i]
            prop[i] = G + C - G @ T @ C @ T @ G
            res = max(res, validate_dual(T, prop[i]))
        E_new = energy(prop)
        dE = E_new - E
        u = rng.random()
        accepted = res <= DUAL_ATOL and (dE < 0 or u < math.exp(-dE / temp))
        if accepted:
            state, E = prop, E_new
            max_res = max(max_res, res)
            window_acc += 1
            n_acc += 1
            if E < best:
                best = E
                best_state = [s.copy() for s in state]
        rows.append((step, temp, sigma, E, best, accepted))
        temp *= cfg.cooling
        if step % cfg.window == 0:
            if window_acc / cfg.window < cfg.accept_threshold:
                sigma = max(sigma / 2, cfg.sigma_floor)
            window_acc = 0
        if accepted and n_acc % cfg.patience == 0:
            if checkpoint - best < cfg.tol:
                terminated = "converged"
                break
            checkpoint = best

    cols = list(zip(*rows)) if rows else [()] * 6
    names = ("step", "temperature", "sigma", "objective", "best", "accepted")
    dtypes = (np.int64, float, float, float, float, bool)
    trace = {n: np.asarray(c, dtype=t) for n, c, t in zip(names, cols, dtypes)}
    return AnnealResult(
        in_factors=tuple(best_state[:k]),
        out_factors=tuple(best_state[k:]),
        best_objective=float(best),
        baseline=float(baseline),
        trace=trace,
        n_steps=step,
        terminated=terminated,
        max_residual=float(max_res),
        config=cfg,
    )


def anneal_chains(U, frame=None, cfg: AnnealConfig | None = None, seeds=(0,), n_jobs: int = 1) -> AnnealResult:
    """Run independent chains (one per seed) and keep the best."""
    cfg = cfg or AnnealConfig()
    jobs = (delayed(anneal)(U, frame, AnnealConfig(**{**cfg.to_dict(), "seed": s})) for s in seeds)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(jobs)
    return min(results, key=lambda r: r.best_objective)


class NegativityAnnealer(BaseEstimator):
    """Estimator wrapper around :func:`anneal`.

    ``fit(U)`` stores the result in ``result_`` and the optimized duals in
    ``dual_in_`` and ``dual_out_``; ``score(U)`` returns the negated objective
    of those duals for the gate ``U``.
    """

    def __init__(self, frame=None, t0=10.0, cooling=0.999, sigma2=0.1, window=100,
                 accept_threshold=0.23, tol=1e-2, patience=100, max_steps=200_000,
                 proposal="cyclic", random_state=0):
        self.frame = frame
        self.t0 = t0
        self.cooling = cooling
        self.sigma2 = sigma2
        self.window = window
        self.accept_threshold = accept_threshold
        self.tol = tol
        self.patience = patience
        self.max_steps = max_steps
        self.proposal = proposal
        self.random_state = random_state

    def _config(self) -> AnnealConfig:
        seed = self.random_state if isinstance(self.random_state, (int, np.integer)) else None
        return AnnealConfig(self.t0, self.cooling, self.sigma2, self.window, self.accept_threshold,
                            self.tol, self.patience, max_steps=self.max_steps,
                            proposal=self.proposal, seed=seed)

    def fit(self, U, y=None):
        rng = self.random_state if isinstance(self.random_state, np.random.Generator) else None
        self.result_ = anneal(U, self.frame, self._config(), rng)
        self.dual_in_ = self.result_.dual_in
        self.dual_out_ = self.result_.dual_out
        self.n_iter_ = self.result_.n_steps
        return self

    def score(self, U, y=None) -> float:
        if not hasattr(self, "result_"):
            raise RuntimeError("call fit(U) first")
        frame = self.frame if self.frame is not None else pauli6_frame()
        k = len(self.result_.in_factors)
        full = frame if isinstance(frame, FactorableFrame) else FactorableFrame((frame,) * k)
        TU = channel_transfer(U, full)
        return -objective(self.result_.in_factors, self.result_.out_factors, TU)
