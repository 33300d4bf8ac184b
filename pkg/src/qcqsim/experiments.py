"""Experiment drivers shared by the command line and the acceptance suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import circuits, densim, engine, frames, negopt
from .circuits import HVAParams
from .densim import NOISELESS, NoiseModel
from .engine import QCQSimulator

CHSH_NOISE = NoiseModel(unit=0.005, meas=0.01, reprep=0.005)
TFIM_NOISE = NoiseModel(unit=0.005)


def derive_seed(seed, *keys) -> int:
    """Deterministic 63-bit seed for the sub-run ``keys`` of master ``seed``."""
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] >> 1)


def shot_grid(lo: int = 1000, hi: int = 100_000, n: int = 5) -> list:
    """``n`` log-spaced shot counts from ``lo`` to ``hi`` (rounded, unique)."""
    return sorted({int(round(m)) for m in np.geomspace(lo, hi, n)})


def fit_inverse_sqrt(shots, sigma):
    """Least-squares fit ``sigma = c / sqrt(M)``; returns ``(c, R^2)``."""
    x = 1 / np.sqrt(np.asarray(shots, dtype=float))
    y = np.asarray(sigma, dtype=float)
    c = float(x @ y / (x @ x))
    ss_res = float(((y - c * x) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return c, r2


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    ci_low: float
    ci_high: float
    intercept: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_slope(x, y, level: float = 0.95) -> SlopeFit:
    """Ordinary least-squares line with a Student-t confidence interval on the slope."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    res = stats.linregress(x, y)
    q = stats.t.ppf(0.5 + level / 2, len(x) - 2)
    return SlopeFit(float(res.slope), float(res.stderr), float(res.slope - q * res.stderr),
                    float(res.slope + q * res.stderr), float(res.intercept))


def variance_test(a, b) -> dict:
    """One-sided F tests comparing the sample variances of ``a`` and ``b``.

    ``p_greater`` is the p-value for "var(a) > var(b)" and ``p_less`` the one
    for "var(a) < var(b)".
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    F = va / vb
    dfa, dfb = len(a) - 1, len(b) - 1
    return {"var_a": float(va), "var_b": float(vb), "ratio": float(F),
            "p_greater": float(stats.f.sf(F, dfa, dfb)), "p_less": float(stats.f.cdf(F, dfa, dfb))}


# ---------------------------------------------------------------- shot grids

@dataclass
class GridResult:
    """Repeated estimates over a shot grid.

    ``rows`` holds one dict per shot count with the mean and spread of the
    repetition means, the mean reported standard error, the negativity and
    the wall time. ``estimates[i]`` lists the repetition means at ``grid[i]``.
    """

    grid: list
    rows: list
    estimates: list = field(repr=False)
    negativity: float = 1.0
    sigma_bar: float = float("nan")
    r2: float = float("nan")

    @property
    def pooled(self) -> tuple:
        """Shot-weighted mean over every repetition and its standard error."""
        w = np.concatenate([[m] * len(e) for m, e in zip(self.grid, self.estimates)]).astype(float)
        x = np.concatenate(self.estimates)
        mean = float((w * x).sum() / w.sum())
        var = np.concatenate([[r["spread"] ** 2] * len(e) for r, e in zip(self.rows, self.estimates)])
        return mean, float(np.sqrt((w**2 * var).sum()) / w.sum())


def run_grid(sim: QCQSimulator, observable, grid, repetitions: int = 50, seed: int = 0,
             deterministic: bool = False) -> GridResult:
    rows, estimates = [], []
    for i, M in enumerate(grid):
        t0 = time.perf_counter()
        res = [sim.estimate(observable, M, random_state=derive_seed(seed, i, r), deterministic=deterministic)
               for r in range(repetitions)]
        wall = time.perf_counter() - t0
        means = np.array([r.mean for r in res])
        estimates.append(means)
        rows.append({
            "M": int(M),
            "mean": float(means.mean()),
            "stderr": float(np.mean([r.stderr for r in res])),
            "spread": float(means.std(ddof=1)) if repetitions > 1 else float(res[0].stderr),
            "negativity": sim.negativity_,
            "repetitions": repetitions,
            "wall_time": wall,
        })
    out = GridResult(list(grid), rows, estimates, sim.negativity_)
    if len(grid) >= 2:
        out.sigma_bar, out.r2 = fit_inverse_sqrt(grid, [r["spread"] for r in rows])
    return out


# ---------------------------------------------------------------- CHSH

def chsh_observable(d: int) -> np.ndarray:
    return densim.embed_operator(circuits.chsh_operator(), (0, d - 1), d)


def chsh_experiment(distances=range(2, 9), n_shots: int = 60_000, noise: NoiseModel = CHSH_NOISE,
                    modes=("interfaced", "swap-chain"), seed: int = 0, n_jobs: int = 1,
                    deterministic: bool = False) -> dict:
    """Bell polynomial versus qubit distance.

    Interfaced runs are sampled with ``n_shots`` shots; swap-chain runs have no
    interfaces and are evaluated exactly on the noisy density matrix.
    """
    rows = []
    for mode in modes:
        for d in distances:
            c = circuits.bell_chsh_circuit(d, mode)
            O = chsh_observable(d)
            t0 = time.perf_counter()
            sim = QCQSimulator(noise_unit=noise.unit, noise_meas=noise.meas, noise_reprep=noise.reprep,
                               n_jobs=n_jobs, random_state=derive_seed(seed, d, len(mode))).fit(c)
            if c.interfaces:
                res = sim.estimate(O, n_shots, deterministic=deterministic)
                S, err, M = res.mean, res.stderr, n_shots
            else:
                S, err, M = sim.reference_expectation(O), 0.0, 0
            rows.append({"mode": mode, "d": d, "M": M, "mean": S, "stderr": err,
                         "negativity": sim.negativity_, "cnots": c.cnot_count(),
                         "reference": sim.reference_expectation(O),
                         "wall_time": time.perf_counter() - t0})
    fits = {}
    for mode in modes:
        sel = [r for r in rows if r["mode"] == mode]
        if len(sel) >= 3:
            fits[mode] = fit_slope([r["d"] for r in sel], [r["mean"] for r in sel]).to_dict()
    return {"rows": rows, "fits": fits, "ideal": 2 * math.sqrt(2)}


# ---------------------------------------------------------------- TFIM

def tfim_experiment(n_qubits: int, params: HVAParams, interfaced_layers=None,
                    noise: NoiseModel = NOISELESS, grid=None, repetitions: int = 50, seed: int = 0,
                    duals=None, g: float = 1.0, n_jobs: int = 1, deterministic: bool = False) -> dict:
    """Energy estimates of the HVA circuit with interfaced ring-closing gates.

    ``duals`` maps a 1-based layer to a ``(dual_in, dual_out)`` pair.
    """
    grid = shot_grid() if grid is None else list(grid)
    H = circuits.tfim_hamiltonian(n_qubits, g)
    c = circuits.hva_circuit(n_qubits, params, "interfaced", interfaced_layers)
    gate_duals = None
    if duals:
        layer_of = _interface_layers(c, params.p, n_qubits)
        gate_duals = {k: duals[layer] for k, layer in layer_of.items() if layer in duals}
    sim = QCQSimulator(duals=gate_duals, noise_unit=noise.unit, noise_meas=noise.meas,
                       noise_reprep=noise.reprep, n_jobs=n_jobs).fit(c)
    result = run_grid(sim, H, grid, repetitions, seed, deterministic)
    swap = circuits.hva_circuit(n_qubits, params, "swap-chain")
    m1, m2 = sim.shot_moments(H) if len(c.interfaces) <= 2 else (float("nan"), float("nan"))
    pooled_mean, pooled_err = result.pooled
    return {
        "grid": result,
        "circuit": c,
        "ground_energy": circuits.exact_ground_energy(n_qubits, g),
        "noiseless_energy": circuits.hva_energy(params, n_qubits, g),
        "reference": sim.reference_expectation(H),
        "swap_chain_energy": engine.reference_expectation(swap, H, noise),
        "swap_chain_cnots": swap.cnot_count(),
        "interfaced_cnots": c.cnot_count(),
        "negativity": sim.negativity_,
        "shot_sigma": float(math.sqrt(max(m2 - m1**2, 0.0))),
        "pooled_mean": pooled_mean,
        "pooled_stderr": pooled_err,
    }


def _interface_layers(circuit, p: int, n_qubits: int) -> dict:
    """Map interface gate indices of an HVA circuit to their 1-based layer."""
    rx_seen, out = 0, {}
    for k, gate in enumerate(circuit.gates):
        if gate.kind == "rx":
            rx_seen += 1
        if k in circuit.interfaces:
            out[k] = rx_seen // n_qubits + 1
    return out


# ---------------------------------------------------------------- annealing

def negopt_experiment(gamma: float, cfg: negopt.AnnealConfig | None = None, chains: int = 1,
                      seed: int = 0, n_jobs: int = 1) -> negopt.AnnealResult:
    """Anneal the duals of ``zz(gamma)`` with ``chains`` independent seeds."""
    cfg = cfg or negopt.AnnealConfig(seed=seed)
    U = circuits.gate_unitary("zz", (gamma,))
    if chains == 1:
        return negopt.anneal(U, None, negopt.AnnealConfig(**{**cfg.to_dict(), "seed": seed}))
    seeds = [derive_seed(seed, c) for c in range(chains)]
    return negopt.anneal_chains(U, None, cfg, seeds, n_jobs)


# ---------------------------------------------------------------- Hoeffding

def hoeffding_coverage(circuit, observable, eps: float = 0.2, delta: float = 0.1,
                       repetitions: int = 200, noise: NoiseModel = NOISELESS, seed: int = 0) -> dict:
    """Fraction of repetitions with ``|O_M - exact| <= eps`` at the Hoeffding shot count.

    Shots use eigenvalue-sampled readout so every shot value is bounded by
    ``||O|| n``, the setting the bound is stated for.
    """
    O = engine.observable_matrix(observable, circuit.n_qubits)
    sim = QCQSimulator(noise_unit=noise.unit, noise_meas=noise.meas, noise_reprep=noise.reprep,
                       readout="sample").fit(circuit)
    exact = sim.exact_expectation(O)
    norm = float(np.abs(np.linalg.eigvalsh(O)).max())
    M = engine.required_samples(sim.negativity_, norm, eps, delta)
    errors = np.array([sim.estimate(O, M, random_state=derive_seed(seed, r)).mean - exact
                       for r in range(repetitions)])
    return {"M": M, "exact": exact, "negativity": sim.negativity_, "norm": norm,
            "coverage": float(np.mean(np.abs(errors) <= eps)), "max_error": float(np.abs(errors).max())}


# ---------------------------------------------------------------- validation suite

def validation_suite(seed: int = 0) -> list:
    """Invariant checks of frames, duals and the estimator.

    Returns ``(name, passed, detail)`` tuples.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    single = frames.pauli6_frame()
    T1 = frames.overlap_matrix(single)
    G1 = frames.canonical_dual(T1)
    add("pauli6 completeness", np.abs(single.elements.sum(0) - np.eye(2)).max() <= 1e-12)
    add("canonical dual residual", frames.validate_dual(T1, G1) <= 1e-10)

    two = frames.FactorableFrame.uniform(single, 2)
    T2 = frames.overlap_matrix(two)
    G2 = frames.canonical_dual(T2)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 3))
        frame, G = (single, G1) if n == 1 else (two, G2)
        A = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
        rho = A @ A.conj().T
        rho /= np.trace(rho)
        worst = max(worst, np.abs(frames.reconstruct(frame, G, rho) - rho).max())
    add("frame reconstruction", worst <= 1e-9, f"max error {worst:.2e}")

    G = G1
    res = 0.0
    for _ in range(100):
        G = negopt.rao_step(G, rng.normal(0, np.sqrt(0.1), (6, 6)), T1)
        res = max(res, frames.validate_dual(T1, G))
    add("rao chain validity", res <= 1e-8, f"max residual {res:.2e}")

    rho = densim.init_state(2)
    rho = densim.apply_gate(rho, circuits.gate_unitary("h"), (0,))
    rho = densim.apply_gate(rho, circuits.gate_unitary("cx"), (0, 1))
    for q in range(2):
        rho = densim.apply_depolarizing(rho, q, 0.3)
    tr = abs(np.trace(rho.data) - 1)
    add("channel trace preservation", tr <= 1e-12, f"trace error {tr:.2e}")

    c = circuits.bell_chsh_circuit(3, "interfaced")
    O = densim.embed_operator(np.kron(densim.Z, densim.Z), (0, 2), 3)
    sim = QCQSimulator(noise_unit=0.01, noise_meas=0.01, noise_reprep=0.01).fit(c)
    diff = abs(sim.exact_expectation(O) - sim.reference_expectation(O))
    add("oracle equals reference", diff <= 1e-9, f"difference {diff:.2e}")

    a = sim.estimate(O, 20_000, random_state=seed)
    b = sim.estimate(O, 20_000, random_state=seed)
    add("seeded determinism", a.mean == b.mean and a.stderr == b.stderr)
    z = abs(a.mean - sim.exact_expectation(O)) / a.stderr
    add("estimator unbiasedness", z <= 5, f"z = {z:.2f}")

    probs = densim.outcome_probabilities(densim.init_state(1), single, (0,))
    add("pauli6 outcome probabilities",
        np.allclose(probs, [1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 3, 0], atol=1e-12))
    add("sample-size bound", engine.required_samples(1, 1, 0.1, 0.05) == 738)
    return checks
