"""Command-line front end.

Every subcommand reads an optional JSON config file (``--config``); scalar
flags override file values, which override built-in defaults. Results go to
``--output-dir``, else ``$QCQSIM_OUTPUT_DIR``, else ``./qcqsim-out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from . import __version__, circuits, experiments, io, negopt
from .circuits import HVAParams
from .densim import NoiseModel

log = logging.getLogger("qcqsim")

SUMMARY_SCHEMA = "qcqsim.summary/1"
CSV_SCHEMA = "qcqsim.results-csv/1"
KINDS = ("chsh", "tfim", "negopt", "validate", "params")
_NOISE_DEFAULTS = {"chsh": experiments.CHSH_NOISE, "tfim": experiments.TFIM_NOISE}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved settings of one run (see ``README.md`` for the meaning of each key)."""

    kind: str = "validate"
    n_qubits: int = 4
    distances: list = field(default_factory=lambda: list(range(2, 9)))
    layers: int | None = None
    params_file: str | None = None
    gammas: list | None = None
    betas: list | None = None
    lam_unit: float | None = None
    lam_meas: float | None = None
    lam_reprep: float | None = None
    shots: int = 60_000
    shot_grid: list | None = None
    repetitions: int = 50
    interfaced_layers: list | None = None
    duals: str = "canonical"
    seed: int = 0
    output_dir: str | None = None
    workers: int | None = None
    deterministic: bool = False
    gamma: float | None = None
    chains: int = 1
    anneal: dict = field(default_factory=dict)
    tolerance: float = 1e-3

    def noise(self) -> NoiseModel:
        base = _NOISE_DEFAULTS.get(self.kind, NoiseModel())
        pick = lambda v, d: d if v is None else v  # noqa: E731
        return NoiseModel(pick(self.lam_unit, base.unit), pick(self.lam_meas, base.meas),
                          pick(self.lam_reprep, base.reprep))

    def to_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _key_lines(text: str) -> dict:
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        for name in _FIELDS:
            if f'"{name}"' in line and name not in lines:
                lines[name] = i
    return lines


def load_config_file(path) -> tuple:
    """Parse a config file; returns ``(values, key_lines)``.

    A run summary is accepted as well, in which case its config echo is used.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be an object")
    if data.get("schema") == SUMMARY_SCHEMA:
        data = data["config"]
    lines = _key_lines(text)
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"{path}:{lines.get(unknown[0], 1)}: unknown key {unknown[0]!r}")
    return data, lines


def validate_config(cfg: ExperimentConfig, where=lambda key: "") -> ExperimentConfig:
    def fail(key, msg):
        raise ConfigError(f"{where(key)}{key}: {msg}")

    if cfg.kind not in KINDS:
        fail("kind", f"must be one of {KINDS}")
    for key in ("lam_unit", "lam_meas", "lam_reprep"):
        v = getattr(cfg, key)
        if v is not None and not 0 <= v <= 1:
            fail(key, "must lie in [0, 1]")
    if cfg.shots < 1:
        fail("shots", "must be at least 1")
    if cfg.shot_grid is not None and (not cfg.shot_grid or min(cfg.shot_grid) < 1):
        fail("shot_grid", "needs at least one shot count, all >= 1")
    if cfg.repetitions < 1:
        fail("repetitions", "must be at least 1")
    if any(d < 2 for d in cfg.distances):
        fail("distances", "every distance must be at least 2")
    if not 3 <= cfg.n_qubits <= 12 and cfg.kind in ("tfim", "params"):
        fail("n_qubits", "must lie in [3, 12]")
    for key in ("params_file",):
        v = getattr(cfg, key)
        if v is not None and not Path(v).exists():
            fail(key, f"file {v} does not exist")
    if cfg.duals != "canonical" and not Path(cfg.duals).exists():
        fail("duals", f"expected 'canonical' or an existing dual file, got {cfg.duals!r}")
    if (cfg.gammas is None) != (cfg.betas is None):
        fail("gammas", "gammas and betas must be given together")
    if cfg.chains < 1:
        fail("chains", "must be at least 1")
    try:
        negopt.AnnealConfig(**cfg.anneal)
    except (TypeError, ValueError) as exc:
        fail("anneal", str(exc))
    return cfg


def resolve_config(args) -> ExperimentConfig:
    values, lines = {}, {}
    if args.config:
        values, lines = load_config_file(args.config)
    values["kind"] = args.command
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            values[name] = v
    cfg = ExperimentConfig(**values)
    where = (lambda key: f"{args.config}:{lines.get(key, 1)}: ") if args.config else (lambda key: "")
    return validate_config(cfg, where)


# ---------------------------------------------------------------- helpers

def _version_tag() -> str:
    return f"qcqsim-{__version__}"


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output_dir) if cfg.output_dir else io.output_dir()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(cfg: ExperimentConfig) -> int:
    if cfg.deterministic:
        return 1
    return cfg.workers or os.cpu_count() or 1


def _write_csv(path: Path, columns, rows, deterministic: bool) -> Path:
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: {CSV_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                v = row[c]
                if c == "wall_time" and deterministic:
                    v = 0.0
                out.append(repr(float(v)) if isinstance(v, float) else v)
            w.writerow(out)
    return path


def _write_summary(path: Path, cfg: ExperimentConfig, headline: dict, extra=None) -> Path:
    doc = {"schema": SUMMARY_SCHEMA, "version": _version_tag(), "kind": cfg.kind,
           "seed": cfg.seed, "config": cfg.to_dict(), "headline": headline}
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=1, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def golden_params(n_qubits: int):
    """Archived HVA angles shipped with the package, or ``None``."""
    ref = resources.files("qcqsim") / "data" / f"tfim_params_n{n_qubits}.json"
    if not ref.is_file():
        return None
    with resources.as_file(ref) as p:
        return io.load_params(p)


def _params(cfg: ExperimentConfig) -> HVAParams:
    p = cfg.layers if cfg.layers is not None else cfg.n_qubits // 2
    if cfg.gammas is not None:
        params = HVAParams(tuple(cfg.gammas), tuple(cfg.betas))
    elif cfg.params_file:
        params = io.load_params(cfg.params_file)
    else:
        params = golden_params(cfg.n_qubits)
        if params is None or params.p != p:
            log.info("optimizing HVA angles for N=%d, p=%d", cfg.n_qubits, p)
            params = circuits.optimize_params(cfg.n_qubits, p, cfg.tolerance, random_state=cfg.seed).params
    if params.p != p:
        raise ConfigError(f"layers: angles describe {params.p} layers, expected {p}")
    return params


# ---------------------------------------------------------------- subcommands

def cmd_chsh(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    noise = cfg.noise()
    res = experiments.chsh_experiment(cfg.distances, cfg.shots, noise, seed=cfg.seed,
                                      n_jobs=_workers(cfg), deterministic=cfg.deterministic)
    csv_path = _write_csv(out / "chsh-results.csv",
                          ("mode", "d", "M", "mean", "stderr", "negativity", "wall_time"),
                          res["rows"], cfg.deterministic)
    inter = [r for r in res["rows"] if r["mode"] == "interfaced"]
    headline = {"ideal": res["ideal"], "fits": res["fits"],
                "S": {f"{r['mode']}:{r['d']}": r["mean"] for r in res["rows"]},
                "stderr": {f"{r['mode']}:{r['d']}": r["stderr"] for r in res["rows"]}}
    if inter:
        headline["S_interfaced_d_min"] = inter[0]["mean"]
        headline["stderr_interfaced_d_min"] = inter[0]["stderr"]
    _write_summary(out / "chsh-summary.json", cfg, headline, {"files": {"csv": str(csv_path)}})
    print(f"wrote {csv_path}")
    return 0


def _load_duals(cfg: ExperimentConfig, layers) -> dict | None:
    if cfg.duals == "canonical":
        return None
    d_in, d_out, _ = io.load_duals(cfg.duals)
    return {layer: (d_in, d_out) for layer in layers}


def cmd_tfim(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    params = _params(cfg)
    layers = cfg.interfaced_layers or [params.p]
    grid = cfg.shot_grid or experiments.shot_grid()
    res = experiments.tfim_experiment(cfg.n_qubits, params, layers, cfg.noise(), grid, cfg.repetitions,
                                      cfg.seed, _load_duals(cfg, layers), n_jobs=_workers(cfg),
                                      deterministic=cfg.deterministic)
    gr = res["grid"]
    csv_path = _write_csv(out / "tfim-results.csv",
                          ("M", "mean", "stderr", "spread", "negativity", "repetitions", "wall_time"),
                          gr.rows, cfg.deterministic)
    headline = {
        "sigma_bar": gr.sigma_bar, "r2": gr.r2, "negativity": gr.negativity,
        "pooled_mean": res["pooled_mean"], "pooled_stderr": res["pooled_stderr"],
        "ground_energy": res["ground_energy"], "noiseless_energy": res["noiseless_energy"],
        "reference": res["reference"], "swap_chain_energy": res["swap_chain_energy"],
        "shot_sigma": res["shot_sigma"], "interfaced_cnots": res["interfaced_cnots"],
        "swap_chain_cnots": res["swap_chain_cnots"],
    }
    _write_summary(out / "tfim-summary.json", cfg, headline,
                   {"params": params.to_dict(), "files": {"csv": str(csv_path)}})
    print(f"wrote {csv_path}")
    return 0


def cmd_negopt(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    gamma = cfg.gamma if cfg.gamma is not None else _params(cfg).gammas[-1]
    acfg = negopt.AnnealConfig(**{**cfg.anneal, "seed": cfg.seed})
    t0 = time.perf_counter()
    res = experiments.negopt_experiment(gamma, acfg, cfg.chains, cfg.seed, _workers(cfg))
    wall = time.perf_counter() - t0
    duals_path = io.save_duals(out / "negopt-duals.json", res.dual_in, res.dual_out, gate="zz",
                               gamma=gamma, baseline=res.baseline, best_objective=res.best_objective)
    trace_path = io.save_trace(out / "negopt-trace.csv", res.trace)
    rows = [{"M": 0, "mean": res.best_objective, "stderr": 0.0, "negativity": res.baseline,
             "wall_time": wall}]
    csv_path = _write_csv(out / "negopt-results.csv", ("M", "mean", "stderr", "negativity", "wall_time"),
                          rows, cfg.deterministic)
    headline = {"gamma": gamma, "baseline": res.baseline, "final": res.best_objective,
                "ratio": res.ratio, "steps": res.n_steps, "terminated": res.terminated,
                "max_residual": res.max_residual}
    _write_summary(out / "negopt-summary.json", cfg, headline,
                   {"files": {"duals": str(duals_path), "trace": str(trace_path), "csv": str(csv_path)}})
    print(f"objective {res.best_objective:.6g} vs baseline {res.baseline:.6g} (ratio {res.ratio:.3f})")
    return 0 if res.max_residual <= 1e-8 else 1


def cmd_validate(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    checks = experiments.validation_suite(cfg.seed)
    n_pass = sum(ok for _, ok, _ in checks)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    print(f"{n_pass}/{len(checks)} checks passed")
    headline = {"passed": n_pass, "failed": len(checks) - n_pass,
                "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks]}
    _write_summary(out / "validate-summary.json", cfg, headline)
    return 0 if n_pass == len(checks) else 1


def cmd_params(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    p = cfg.layers if cfg.layers is not None else cfg.n_qubits // 2
    res = circuits.optimize_params(cfg.n_qubits, p, cfg.tolerance, random_state=cfg.seed)
    ppath = io.save_params(out / f"tfim_params_n{cfg.n_qubits}.json", res.params, n_qubits=cfg.n_qubits,
                           g=1.0, energy=res.energy, ground_energy=res.ground_energy, gap=res.gap)
    cpath = io.save_circuit(out / f"tfim_circuit_n{cfg.n_qubits}.json",
                            circuits.hva_circuit(cfg.n_qubits, res.params, "interfaced"))
    headline = {"energy": res.energy, "ground_energy": res.ground_energy, "gap": res.gap,
                "converged": res.converged, "evaluations": res.n_evaluations}
    _write_summary(out / "params-summary.json", cfg, headline,
                   {"params": res.params.to_dict(), "files": {"params": str(ppath), "circuit": str(cpath)}})
    print(f"gap {res.gap:.3e} ({'converged' if res.converged else 'not converged'}); wrote {ppath}")
    return 0 if res.converged else 1


COMMANDS = {"chsh": cmd_chsh, "tfim": cmd_tfim, "negopt": cmd_negopt,
            "validate": cmd_validate, "params": cmd_params}


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcqsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version_tag())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or a previous run summary)")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    common.add_argument("--deterministic", action="store_true", help="sequential, reproducible accumulation")
    common.add_argument("-v", "--verbose", action="store_true")
    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--lam-unit", dest="lam_unit", type=float)
    noise.add_argument("--lam-meas", dest="lam_meas", type=float)
    noise.add_argument("--lam-reprep", dest="lam_reprep", type=float)
    hva = argparse.ArgumentParser(add_help=False)
    hva.add_argument("-N", "--n-qubits", dest="n_qubits", type=int)
    hva.add_argument("--layers", type=int)
    hva.add_argument("--params-file", dest="params_file")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("chsh", parents=[common, noise], help="Bell polynomial versus distance")
    p.add_argument("--distances", type=_int_list, help="comma-separated, e.g. 2,3,4")
    p.add_argument("--shots", type=int)
    p = sub.add_parser("tfim", parents=[common, noise, hva], help="TFIM energy over a shot grid")
    p.add_argument("--shot-grid", dest="shot_grid", type=_int_list)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--interfaced-layers", dest="interfaced_layers", type=_int_list)
    p.add_argument("--duals", help="'canonical' or a dual file written by negopt")
    p = sub.add_parser("negopt", parents=[common, hva], help="anneal the duals of a ZZ interface")
    p.add_argument("--gamma", type=float, help="ZZ angle (default: last-layer angle of the TFIM ansatz)")
    p.add_argument("--chains", type=int)
    sub.add_parser("validate", parents=[common], help="run the invariant suite")
    p = sub.add_parser("params", parents=[common, hva], help="optimize and archive HVA angles")
    p.add_argument("--tolerance", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.kind](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
