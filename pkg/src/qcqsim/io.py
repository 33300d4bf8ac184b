"""Plain-text file formats.

Matrices are JSON objects with a schema tag, the shape, an ordering tag, a
provenance flag and the entries in row-major order (complex entries as
interleaved ``re, im`` pairs). Circuits and HVA angles are JSON as well;
annealing traces are CSV and shot logs are JSON lines.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .circuits import Circuit, HVAParams
from .frames import DualCoefficients

MATRIX_SCHEMA = "qcqsim.matrix/1"
DUALS_SCHEMA = "qcqsim.duals/1"
PARAMS_SCHEMA = "qcqsim.hva-params/1"
TRACE_COLUMNS = ("step", "temperature", "sigma", "objective", "best", "accepted")


def matrix_to_dict(mat, ordering: str = "", provenance: str = "", kind: str = "matrix") -> dict:
    mat = np.asarray(mat)
    complex_ = np.iscomplexobj(mat)
    if complex_:
        entries = np.stack([mat.real, mat.imag], axis=-1).ravel()
    else:
        entries = mat.astype(float).ravel()
    return {
        "schema": MATRIX_SCHEMA,
        "kind": kind,
        "shape": list(mat.shape),
        "dtype": "complex" if complex_ else "real",
        "ordering": ordering,
        "provenance": provenance,
        "entries": entries.tolist(),
    }


def matrix_from_dict(data: dict) -> np.ndarray:
    if data.get("schema") != MATRIX_SCHEMA:
        raise ValueError(f"not a matrix record (schema {data.get('schema')!r})")
    shape = tuple(data["shape"])
    raw = np.asarray(data["entries"], dtype=float)
    if data.get("dtype") == "complex":
        raw = raw.reshape(shape + (2,))
        return raw[..., 0] + 1j * raw[..., 1]
    return raw.reshape(shape)


def _write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")
    return path


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_matrix(path, mat, ordering: str = "", provenance: str = "", kind: str = "matrix") -> Path:
    return _write_json(path, matrix_to_dict(mat, ordering, provenance, kind))


def load_matrix(path) -> np.ndarray:
    return matrix_from_dict(_read_json(path))


def dual_to_dict(dual: DualCoefficients) -> dict:
    out = matrix_to_dict(dual.matrix, dual.ordering, dual.provenance, kind="dual")
    if dual.factors:
        out["factors"] = [matrix_to_dict(f.matrix, f.ordering, f.provenance, kind="dual")
                          for f in dual.factors]
    return out


def dual_from_dict(data: dict) -> DualCoefficients:
    factors = tuple(DualCoefficients(matrix_from_dict(f), f.get("provenance", ""), f.get("ordering", ""))
                    for f in data.get("factors", ()))
    return DualCoefficients(matrix_from_dict(data), data.get("provenance", ""),
                            data.get("ordering", ""), factors)


def save_duals(path, dual_in: DualCoefficients, dual_out: DualCoefficients, **meta) -> Path:
    """Store an input/output dual pair with free-form metadata."""
    return _write_json(path, {"schema": DUALS_SCHEMA, **meta,
                              "dual_in": dual_to_dict(dual_in), "dual_out": dual_to_dict(dual_out)})


def load_duals(path):
    """Return ``(dual_in, dual_out, metadata)``."""
    data = _read_json(path)
    if data.get("schema") != DUALS_SCHEMA:
        raise ValueError(f"{path}: not a dual-pair file")
    meta = {k: v for k, v in data.items() if k not in ("dual_in", "dual_out")}
    return dual_from_dict(data["dual_in"]), dual_from_dict(data["dual_out"]), meta


def save_trace(path, trace: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in zip(*(trace[c] for c in TRACE_COLUMNS)):
            step, temp, sigma, obj, best, acc = row
            w.writerow([int(step), repr(float(temp)), repr(float(sigma)), repr(float(obj)),
                        repr(float(best)), int(bool(acc))])
    return path


def load_trace(path) -> dict:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    out = {c: np.array([float(r[c]) for r in rows]) for c in TRACE_COLUMNS}
    out["step"] = out["step"].astype(np.int64)
    out["accepted"] = out["accepted"].astype(bool)
    return out


def save_circuit(path, circuit: Circuit) -> Path:
    return _write_json(path, circuit.to_dict())


def load_circuit(path) -> Circuit:
    return Circuit.from_dict(_read_json(path))


def save_params(path, params: HVAParams, **meta) -> Path:
    return _write_json(path, {"schema": PARAMS_SCHEMA, **meta, **params.to_dict()})


def load_params(path) -> HVAParams:
    data = _read_json(path)
    if data.get("schema") != PARAMS_SCHEMA:
        raise ValueError(f"{path}: not an HVA parameter file")
    return HVAParams(tuple(data["gammas"]), tuple(data["betas"]))


def write_shot_log(path, records: dict, start: int = 0) -> Path:
    """Append one JSON line per shot: index, interface outcomes, ``o`` and ``v``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    alpha, o, v = records["alpha"], records["o"], records["v"]
    with path.open("a") as fh:
        for i in range(len(o)):
            fh.write(json.dumps({"shot": start + i, "alpha": alpha[i].tolist(),
                                 "o": float(o[i]), "v": float(v[i])}) + "\n")
    return path


def read_shot_log(path) -> list:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def output_dir(default: str = "qcqsim-out") -> Path:
    """Output directory from ``QCQSIM_OUTPUT_DIR`` or ``default``."""
    return Path(os.environ.get("QCQSIM_OUTPUT_DIR", default))
