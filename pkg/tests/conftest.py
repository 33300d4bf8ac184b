from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import unitary_group

from qcqsim.frames import SingleQubitFrame

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list = []


def random_density(rng, n_qubits: int, rank: int | None = None) -> np.ndarray:
    d = 2**n_qubits
    r = rank or d
    A = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, d: int) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def tetrahedral_frame() -> SingleQubitFrame:
    """Symmetric informationally complete POVM with four elements (full-rank overlap)."""
    vecs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1, -1])
    els = [(np.eye(2) + v[0] * X + v[1] * Y + v[2] * Z) / 4 for v in vecs]
    return SingleQubitFrame(np.array(els), ("t0", "t1", "t2", "t3"), name="tetra")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
