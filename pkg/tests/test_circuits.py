from __future__ import annotations

import json

import numpy as np
import pytest

from qcqsim import circuits, densim
from qcqsim.circuits import Circuit, Gate, HVAParams
from qcqsim.densim import NoiseModel

SQ2 = np.sqrt(2)


def _fidelity_bell(rho, a, b, n):
    red = densim.partial_trace_array(rho, (a, b), n)
    phi = np.array([1, 0, 0, 1]) / SQ2
    return float(np.real(phi @ red @ phi))


# ---------------------------------------------------------------- gates and circuits

def test_gate_unitaries_are_unitary():
    for kind, params in [("h", ()), ("rx", (0.3,)), ("ry", (1.1,)), ("rz", (-2.0,)), ("zz", (0.7,)),
                         ("cx", ()), ("cz", ()), ("swap", ())]:
        U = circuits.gate_unitary(kind, params)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(len(U)), atol=1e-14)


def test_zz_convention_matches_expm():
    from scipy.linalg import expm
    g = 0.37
    ZZ = np.kron(densim.Z, densim.Z)
    np.testing.assert_allclose(circuits.gate_unitary("zz", (g,)), expm(-0.5j * g * ZZ), atol=1e-14)
    np.testing.assert_allclose(circuits.gate_unitary("rx", (g,)), expm(-0.5j * g * densim.X), atol=1e-14)


def test_zz_synthesis_from_cnots():
    g = 0.9
    c = Circuit(2, circuits._zz_from_cnots(0, 1, g))
    U = np.eye(4, dtype=complex)
    for gate in c.gates:
        full = gate.unitary if len(gate.qubits) == 2 else np.kron(np.eye(2), gate.unitary)
        U = full @ U
    np.testing.assert_allclose(U, circuits.gate_unitary("zz", (g,)), atol=1e-14)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("cx", (0,))
    with pytest.raises(ValueError):
        Gate("foo", (0,))
    with pytest.raises(ValueError):
        Gate("unitary", (0,))
    with pytest.raises(IndexError):
        Circuit(2, [Gate("h", (2,))])
    with pytest.raises(ValueError):
        Circuit(2, [Gate("h", (0,))], {3})
    assert Gate("swap", (0, 1)).n_cnots == 3
    assert Gate("unitary", (0, 1), matrix=np.eye(4), cnot_count=5).n_cnots == 5


def test_circuit_roundtrip_dict():
    U = circuits.gate_unitary("zz", (0.2,)) @ circuits.gate_unitary("swap")
    c = Circuit(3, [Gate("h", (0,)), Gate("unitary", (0, 2), matrix=U, cnot_count=5),
                    Gate("rx", (1,), (0.25,))], {1}, "demo")
    back = Circuit.from_dict(json.loads(json.dumps(c.to_dict())))
    assert back.interfaces == c.interfaces and back.name == "demo"
    for g1, g2 in zip(c.gates, back.gates):
        assert (g1.kind, g1.qubits, g1.params, g1.cnot_count) == (g2.kind, g2.qubits, g2.params, g2.cnot_count)
        np.testing.assert_allclose(g1.unitary, g2.unitary, atol=0)


# ---------------------------------------------------------------- Bell / CHSH

def test_bell_d2_has_no_swaps():
    for mode in ("swap-chain", "interfaced"):
        c = circuits.bell_chsh_circuit(2, mode)
        assert [g.kind for g in c.gates] == ["h", "cx"]


def test_bell_interfaced_has_one_interface():
    for d in range(2, 9):
        c = circuits.bell_chsh_circuit(d, "interfaced")
        assert len(c.interfaces) == 1
        assert c.gates[c.interface_list[0]].qubits == (0, d - 1)
        assert c.cnot_count() == 0
    with pytest.raises(ValueError):
        circuits.bell_chsh_circuit(1)


def test_swap_chain_bell_d5_is_maximally_entangled():
    c = circuits.bell_chsh_circuit(5, "swap-chain")
    rho = circuits.run_circuit(c).data
    assert _fidelity_bell(rho, 0, 4, 5) == pytest.approx(1.0, abs=1e-12)
    # 2 * 3 SWAPs on each side of the adjacent CNOT
    assert c.cnot_count() == 6 * (5 - 2) + 1


@pytest.mark.parametrize("d", range(2, 7))
def test_swap_chain_equals_direct(d):
    a = circuits.statevector(circuits.bell_chsh_circuit(d, "swap-chain"))
    b = circuits.statevector(circuits.bell_chsh_circuit(d, "direct"))
    assert abs(np.vdot(a, b)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_chsh_polynomial_values():
    phi = np.array([1, 0, 0, 1]) / SQ2
    assert circuits.chsh_polynomial(np.outer(phi, phi)) == pytest.approx(2 * SQ2, abs=1e-12)
    assert circuits.chsh_polynomial(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-15)
    zero = np.zeros((4, 4))
    zero[0, 0] = 1
    assert abs(circuits.chsh_polynomial(zero)) <= 2 + 1e-12


def test_chsh_calibration_finds_tsirelson_layout():
    s0, s1, S = circuits.calibrate_chsh_settings()
    assert S == pytest.approx(2 * SQ2, abs=1e-12)
    assert (s0, s1) == circuits.CHSH_SIGNS
    # operator norm of the Bell operator equals the quantum maximum
    assert np.abs(np.linalg.eigvalsh(circuits.chsh_operator())).max() == pytest.approx(2 * SQ2)


def test_product_states_respect_classical_bound(rng):
    for _ in range(50):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        b = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        assert abs(circuits.chsh_polynomial(np.outer(psi, psi.conj()))) <= 2 + 1e-12


def test_noisy_swap_chain_chsh_decreases():
    noise = NoiseModel(0.005, 0.01, 0.005)
    S = []
    for d in range(2, 9):
        c = circuits.bell_chsh_circuit(d, "swap-chain")
        rho = densim.partial_trace_array(circuits.run_circuit(c, noise).data, (0, d - 1), d)
        S.append(circuits.chsh_polynomial(rho))
    slope = np.polyfit(np.arange(2, 9), S, 1)[0]
    assert slope < 0
    assert np.all(np.diff(S) < 0)


# ---------------------------------------------------------------- TFIM

def test_tfim_hamiltonian_properties():
    H = circuits.tfim_hamiltonian(3, 0.0).matrix()
    np.testing.assert_allclose(H, H.conj().T)
    # g = 0: diagonal with -sum z_i z_{i+1}; ground states are the ferromagnets
    assert np.linalg.eigvalsh(H)[0] == pytest.approx(-3)
    assert circuits.exact_ground_energy(3, 0.0) == pytest.approx(-3)
    with pytest.raises(ValueError):
        circuits.tfim_hamiltonian(2)


def test_tfim_large_field_limit():
    N, g = 4, 200.0
    assert circuits.exact_ground_energy(N, g) / (N * g) == pytest.approx(-1, abs=1e-4)


def test_tfim_ground_energy_n4_golden():
    # free-fermion closed form for the periodic chain (even-parity sector, antiperiodic momenta)
    N = 4
    k = np.pi * (2 * np.arange(N) + 1) / N
    closed = -np.sum(np.sqrt(2 + 2 * np.cos(k)))
    assert circuits.exact_ground_energy(N, 1.0) == pytest.approx(closed, abs=1e-12)
    assert circuits.exact_ground_energy(4, 1.0) == pytest.approx(-5.226251859505501, abs=1e-12)


def test_variational_bound_plus_state():
    N = 4
    plus = np.full(2**N, 2 ** (-N / 2))
    H = circuits.tfim_hamiltonian(N).matrix()
    assert circuits.exact_ground_energy(N) <= np.real(plus @ H @ plus)


def _p(gammas, betas):
    return HVAParams(tuple(gammas), tuple(betas))


def test_hva_interfaced_layers():
    p = _p([0.1, 0.2], [0.3, 0.4])
    c = circuits.hva_circuit(4, p, "interfaced", [2])
    assert len(c.interfaces) == 1
    assert c.gates[c.interface_list[0]].qubits == (0, 3)
    assert c.gates[c.interface_list[0]].params == (0.2,)
    assert len(circuits.hva_circuit(4, p, "interfaced", [1, 2]).interfaces) == 2
    with pytest.raises(ValueError):
        circuits.hva_circuit(4, p, "interfaced", [3])


def test_hva_nearest_neighbour_cnot_cost():
    N = 6
    p = _p([0.1], [0.2])
    c = circuits.hva_circuit(N, p, "interfaced", [1])
    assert c.cnot_count() == 2 * (N - 1)


def test_hva_modes_agree_and_match_energy(rng):
    N = 4
    p = _p(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
    H = circuits.tfim_hamiltonian(N).matrix()
    psi = circuits.statevector(circuits.hva_circuit(N, p, "direct"))
    for mode in ("swap-chain", "interfaced"):
        other = circuits.statevector(circuits.hva_circuit(N, p, mode))
        assert abs(np.vdot(psi, other)) ** 2 == pytest.approx(1, abs=1e-10)
    e = np.real(psi.conj() @ H @ psi)
    assert circuits.hva_energy(p, N) == pytest.approx(e, abs=1e-12)
    rho = circuits.run_circuit(circuits.hva_circuit(N, p, "swap-chain"))
    assert densim.expectation(rho, H) == pytest.approx(e, abs=1e-10)


def test_hva_zero_angles_energy():
    assert circuits.hva_energy(_p([0, 0], [0, 0]), 4) == pytest.approx(-4.0, abs=1e-14)


def test_optimize_params_n4():
    res = circuits.optimize_params(4, 2, tolerance=1e-3, random_state=0)
    assert res.converged and res.gap <= 1e-3
    assert res.energy == pytest.approx(circuits.hva_energy(res.params, 4))
    start = circuits.hva_energy(_p([0, 0], [0, 0]), 4)
    assert res.energy <= start


def test_optimize_params_reports_failure():
    res = circuits.optimize_params(4, 1, tolerance=1e-12, n_starts=2, max_evaluations=50)
    assert not res.converged
    assert res.energy <= -4.0 + 1e-12
