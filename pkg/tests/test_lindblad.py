"""Propagator tests: exact-channel property, amplitude-damping oracle,
first-order convergence, schedules, and the two-mode ancilla model."""

import math

import numpy as np
import pytest

from gkplab.errors import AdiabaticityWarning, InvalidParameter, StabilityWarning
from gkplab.fock import quadratures
from gkplab.geometry import EnergyParams, square_geometry
from gkplab.lindblad import (
    LindbladModel,
    build_step,
    default_dt,
    effective_rate,
    propagate,
    propagate_schedule,
    two_mode_model,
    write_trajectory_csv,
)


def _damping_model(dim, kappa):
    _, _, a, _ = quadratures(dim)
    return LindbladModel(dim=dim, jumps=[(a, kappa)])


def test_step_channel_sums_to_identity():
    model = _damping_model(12, 0.7)
    step = build_step(model, 0.01)
    total = sum(k.conj().T @ k for k in step.kraus)
    np.testing.assert_allclose(total, np.eye(12), atol=1e-12)


def test_trivial_model_gives_identity_step():
    model = LindbladModel(dim=5)
    step = build_step(model, 0.3)
    assert len(step.kraus) == 1
    np.testing.assert_allclose(step.kraus[0], np.eye(5), atol=1e-12)
    rho0 = np.diag([0.2, 0.2, 0.2, 0.2, 0.2]).astype(complex)
    rec = propagate(rho0, step, 50, [])
    np.testing.assert_allclose(rec.final_state, rho0, atol=1e-13)


def test_single_jump_short_time_expansion():
    # one step from |1><1| under sqrt(kappa) a: rho_11 = 1 - kappa dt + O(dt^2)
    kappa, dt = 0.8, 1e-3
    model = _damping_model(2, kappa)
    step = build_step(model, dt)
    rho = np.diag([0.0, 1.0]).astype(complex)
    out = step.kraus[0] @ rho @ step.kraus[0].conj().T
    for k in step.kraus[1:]:
        out += k @ rho @ k.conj().T
    assert out[1, 1].real == pytest.approx(1.0 - kappa * dt, abs=2.0 * (kappa * dt) ** 2)


def test_amplitude_damping_matches_exact_solution_first_order():
    kappa, t_end = 1.0, 2.0
    exact = math.exp(-kappa * t_end)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        model = _damping_model(2, kappa)
        step = build_step(model, dt)
        rho0 = np.diag([0.0, 1.0]).astype(complex)
        nop = np.diag([0.0, 1.0]).astype(complex)
        rec = propagate(rho0, step, int(round(t_end / dt)), [("n", nop)])
        errs.append(abs(rec.observables["n"][-1].real - exact))
        assert rec.trace_drift.max() < 1e-10
        assert rec.min_eigenvalue_samples.min() >= -1e-10
    order = math.log2(errs[0] / errs[1])
    assert 0.8 <= order <= 1.2
    order2 = math.log2(errs[1] / errs[2])
    assert 0.8 <= order2 <= 1.2


def test_propagate_validates_state():
    model = _damping_model(3, 0.5)
    step = build_step(model, 0.01)
    with pytest.raises(InvalidParameter):
        propagate(np.eye(3, dtype=complex), step, 5, [])  # trace 3
    bad = np.diag([1.0, 0.0, 0.0]).astype(complex)
    bad[0, 1] = 0.5  # not Hermitian
    with pytest.raises(InvalidParameter):
        propagate(bad, step, 5, [])


def test_step_warns_when_dt_large():
    model = _damping_model(40, 5.0)
    with pytest.warns(StabilityWarning):
        build_step(model, 0.1)


def test_default_dt_uses_operator_norm():
    model = _damping_model(30, 2.0)
    # ||a||_2^2 = 29, so dt = 0.02/(2*29)
    assert default_dt(model) == pytest.approx(0.02 / (2.0 * 29.0), rel=1e-6)


def test_schedule_single_segment_equals_propagate():
    model = _damping_model(4, 0.6)
    dt = 0.01
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[2, 2] = 1.0
    nop = np.diag(np.arange(4.0)).astype(complex)
    rec_a = propagate(rho0, build_step(model, dt), 200, [("n", nop)], record_every=10)
    rec_b = propagate_schedule(rho0, [(model, 2.0)], dt, [("n", nop)], record_every=10)
    np.testing.assert_allclose(
        rec_a.observables["n"], rec_b.observables["n"], atol=1e-12
    )
    with pytest.raises(InvalidParameter):
        propagate_schedule(rho0, [(model, 2.0005)], dt, [])


def test_trotterized_cycling_matches_quarter_rate():
    # cycling the four square dissipators one at a time at rate Gamma with a
    # short switching period reproduces the simultaneous dynamics at Gamma/4
    import warnings

    from gkplab.fock import modular_lindblad_set
    from gkplab.logical import code_state, extract_rate, generalized_paulis

    geom = square_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.3)
    dim = 70
    kog = 0.2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ls = modular_lindblad_set(geom, ep, dim)
        q, p, _, _ = quadratures(dim)
        pauli = generalized_paulis(geom, dim)
        psi = code_state(geom, ep, dim, kind="mixed-axes")
    rho0 = np.outer(psi, psi.conj())
    obs = [("X", pauli.X)]
    dt = 5e-3
    gamma = 1.0
    t_end = 40.0

    sim_model = LindbladModel(
        dim=dim, jumps=[(op, gamma / 4.0) for op in ls] + [(q, kog), (p, kog)]
    )
    rec_sim = propagate(rho0, build_step(sim_model, dt), int(t_end / dt), obs, record_every=20)

    t_switch = 0.25
    cycle = []
    for k in range(4):
        cycle.append(
            (LindbladModel(dim=dim, jumps=[(ls[k], gamma), (q, kog), (p, kog)]), t_switch)
        )
    schedule = cycle * int(round(t_end / (4 * t_switch)))
    rec_trot = propagate_schedule(rho0, schedule, dt, obs, record_every=20)

    cut = 12.0
    fit_sim = extract_rate(rec_sim, "X", cut, enforce_coverage=False, residual_threshold=0.1)
    fit_trot = extract_rate(rec_trot, "X", cut, enforce_coverage=False, residual_threshold=0.1)
    assert fit_trot.rate == pytest.approx(fit_sim.rate, rel=0.10)


def test_effective_rate_formula_and_two_mode_model():
    assert effective_rate(0.05, 1.0) == pytest.approx(4.0 * 0.05**2)
    assert effective_rate(0.05, 1.0, mu0=0.5) == pytest.approx(0.25 * 4.0 * 0.05**2)
    with pytest.raises(InvalidParameter):
        two_mode_model(np.eye(4, dtype=complex), g=0.4, kappa_b=1.0, dim_a=4, dim_b=3)
    with pytest.warns(AdiabaticityWarning):
        two_mode_model(np.eye(4, dtype=complex), g=0.2, kappa_b=1.0, dim_a=4, dim_b=3)


def test_two_mode_zero_coupling_is_stationary():
    dim_a, dim_b = 5, 3
    l_target = np.diag(np.arange(dim_a, dtype=complex))
    model = two_mode_model(l_target, g=0.0, kappa_b=1.0, dim_a=dim_a, dim_b=dim_b)
    rho_a = np.zeros((dim_a, dim_a), dtype=complex)
    rho_a[2, 2] = 1.0
    vac_b = np.zeros((dim_b, dim_b), dtype=complex)
    vac_b[0, 0] = 1.0
    rho0 = np.kron(rho_a, vac_b)
    step = build_step(model, 0.01)
    rec = propagate(rho0, step, 300, [])
    np.testing.assert_allclose(rec.final_state, rho0, atol=1e-10)


def test_trajectory_csv_format(tmp_path):
    model = _damping_model(3, 0.5)
    step = build_step(model, 0.01)
    rho0 = np.diag([0.0, 0.0, 1.0]).astype(complex)
    nop = np.diag(np.arange(3.0)).astype(complex)
    rec = propagate(rho0, step, 20, [("num", nop)], record_every=5)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(rec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,num_re,num_im,energy,trace_drift"
    assert len(lines) == 1 + len(rec.times)
