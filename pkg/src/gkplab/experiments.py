"""Experiment drivers: parameter sweeps, gates, portraits, and their CSV output.

Each driver consumes an ExperimentConfig and returns a list of result-row
dicts.  Sweep points run in isolated jobs: a failing point contributes a row
with its error message, never aborts the sweep.  All randomness flows from
the config seed, making rows reproducible from their recorded provenance.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from gkplab.config import ExperimentConfig, worker_count
from gkplab.control import MiscalibrationModel, comb_lindblad_set
from gkplab.errors import GkplabError
from gkplab.fock import (
    log_lindblad_set,
    modular_core,
    modular_lindblad_set,
    quadratures,
    rotate_op,
    symmetric_lindblad_set,
)
from gkplab.geometry import EnergyParams, geometry
from gkplab.lindblad import (
    LindbladModel,
    build_step,
    propagate,
    propagate_schedule,
    two_mode_model,
)
from gkplab.logical import (
    bloch_coordinates,
    code_state,
    default_transient_cut,
    extract_rate,
    generalized_paulis,
    phase_portrait,
)
from gkplab.spectral import SigmaParams, logical_rates_from_spectrum, optimal_epsilon

__all__ = [
    "run_noise_sweep",
    "run_comb_truncation",
    "run_instability",
    "run_gate",
    "run_wrong_eta",
    "run_miscalibration",
    "run_portrait",
    "run_adiabatic_check",
    "run_optimal_epsilon",
    "NOISE_SWEEP_COLUMNS",
    "COMB_COLUMNS",
    "INSTABILITY_COLUMNS",
    "GATE_COLUMNS",
    "RATE_TABLE_COLUMNS",
]

_DESK_DT = 4e-3
_WINDOW = 80.0
_RESIDUAL_FLAG = 0.05

NOISE_SWEEP_COLUMNS = [
    "geometry", "epsilon", "channel", "strength", "dim", "dt", "t_final", "seed",
    "gamma_x", "gamma_y", "gamma_z", "resid_x", "resid_y", "resid_z",
    "spectral_gamma_x", "flagged", "status",
]
COMB_COLUMNS = [
    "geometry", "epsilon", "N", "weighting", "sigma_control", "comb_seed", "dim",
    "dt", "t_final", "gamma_l", "resid", "flagged", "status",
]
INSTABILITY_COLUMNS = [
    "dynamics", "epsilon", "dim", "dt", "t_final", "max_energy", "final_energy",
    "t_at_max", "status",
]
GATE_COLUMNS = [
    "gate", "epsilon", "dim", "dt", "t_gate", "n_segments",
    "x0", "y0", "z0", "xf", "yf", "zf", "swap_error", "status",
]
RATE_TABLE_COLUMNS = [
    "epsilon", "kappa_over_gamma", "gamma_x", "gamma_y", "gamma_z", "source",
]


def _dt(config: ExperimentConfig) -> float:
    return config.dt if config.dt is not None else _DESK_DT / config.gamma


def _pauli_observables(pauli):
    return [("X", pauli.X), ("Y", pauli.Y), ("Z", pauli.Z)]


def _noise_jumps(channel: str, strength: float, gamma: float, dim: int):
    if channel == "none" or strength == 0.0:
        return [], None
    q, p, a, nop = quadratures(dim)
    kappa = strength * gamma
    if channel == "quadrature":
        return [(q, kappa), (p, kappa)], None
    if channel == "photon_loss":
        return [(a, kappa)], None
    if channel == "dephasing":
        return [(nop, kappa)], None
    if channel == "kerr":
        return [], (kappa / 2.0) * (nop @ nop)
    raise GkplabError(f"unknown channel {channel!r}")


def _fit_or_error(rec, name, cut):
    try:
        fit = extract_rate(rec, name, cut, enforce_coverage=False)
        return fit.rate, fit.residual, None
    except GkplabError as exc:
        return float("nan"), float("nan"), f"{name}: {exc}"


def _noise_point(args):
    (family, eps, channel, strength, dim, dt, t_final, gamma, record_every,
     transient_multiplier, seed) = args
    geom = geometry(family)
    ep = EnergyParams.from_epsilon(geom, eps)
    row = {
        "geometry": family, "epsilon": eps, "channel": channel, "strength": strength,
        "dim": dim, "dt": dt, "seed": seed, "flagged": 0, "status": "ok",
        "spectral_gamma_x": float("nan"),
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mods = modular_lindblad_set(geom, ep, dim)
            jumps = [(op, gamma) for op in mods]
            extra, kerr_h = _noise_jumps(channel, strength, gamma, dim)
            jumps += extra
            model = LindbladModel(dim=dim, hamiltonian=kerr_h, jumps=jumps)
            cut = default_transient_cut(ep, gamma, transient_multiplier)
            t_end = t_final if t_final is not None else cut + _WINDOW / gamma
            row["t_final"] = t_end
            pauli = generalized_paulis(geom, dim)
            psi = code_state(geom, ep, dim, kind="mixed-axes")
            rho0 = np.outer(psi, psi.conj())
            step = build_step(model, dt)
            rec = propagate(
                rho0, step, int(round(t_end / dt)), _pauli_observables(pauli),
                record_every=record_every,
            )
            errs = []
            for name, col in (("X", "x"), ("Y", "y"), ("Z", "z")):
                rate, resid, err = _fit_or_error(rec, name, cut)
                row[f"gamma_{col}"] = rate
                row[f"resid_{col}"] = resid
                if err:
                    errs.append(err)
                if resid == resid and resid > _RESIDUAL_FLAG:
                    row["flagged"] = 1
            if channel == "quadrature":
                sp = SigmaParams.for_code(geom, ep, strength)
                gx, _, _ = logical_rates_from_spectrum(sp, gamma, geom)
                row["spectral_gamma_x"] = gx
            if errs:
                row["status"] = "partial: " + "; ".join(errs)
    except Exception as exc:  # job isolation: record, never propagate
        row["status"] = f"error: {exc}"
        row["t_final"] = t_final if t_final is not None else float("nan")
        for col in ("gamma_x", "gamma_y", "gamma_z", "resid_x", "resid_y", "resid_z"):
            row.setdefault(col, float("nan"))
    return row


def _run_jobs(worker, jobs, threads):
    n = worker_count(threads)
    if n <= 1 or len(jobs) <= 1:
        return [worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(worker, jobs))


def run_noise_sweep(config: ExperimentConfig) -> list[dict]:
    """Sweep (epsilon, noise strength): fitted logical rates per point, plus the
    torus-spectrum prediction column for quadrature noise."""
    config.validate()
    dt = _dt(config)
    jobs = [
        (config.geometry, eps, config.noise_channel, s, config.dim, dt,
         config.t_final, config.gamma, config.record_every,
         config.transient_multiplier, config.seed)
        for eps in config.epsilon
        for s in config.noise_strengths
    ]
    return _run_jobs(_noise_point, jobs, config.threads)


def _comb_point(args):
    (family, eps, n_harm, weighting, sigma_control, comb_seed, dim, dt, t_final,
     gamma, record_every, transient_multiplier) = args
    geom = geometry(family)
    ep = EnergyParams.from_epsilon(geom, eps)
    row = {
        "geometry": family, "epsilon": eps, "N": n_harm, "weighting": weighting,
        "sigma_control": sigma_control, "comb_seed": comb_seed, "dim": dim,
        "dt": dt, "flagged": 0, "status": "ok",
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mis = (
                MiscalibrationModel(sigma_control, comb_seed)
                if sigma_control > 0 else None
            )
            ops = comb_lindblad_set(ep, geom.eta, dim, n_harm, weighting, mis)
            model = LindbladModel(dim=dim, jumps=[(op, gamma) for op in ops])
            cut = default_transient_cut(ep, gamma, transient_multiplier)
            t_end = t_final if t_final is not None else cut + _WINDOW / gamma
            row["t_final"] = t_end
            pauli = generalized_paulis(geom, dim)
            psi = code_state(geom, ep, dim, kind="mixed-axes")
            rho0 = np.outer(psi, psi.conj())
            step = build_step(model, dt)
            rec = propagate(
                rho0, step, int(round(t_end / dt)),
                [("X", pauli.X), ("Z", pauli.Z)], record_every=record_every,
            )
            rate_x, resid_x, err_x = _fit_or_error(rec, "X", cut)
            rate_z, resid_z, err_z = _fit_or_error(rec, "Z", cut)
            # the two should agree; report their mean as Gamma_L
            rates = [r for r in (rate_x, rate_z) if r == r]
            row["gamma_l"] = float(np.mean(rates)) if rates else float("nan")
            resids = [r for r in (resid_x, resid_z) if r == r]
            row["resid"] = float(max(resids)) if resids else float("nan")
            if row["resid"] == row["resid"] and row["resid"] > _RESIDUAL_FLAG:
                row["flagged"] = 1
            errs = [e for e in (err_x, err_z) if e]
            if errs:
                row["status"] = "partial: " + "; ".join(errs)
    except Exception as exc:
        row["status"] = f"error: {exc}"
        row.setdefault("t_final", float("nan"))
        row.setdefault("gamma_l", float("nan"))
        row.setdefault("resid", float("nan"))
    return row


def run_comb_truncation(config: ExperimentConfig) -> list[dict]:
    """Logical rate of the comb-realized dissipators versus harmonic count N."""
    config.validate()
    if config.comb is None:
        raise GkplabError("comb configuration required")
    dt = _dt(config)
    jobs = [
        (config.geometry, eps, n, config.comb.weighting, 0.0, config.comb.seed,
         config.dim, dt, config.t_final, config.gamma, config.record_every,
         config.transient_multiplier)
        for eps in config.epsilon
        for n in config.comb.N
    ]
    return _run_jobs(_comb_point, jobs, config.threads)


def _instability_models(tag: str, geom, ep: EnergyParams, dim: int, gamma: float):
    if tag == "L4":
        ops = modular_lindblad_set(geom, ep, dim)
    elif tag == "L2":
        ops = modular_lindblad_set(geom, ep, dim)[:2]
    elif tag == "L2s":
        lqs, _, lps, _ = symmetric_lindblad_set(ep, dim)
        ops = [lqs, lps]
    elif tag == "L2log":
        ops = list(log_lindblad_set(ep.delta, ep.eta, dim))
    else:
        raise GkplabError(f"unknown dynamics tag {tag!r}")
    return LindbladModel(dim=dim, jumps=[(op, gamma) for op in ops])


def _instability_point(args):
    tag, family, eps, dim, dt, t_final, gamma, record_every = args
    geom = geometry(family)
    ep = EnergyParams.from_epsilon(geom, eps)
    row = {
        "dynamics": tag, "epsilon": eps, "dim": dim, "dt": dt, "t_final": t_final,
        "status": "ok",
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = _instability_models(tag, geom, ep, dim, gamma)
            rho0 = np.zeros((dim, dim), dtype=complex)
            rho0[0, 0] = 1.0
            step = build_step(model, dt)
            rec = propagate(rho0, step, int(round(t_final / dt)), [], record_every=record_every)
            imax = int(np.argmax(rec.energy))
            row["max_energy"] = float(rec.energy[imax])
            row["final_energy"] = float(rec.energy[-1])
            row["t_at_max"] = float(rec.times[imax])
    except Exception as exc:
        row["status"] = f"error: {exc}"
        for col in ("max_energy", "final_energy", "t_at_max"):
            row[col] = float("nan")
    return row


def run_instability(config: ExperimentConfig, dynamics=("L4", "L2", "L2s", "L2log")) -> list[dict]:
    """Vacuum-start energy curves for the candidate dissipator families over a
    list of truncations; truncation-dependent maxima flag instability."""
    config.validate()
    if config.dims is None:
        raise GkplabError("instability sweep needs config.dims (>= 2 truncations)")
    dt = _dt(config)
    t_final = config.t_final if config.t_final is not None else 25.0 / config.gamma
    jobs = [
        (tag, config.geometry, eps, dim, dt, t_final, config.gamma, config.record_every)
        for tag in dynamics
        for eps in config.epsilon
        for dim in config.dims
    ]
    return _run_jobs(_instability_point, jobs, config.threads)


def _hadamard_set(geom, ep, dim, u, base_set):
    return [rotate_op(op + np.eye(dim), u * math.pi / 2.0) - np.eye(dim) for op in base_set]


def _phase_set(ep, dim, u):
    from gkplab.fock import quadrature_pair_lindblad_set

    scale_p = math.hypot(1.0, u)
    angle_p = math.atan2(1.0, -u)
    return quadrature_pair_lindblad_set(ep, dim, (0.0, 1.0), (angle_p, scale_p))


def run_gate(config: ExperimentConfig) -> list[dict]:
    """Clifford gate by slow deformation of the dissipator set.

    The control u ramps 0 -> u_final across n_segments piecewise-constant
    segments; dissipation drags the state along the deformed lattice.
    """
    config.validate()
    if config.gate is None:
        raise GkplabError("gate configuration required")
    if config.geometry != "square":
        raise GkplabError("gates are defined for the square code")
    gate = config.gate
    geom = geometry(config.geometry)
    dt = _dt(config)
    rows = []
    for eps in config.epsilon:
        ep = EnergyParams.from_epsilon(geom, eps)
        row = {
            "gate": gate.kind, "epsilon": eps, "dim": config.dim, "dt": dt,
            "t_gate": gate.t_gate, "n_segments": gate.n_segments, "status": "ok",
        }
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                dim = config.dim
                base = modular_lindblad_set(geom, ep, dim)
                seg_t = gate.t_gate / gate.n_segments
                schedule = []
                for i in range(gate.n_segments):
                    u = gate.u_final * (i + 0.5) / gate.n_segments
                    if gate.kind == "hadamard":
                        ops = _hadamard_set(geom, ep, dim, u, base)
                    elif gate.kind == "phase":
                        ops = _phase_set(ep, dim, u)
                    else:
                        ops = base
                    schedule.append(
                        (LindbladModel(dim=dim, jumps=[(op, config.gamma) for op in ops]), seg_t)
                    )
                pauli = generalized_paulis(geom, dim)
                psi = code_state(geom, ep, dim, kind="mixed-axes")
                rho0 = np.outer(psi, psi.conj())
                x0, y0, z0 = bloch_coordinates(rho0, pauli)
                rec = propagate_schedule(
                    rho0, schedule, dt, _pauli_observables(pauli),
                    record_every=config.record_every,
                )
                rho_f = rec.final_state
                if gate.kind == "hadamard":
                    # the lattice returns to itself rotated by u*pi/2; measure in
                    # the rotated Pauli frame for intermediate u
                    phase = np.exp(1j * gate.u_final * math.pi / 2.0 * np.arange(dim))
                    rho_meas = (rho_f * np.outer(phase.conj(), phase))
                    xf, yf, zf = bloch_coordinates(rho_meas, pauli)
                else:
                    xf, yf, zf = bloch_coordinates(rho_f, pauli)
                row.update(x0=x0, y0=y0, z0=z0, xf=xf, yf=yf, zf=zf)
                if gate.kind == "hadamard" and gate.u_final == 1.0:
                    row["swap_error"] = max(abs(xf - z0), abs(zf - x0))
                elif gate.kind == "identity":
                    row["swap_error"] = max(abs(xf - x0), abs(yf - y0), abs(zf - z0))
                else:
                    row["swap_error"] = float("nan")
        except Exception as exc:
            row["status"] = f"error: {exc}"
            for col in ("x0", "y0", "z0", "xf", "yf", "zf", "swap_error"):
                row.setdefault(col, float("nan"))
        rows.append(row)
    return rows


def _wrong_eta_point(args):
    (family, eps, ratio, dim, dt, t_final, gamma, record_every, transient_multiplier) = args
    geom = geometry(family)
    ep = EnergyParams.from_epsilon(geom, eps)
    eta_a = ratio * geom.eta
    row = {
        "geometry": family, "epsilon": eps, "eta_ratio": ratio, "dim": dim, "dt": dt,
        "flagged": 0, "status": "ok",
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            amp = math.exp(-eps * eta_a / 2.0)
            core = modular_core(eta_a, eps, amp, dim)
            ops = [rotate_op(core, k * math.pi / 2.0) - np.eye(dim) for k in range(4)]
            model = LindbladModel(dim=dim, jumps=[(op, gamma) for op in ops])
            cut = default_transient_cut(ep, gamma, transient_multiplier)
            t_end = t_final if t_final is not None else cut + _WINDOW / gamma
            row["t_final"] = t_end
            pauli = generalized_paulis(geom, dim)
            psi = code_state(geom, ep, dim, kind="mixed-axes")
            rho0 = np.outer(psi, psi.conj())
            step = build_step(model, dt)
            rec = propagate(
                rho0, step, int(round(t_end / dt)),
                [("X", pauli.X), ("Z", pauli.Z)], record_every=record_every,
            )
            rate, resid, err = _fit_or_error(rec, "X", cut)
            row["gamma_l"] = rate
            row["resid"] = resid
            if resid == resid and resid > _RESIDUAL_FLAG:
                row["flagged"] = 1
            if err:
                row["status"] = "partial: " + err
    except Exception as exc:
        row["status"] = f"error: {exc}"
        row.setdefault("t_final", float("nan"))
        row.setdefault("gamma_l", float("nan"))
        row.setdefault("resid", float("nan"))
    return row


def run_wrong_eta(config: ExperimentConfig) -> list[dict]:
    """Logical rate when the dissipators are built at eta_a = ratio * eta_0
    while the code and observables stay at eta_0."""
    config.validate()
    dt = _dt(config)
    jobs = [
        (config.geometry, eps, r, config.dim, dt, config.t_final, config.gamma,
         config.record_every, config.transient_multiplier)
        for eps in config.epsilon
        for r in config.eta_ratios
    ]
    return _run_jobs(_wrong_eta_point, jobs, config.threads)


def run_miscalibration(config: ExperimentConfig) -> list[dict]:
    """Logical rate versus control-calibration noise, one draw per point."""
    config.validate()
    if config.comb is None:
        raise GkplabError("comb configuration required")
    dt = _dt(config)
    n_harm = max(config.comb.N)
    jobs = []
    for eps in config.epsilon:
        for i, sc in enumerate([0.0] + list(config.sigma_controls)):
            jobs.append(
                (config.geometry, eps, n_harm, config.comb.weighting, sc,
                 config.comb.seed + 97 * i, config.dim, dt, config.t_final,
                 config.gamma, config.record_every, config.transient_multiplier)
            )
    return _run_jobs(_comb_point, jobs, config.threads)


def run_portrait(config: ExperimentConfig, grid=None, dt_small: float = 1e-4) -> list[dict]:
    """Phase-portrait vector field on a square grid of displacements."""
    config.validate()
    geom = geometry(config.geometry)
    ep = EnergyParams.from_epsilon(geom, config.epsilon[0])
    if grid is None:
        span = 2.0 * math.pi / geom.eta
        pts = np.linspace(-span, span, 9)
        grid = [(a, b) for a in pts for b in pts]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return phase_portrait(geom, ep, grid, dt_small, config.dim, config.gamma)


def run_adiabatic_check(
    config: ExperimentConfig,
    g_over_kappa: float = 0.05,
    kappa_b: float = 1.0,
    dim_b: int = 4,
) -> dict:
    """Two-mode model versus its adiabatic single-mode reduction.

    Couples the symmetric q-dissipator to a damped ancilla and compares the
    partial-trace logical trajectory of the target mode against the effective
    single-dissipator dynamics at Gamma = 4 g^2/kappa_b over t = 3/Gamma.
    """
    config.validate()
    geom = geometry(config.geometry)
    ep = EnergyParams.from_epsilon(geom, config.epsilon[0])
    dim_a = config.dim
    g = g_over_kappa * kappa_b
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lqs, _, _, _ = symmetric_lindblad_set(ep, dim_a)
        model2 = two_mode_model(lqs, g, kappa_b, dim_a, dim_b)
        gamma_eff = 4.0 * g * g / kappa_b
        t_end = 3.0 / gamma_eff
        dt2 = config.dt if config.dt is not None else 2e-3 / kappa_b
        pauli = generalized_paulis(geom, dim_a)
        psi = code_state(geom, ep, dim_a, kind="mixed-axes")
        rho_a0 = np.outer(psi, psi.conj())
        rho2_0 = np.kron(rho_a0, np.diag([1.0] + [0.0] * (dim_b - 1)).astype(complex))
        obs2 = [(n, np.kron(op, np.eye(dim_b))) for n, op in _pauli_observables(pauli)]
        step2 = build_step(model2, dt2)
        rec2 = propagate(rho2_0, step2, int(round(t_end / dt2)), obs2,
                         record_every=config.record_every)

        model1 = LindbladModel(dim=dim_a, jumps=[(lqs, gamma_eff)])
        dt1 = config.dt if config.dt is not None else 2e-3 / kappa_b
        step1 = build_step(model1, dt1)
        rec1 = propagate(rho_a0, step1, int(round(t_end / dt1)), _pauli_observables(pauli),
                         record_every=config.record_every)

    diffs = {}
    for name in ("X", "Y", "Z"):
        a = np.interp(rec1.times, rec2.times, rec2.observables[name].real)
        b = rec1.observables[name].real
        scale = max(np.abs(b).max(), 1e-12)
        diffs[name] = float(np.abs(a - b).max() / scale)
    return {
        "g_over_kappa": g_over_kappa, "dim_a": dim_a, "dim_b": dim_b,
        "gamma_eff": gamma_eff, "t_final": t_end,
        "max_rel_diff": max(diffs.values()), "per_observable": diffs,
    }


def run_optimal_epsilon(config: ExperimentConfig, n_points: int = 9) -> list[dict]:
    """Spectral-pipeline scan of Gamma_X(epsilon) around the closed-form optimum."""
    config.validate()
    geom = geometry(config.geometry)
    rows = []
    for kog in config.noise_strengths:
        eps_star = optimal_epsilon(kog, geom)
        for eps in np.linspace(0.6 * eps_star, 1.6 * eps_star, n_points):
            ep = EnergyParams.from_epsilon(geom, float(eps))
            sp = SigmaParams.for_code(geom, ep, kog)
            gx, gy, gz = logical_rates_from_spectrum(sp, config.gamma, geom)
            rows.append({
                "epsilon": float(eps), "kappa_over_gamma": kog,
                "gamma_x": gx, "gamma_y": gy, "gamma_z": gz, "source": "spectral",
            })
    return rows
