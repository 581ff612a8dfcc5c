"""Generalized Pauli observables, Bloch extraction, and decay-rate fitting.

The Pauli operators are signs of modular cosines: Z = Sgn(cos(eta/2 q)),
X = Sgn(cos(eta/2 q_theta)) along the geometry's second support angle, and
Y = i Z X re-Hermitized.  They square to one on the whole oscillator space
and coincide with the logical Paulis on the code manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from gkplab.errors import AmbiguousFit, InvalidParameter, RejectedFit
from gkplab.fock import (
    displacement_exp_q,
    gkp_hamiltonian,
    ground_pair,
    modular_lindblad_set,
    phase_space_displacement,
    quadratures,
    rotate_op,
)
from gkplab.geometry import CodeGeometry, EnergyParams

__all__ = [
    "PauliSet",
    "RateFit",
    "generalized_paulis",
    "bloch_coordinates",
    "code_state",
    "default_transient_cut",
    "extract_rate",
    "phase_portrait",
    "write_portrait_csv",
]


@dataclass(frozen=True)
class PauliSet:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    geometry: CodeGeometry
    y_hermitization_defect: float


def _sign_of_hermitian(op: np.ndarray) -> np.ndarray:
    """Operator sign function with the tie-break sign(0) = +1."""
    herm = (op + op.conj().T) / 2.0
    vals, vecs = scipy.linalg.eigh(herm)
    signs = np.where(vals >= 0.0, 1.0, -1.0)
    return (vecs * signs) @ vecs.conj().T


def generalized_paulis(geom: CodeGeometry, dim: int) -> PauliSet:
    """Pauli triple from half-lattice modular cosines along the support angles."""
    theta_z, theta_x, _ = geom.pauli_angles
    half_disp = displacement_exp_q(geom.eta / 2.0, dim)

    def cos_along(theta):
        d = rotate_op(half_disp, theta)
        return (d + d.conj().T) / 2.0

    z = _sign_of_hermitian(cos_along(theta_z))
    x = _sign_of_hermitian(cos_along(theta_x))
    # sign chosen so the cyclic rule XY = iZ holds on the code sector; the
    # product is re-Hermitized and the defect recorded
    y_raw = -1j * z @ x
    defect = float(np.linalg.norm(y_raw - y_raw.conj().T) / max(np.linalg.norm(y_raw), 1e-300))
    y = (y_raw + y_raw.conj().T) / 2.0
    return PauliSet(X=x, Y=y, Z=z, geometry=geom, y_hermitization_defect=defect)


def bloch_coordinates(rho: np.ndarray, pauli: PauliSet):
    """(x, y, z) = (Tr(X rho), Tr(Y rho), Tr(Z rho)); imaginary parts must vanish."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-8:
        raise InvalidParameter(f"rho trace {tr!r} != 1")
    out = []
    for op in (pauli.X, pauli.Y, pauli.Z):
        v = np.trace(op @ rho)
        if abs(v.imag) > 1e-6:
            raise InvalidParameter(f"Bloch coordinate has imaginary part {v.imag:.2e}")
        out.append(v.real)
    return tuple(out)


def code_state(
    geom: CodeGeometry,
    ep: EnergyParams,
    dim: int,
    kind: str = "mixed-axes",
):
    """An initial state in the quasi-degenerate ground doublet of the trapping
    Hamiltonian.

    kind='plus-z' maximizes <Z> inside the doublet (the grid state pinned on
    the lattice), 'ground' returns the raw lowest eigenvector, 'mixed-axes'
    returns a fixed superposition with all three Bloch coordinates away from
    zero, convenient for fitting all rates from one run.
    """
    h = gkp_hamiltonian(geom, ep, dim)
    _, (psi0, psi1) = ground_pair(h)
    if kind == "ground":
        return psi0
    if kind == "plus-z":
        pauli = generalized_paulis(geom, dim)
        zblock = np.array(
            [
                [psi0.conj() @ pauli.Z @ psi0, psi0.conj() @ pauli.Z @ psi1],
                [psi1.conj() @ pauli.Z @ psi0, psi1.conj() @ pauli.Z @ psi1],
            ]
        )
        vals, vecs = scipy.linalg.eigh((zblock + zblock.conj().T) / 2.0)
        c = vecs[:, -1]
        psi = c[0] * psi0 + c[1] * psi1
        return psi / np.linalg.norm(psi)
    if kind == "mixed-axes":
        psi = math.cos(math.pi / 8.0) * psi0 + math.sin(math.pi / 8.0) * np.exp(1j * math.pi / 4.0) * psi1
        return psi / np.linalg.norm(psi)
    raise InvalidParameter(f"unknown code_state kind {kind!r}")


@dataclass(frozen=True)
class RateFit:
    rate: float
    amplitude: float
    fit_window: tuple[float, float]
    residual: float
    n_points: int


def default_transient_cut(ep: EnergyParams, gamma: float, multiplier: float = 5.0) -> float:
    """multiplier / (amp*eps*eta*Gamma): a few convergence times tau_conv."""
    return multiplier / (ep.amp * ep.epsilon * ep.eta * gamma)


def extract_rate(
    record,
    observable_name: str,
    transient_cut: float,
    residual_threshold: float = 0.05,
    enforce_coverage: bool = True,
) -> RateFit:
    """Exponential decay rate of |<O>(t)| by log-linear least squares.

    The observable must not change sign inside the fit window (that would
    signal oscillatory rather than exponential dynamics) and the RMS residual
    of the log fit must stay under `residual_threshold`.
    """
    times = np.asarray(record.times, dtype=float)
    values = np.asarray(record.observables[observable_name])
    t_end = times[-1]
    if enforce_coverage and t_end < 5.0 * transient_cut:
        raise InvalidParameter(
            f"record covers {t_end:.3g} < 5*transient_cut = {5 * transient_cut:.3g}"
        )
    mask = times >= transient_cut
    if mask.sum() < 4:
        raise InvalidParameter("fewer than 4 samples after the transient cut")
    t = times[mask]
    v = values[mask].real
    if abs(v[0]) < 1e-14:
        raise AmbiguousFit("observable vanishes at the transient cut")
    if np.any(v == 0.0) or (np.sign(v) != np.sign(v[0])).any():
        raise AmbiguousFit("observable changes sign inside the fit window")
    logv = np.log(np.abs(v))
    slope, intercept = np.polyfit(t, logv, 1)
    resid = logv - (slope * t + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    if rms > residual_threshold:
        raise RejectedFit(f"log-fit residual {rms:.3g} exceeds {residual_threshold}")
    return RateFit(
        rate=float(-slope),
        amplitude=float(np.exp(intercept)),
        fit_window=(float(t[0]), float(t[-1])),
        residual=rms,
        n_points=int(mask.sum()),
    )


def _wrap_angle(x: float) -> float:
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def phase_portrait(
    geom: CodeGeometry,
    ep: EnergyParams,
    grid: list[tuple[float, float]],
    dt_small: float,
    dim: int,
    gamma: float = 1.0,
):
    """Drift field of the modular dissipation around a displaced code state.

    For each (alpha, beta) the code state is displaced by
    e^{-i alpha p + i beta q}, one analytic Lindblad increment dt*sum D[L] is
    applied, and the rows record the center-of-mass drift d<a> and the drifts
    of the modular phases Arg Tr(S_q rho), Arg Tr(S_p rho).
    """
    if dt_small * gamma > 1e-3:
        raise InvalidParameter("dt_small*gamma must be <= 1e-3 for a linear increment")
    psi_code = code_state(geom, ep, dim, kind="plus-z")
    ls = modular_lindblad_set(geom, ep, dim)
    _, _, a_op, _ = quadratures(dim)
    s_q = displacement_exp_q(geom.eta, dim)
    s_p = rotate_op(s_q, -math.pi / 2.0)

    rows = []
    for alpha, beta in grid:
        u = phase_space_displacement(alpha, beta, dim)
        phi = u @ psi_code
        a_before = phi.conj() @ (a_op @ phi)
        mq_before = np.angle(phi.conj() @ (s_q @ phi))
        mp_before = np.angle(phi.conj() @ (s_p @ phi))

        d_a = 0.0 + 0.0j
        d_sq = 0.0 + 0.0j
        d_sp = 0.0 + 0.0j
        for l_op in ls:
            w = l_op @ phi
            v = l_op.conj().T @ w
            # Tr(A * D[L](phi phi†)) for A in (a, S_q, S_p), rank-1 algebra
            for acc_name, op in (("a", a_op), ("q", s_q), ("p", s_p)):
                jump = w.conj() @ (op @ w)
                nojump = 0.5 * (phi.conj() @ (op @ v) + v.conj() @ (op @ phi))
                inc = jump - nojump
                if acc_name == "a":
                    d_a += inc
                elif acc_name == "q":
                    d_sq += inc
                else:
                    d_sp += inc
        scale = gamma * dt_small
        dcom = scale * d_a
        tq = phi.conj() @ (s_q @ phi)
        tp = phi.conj() @ (s_p @ phi)
        dmod_q = _wrap_angle(np.angle(tq + scale * d_sq) - mq_before)
        dmod_p = _wrap_angle(np.angle(tp + scale * d_sp) - mp_before)
        rows.append(
            {
                "alpha": alpha,
                "beta": beta,
                "dcom": complex(dcom),
                "dmod_q": float(dmod_q),
                "dmod_p": float(dmod_p),
                "a_before": complex(a_before),
            }
        )
    return rows


def write_portrait_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,beta,dcom_re,dcom_im,dmod_q,dmod_p\n")
        for r in rows:
            fh.write(
                f"{r['alpha']:.12g},{r['beta']:.12g},{r['dcom'].real:.12g},"
                f"{r['dcom'].imag:.12g},{r['dmod_q']:.12g},{r['dmod_p']:.12g}\n"
            )
