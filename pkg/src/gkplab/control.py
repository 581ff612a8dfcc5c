"""Finite-bandwidth flux-bias combs and the jump operators they realize.

A target jump operator is activated by a signal
u(t) = g sum_r u_r e^{i(r w_a - w_b)t}.  In the rotating-wave average, the
coefficient u_r multiplies the r-th diagonal of the modular exponential
e^{i eta_a q_a}, so the realized operator is obtained by reweighting
diagonals; truncating the comb to |r| <= N truncates the operator to its
first N diagonals.  Exact coefficient profiles carry the affine weight
1 + eps*eta/2 + eps*r/eta (the derivative comb); the hardware-friendly
variant replaces the derivative by a symmetric finite difference of step
delta = eps/(2 eta_a w_a), which equalizes the three constituent comb
amplitudes and turns the weight into 1 + 2 sin(eps*eta/4 + r*eps/(2 eta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from gkplab.errors import InvalidParameter
from gkplab.fock import displacement_diagonal_table
from gkplab.geometry import EnergyParams

__all__ = [
    "CombSpec",
    "MiscalibrationModel",
    "ideal_comb",
    "comb_family",
    "effective_operator_from_comb",
    "comb_lindblad_set",
    "apply_miscalibration",
    "real_flux_signal",
    "reconstruct_comb_from_real_signal",
    "coupling_rate",
    "xi1_from_peak",
    "comb_amplitude_check",
    "write_comb_csv",
    "write_real_signal_csv",
]

_TARGETS_RL = {("q", "s"), ("q", "d"), ("p", "s"), ("p", "d")}


@dataclass(frozen=True)
class CombSpec:
    """Fourier coefficients u_r, r in [-N, N], of one dissipator's drive comb.

    `coeffs[r + N]` holds u_r.  `delta_fd` is the finite-difference offset in
    units of 1/w_a and `gamma_phase` the phase factor e^{i eta^2 w delta/2}
    compensating the offset combs; both are synthesis metadata.
    `scalar_offset` is the strength of the resonant compensation drive: the
    realized jump operator is A_u - scalar_offset * 1.
    """

    coeffs: np.ndarray
    N: int
    target: object
    epsilon: float
    eta_a: float
    amp: float
    delta_fd: float
    gamma_phase: complex
    scalar_offset: float
    weighting: str

    def coefficient(self, r: int) -> complex:
        if abs(r) > self.N:
            return 0.0
        return self.coeffs[r + self.N]


@dataclass(frozen=True)
class MiscalibrationModel:
    """Per-harmonic complex gain errors s_r ~ 1 + (sigma/sqrt2)(N(0,1)+iN(0,1))."""

    sigma_control: float
    seed: int

    def __post_init__(self):
        if self.sigma_control < 0:
            raise InvalidParameter("sigma_control must be >= 0")


def _target_phases(target, n_rotations: int = 2):
    """(delta_l, t_phase, scalar_offset, prefactor) for a dissipator tag.

    Antisymmetric targets take the extra -i: their comb is the difference of
    half-period-offset pulse trains realizing a sine rather than a cosine, so
    the coefficients come out purely imaginary.
    """
    if isinstance(target, tuple) and tuple(target) in _TARGETS_RL:
        r, l = target
        delta_l = 1.0 if l == "s" else -1.0
        t_phase = 0.0 if r == "q" else math.pi / 2.0
        offset = math.sqrt(2.0) if l == "s" else 0.0
        pre = 1.0 / math.sqrt(2.0) if l == "s" else -1j / math.sqrt(2.0)
        return delta_l, t_phase, offset, pre
    if isinstance(target, (int, np.integer)) and 0 <= target < 2 * n_rotations:
        return None, target * math.pi / n_rotations, 1.0, 1.0
    raise InvalidParameter(f"invalid dissipator target {target!r}")


def ideal_comb(
    target,
    ep: EnergyParams,
    eta_a: float,
    N: int,
    weighting: str = "exact",
) -> CombSpec:
    """Comb coefficients whose rotating-wave average realizes `target`.

    target is ('q'|'p', 's'|'d') for the symmetric/antisymmetric family or an
    integer k in 0..3 for the rotated-exponential family.  With
    weighting='exact' and N = dim-1 the realized operator matches the target
    jump operator to round-off; 'finite-difference' applies the three-comb
    hardware profile instead (identical as eps -> 0).
    """
    if N < 1:
        raise InvalidParameter(f"N must be >= 1, got {N}")
    if not (eta_a > 0 and math.isfinite(eta_a)):
        raise InvalidParameter(f"eta_a must be positive, got {eta_a!r}")
    if weighting not in ("exact", "finite-difference"):
        raise InvalidParameter(f"unknown weighting {weighting!r}")
    eps = ep.epsilon
    delta_l, t_phase, offset, pre = _target_phases(target)
    rs = np.arange(-N, N + 1, dtype=float)
    if weighting == "exact":
        weights = 1.0 + eps * eta_a / 2.0 + eps * rs / eta_a
    else:
        weights = 1.0 + 2.0 * np.sin(eps * eta_a / 4.0 + rs * eps / (2.0 * eta_a))
    coeffs = ep.amp * pre * weights * np.exp(-1j * rs * t_phase)
    if delta_l is not None:
        parity = np.where(np.round(rs).astype(int) % 2 == 0, 1.0, -1.0)
        coeffs = coeffs * (1.0 + delta_l * parity)
    delta_fd = eps / (2.0 * eta_a)
    return CombSpec(
        coeffs=coeffs,
        N=N,
        target=target,
        epsilon=eps,
        eta_a=eta_a,
        amp=ep.amp,
        delta_fd=delta_fd,
        gamma_phase=complex(np.exp(1j * eps * eta_a / 4.0)),
        scalar_offset=offset,
        weighting=weighting,
    )


def comb_family(ep: EnergyParams, eta_a: float, N: int, weighting: str = "exact"):
    """The four symmetric/antisymmetric combs stabilizing the square code."""
    return [ideal_comb(t, ep, eta_a, N, weighting) for t in (("q", "s"), ("q", "d"), ("p", "s"), ("p", "d"))]


def effective_operator_from_comb(comb: CombSpec, eta_a: float, dim: int) -> np.ndarray:
    """Jump operator realized by the comb: diagonal-reweighted modular
    exponential minus the compensation drive.

    The r-th upper (lower) diagonal of e^{i eta_a q_a} is scaled by u_r
    (u_{-r}); diagonals beyond |N| are dropped.
    """
    if comb.N >= dim:
        raise InvalidParameter(f"comb truncation N={comb.N} must be < dim={dim}")
    if abs(eta_a - comb.eta_a) > 1e-12 * comb.eta_a:
        raise InvalidParameter("comb built for a different eta_a")
    table = displacement_diagonal_table(eta_a, dim, k_max=comb.N)
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(comb.N + 1):
        idx = np.arange(dim - k)
        diag = (1j**k) * table[k, : dim - k]
        out[idx, idx + k] = comb.coefficient(k) * diag
        if k > 0:
            out[idx + k, idx] = comb.coefficient(-k) * diag
    out -= comb.scalar_offset * np.eye(dim)
    return out


def comb_lindblad_set(
    ep: EnergyParams,
    eta_a: float,
    dim: int,
    N: int,
    weighting: str = "exact",
    miscalibration: MiscalibrationModel | None = None,
):
    """The four comb-realized jump operators, optionally miscalibrated.

    Miscalibration draws independent gain errors per comb from a stream
    seeded off the model seed and the comb index.
    """
    ops = []
    for idx, comb in enumerate(comb_family(ep, eta_a, N, weighting)):
        if miscalibration is not None:
            comb = apply_miscalibration(
                comb, replace(miscalibration, seed=miscalibration.seed + idx)
            )
        ops.append(effective_operator_from_comb(comb, eta_a, dim))
    return ops


def apply_miscalibration(comb: CombSpec, model: MiscalibrationModel) -> CombSpec:
    """Multiply each coefficient by its drawn complex gain; fixed seed, fixed draw."""
    rng = np.random.default_rng(model.seed)
    n = comb.coeffs.size
    draws = rng.standard_normal(2 * n)
    gains = 1.0 + model.sigma_control / math.sqrt(2.0) * (draws[:n] + 1j * draws[n:])
    return replace(comb, coeffs=comb.coeffs * gains)


def real_flux_signal(comb: CombSpec) -> dict:
    """Constant-phase real drive equivalent to the complex comb in the RWA.

    The even/odd split u_F(t) = sqrt2 (Re u(t)|even + Im u(t)|odd) leaves a
    real signal whose envelope at the carrier -w_b is u_r/sqrt2 on even
    harmonics of w_a and -i u_r/sqrt2 on odd ones (the odd content moves to
    the quadrature carrier, which is why it picks up the -i).  Rows give, per
    signed harmonic r, the two quadrature amplitudes of the sideband
    r*w_a - w_b:

        u_F(t) = sum_r cos_amp_r cos((r w_a - w_b) t)
                     + sin_amp_r sin((r w_a - w_b) t).
    """
    n = comb.N
    rows = []
    for r in range(-n, n + 1):
        u_r = comb.coefficient(r)
        envelope = u_r / math.sqrt(2.0) if r % 2 == 0 else -1j * u_r / math.sqrt(2.0)
        rows.append(
            {
                "r": r,
                "cos_amp": float(2.0 * envelope.real),
                "sin_amp": float(-2.0 * envelope.imag),
            }
        )
    return {"rows": rows, "N": n}


def reconstruct_comb_from_real_signal(signal: dict, comb: CombSpec) -> CombSpec:
    """Invert real_flux_signal: recover the complex comb with identical
    rotating-wave content (hence an identical realized operator)."""
    n = signal["N"]
    out = np.zeros(2 * n + 1, dtype=complex)
    for row in signal["rows"]:
        r = row["r"]
        envelope = 0.5 * (row["cos_amp"] - 1j * row["sin_amp"])
        gauge = 1.0 if r % 2 == 0 else 1j
        out[r + n] = math.sqrt(2.0) * gauge * envelope
    return replace(comb, coeffs=out)


def coupling_rate(e_j: float, eta_b: float, omega_a: float, xi_1: float, amp: float) -> float:
    """Modular interaction rate g = E_J eta_b w_a xi_1 e^{-eta_b^2/2}/(2 sqrt2 pi hbar amp).

    `e_j` is the Josephson energy expressed as an angular frequency (E_J/hbar)
    and `xi_1` the integrated pulse amplitude (time units), so g comes out in
    angular-frequency units.
    """
    if min(e_j, eta_b, omega_a, xi_1, amp) <= 0:
        raise InvalidParameter("all coupling_rate arguments must be positive")
    return e_j * eta_b * omega_a * xi_1 * math.exp(-eta_b * eta_b / 2.0) / (2.0 * math.sqrt(2.0) * math.pi * amp)


def xi1_from_peak(xi_max: float, N: int, omega_a: float) -> float:
    """Integrated pulse amplitude at fixed peak drive: 2 pi xi_max/((2N+1) w_a)."""
    if xi_max <= 0 or N < 1 or omega_a <= 0:
        raise InvalidParameter("xi_max, N, omega_a must be positive")
    return 2.0 * math.pi * xi_max / ((2 * N + 1) * omega_a)


def comb_amplitude_check(comb: CombSpec, xi_max: float) -> bool:
    """Whether the comb respects |xi(t)| <= 1 at peak drive xi_max.

    Peak bound: each truncated comb peaks at (2N+1)/T and the offset combs
    are rescaled by eps/(2 eta_a w_a delta); the paper's delta choice makes
    that ratio one.
    """
    if xi_max <= 0:
        raise InvalidParameter("xi_max must be positive")
    ratio = comb.epsilon / (2.0 * comb.eta_a * comb.delta_fd)
    return xi_max * max(1.0, ratio) <= 1.0


def write_comb_csv(comb: CombSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r,re,im\n")
        for r in range(-comb.N, comb.N + 1):
            u = comb.coefficient(r)
            fh.write(f"{r},{u.real:.12g},{u.imag:.12g}\n")


def write_real_signal_csv(signal: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r,cos_amp,sin_amp\n")
        for row in signal["rows"]:
            fh.write(f"{row['r']},{row['cos_amp']:.12g},{row['sin_amp']:.12g}\n")
