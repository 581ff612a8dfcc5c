"""Structure-preserving propagation of Lindblad master equations.

One time step applies an exact quantum channel rho -> sum_j N_j rho N_j†
built by normalizing the first-order pseudo-channel
M_0 = 1 + dt(-iH - 1/2 sum Gamma_j L_j† L_j), M_j = sqrt(Gamma_j dt) L_j
through N_j = M_j (sum M_j† M_j)^{-1/2}.  Trace is conserved to round-off and
positivity is preserved for any dt; dt only controls accuracy.  Everything is
dense matrix-matrix work: O(dim^3) per step, O(dim^2) memory, no vectorized
Liouvillian anywhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from gkplab.errors import (
    AdiabaticityWarning,
    InvalidParameter,
    PropagationAborted,
    StabilityWarning,
    StepTooLarge,
)
from gkplab.fock import annihilator_b, two_mode_embed

__all__ = [
    "LindbladModel",
    "PropagatorStep",
    "TrajectoryRecord",
    "build_step",
    "default_dt",
    "propagate",
    "propagate_schedule",
    "two_mode_model",
    "effective_rate",
    "write_trajectory_csv",
]

_CHANNEL_TOL = 1e-12
_TRACE_TOL = 1e-10
_EIG_FLOOR = 1e-14


@dataclass
class LindbladModel:
    """Hamiltonian (optional, rate units) plus weighted jump operators."""

    dim: int
    hamiltonian: np.ndarray | None = None
    jumps: list[tuple[np.ndarray, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.hamiltonian is not None:
            h = np.asarray(self.hamiltonian)
            if h.shape != (self.dim, self.dim):
                raise InvalidParameter("hamiltonian dimension mismatch")
            defect = np.linalg.norm(h - h.conj().T)
            if defect > 1e-10 * max(1.0, np.linalg.norm(h)):
                raise InvalidParameter(f"hamiltonian not Hermitian (defect {defect:.2e})")
        for op, rate in self.jumps:
            if np.asarray(op).shape != (self.dim, self.dim):
                raise InvalidParameter("jump operator dimension mismatch")
            if not (math.isfinite(rate) and rate >= 0):
                raise InvalidParameter(f"jump rate must be finite and >= 0, got {rate!r}")


@dataclass
class PropagatorStep:
    """Normalized Kraus family of one time step; sum N† N = 1 to 1e-12."""

    kraus: list[np.ndarray]
    dt: float


@dataclass
class TrajectoryRecord:
    """Sampled observables along one propagation."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    energy: np.ndarray
    trace_drift: np.ndarray
    min_eigenvalue_samples: np.ndarray
    min_eigenvalue_times: np.ndarray

    @property
    def final_state(self):
        return self._final_state

    def __post_init__(self):
        self._final_state = None


def _norm_2(op: np.ndarray, iters: int = 40) -> float:
    """2-norm estimate by power iteration on op† op."""
    rng = np.random.default_rng(7)
    v = rng.standard_normal(op.shape[0]) + 1j * rng.standard_normal(op.shape[0])
    v /= np.linalg.norm(v)
    s_prev = 0.0
    for _ in range(iters):
        w = op.conj().T @ (op @ v)
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0
        v = w / s
        if abs(s - s_prev) < 1e-10 * s:
            break
        s_prev = s
    return math.sqrt(s)


def default_dt(model: LindbladModel) -> float:
    """dt = 0.02 / (Gamma_total * max_k ||L_k||_2^2), the conservative default.

    Worst-case channel-defect bound; experiment drivers usually pass an
    explicit dt validated by halving checks instead, since confined states
    never see the operator-norm corner of phase space.
    """
    if not model.jumps:
        if model.hamiltonian is None:
            return 1.0
        return 0.02 / max(_norm_2(model.hamiltonian), 1e-30)
    gamma_total = sum(rate for _, rate in model.jumps)
    max_norm_sq = max(_norm_2(op) ** 2 for op, _ in model.jumps)
    return 0.02 / (gamma_total * max_norm_sq)


def build_step(model: LindbladModel, dt: float) -> PropagatorStep:
    """Assemble the normalized Kraus family for one constant-model step."""
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameter(f"dt must be positive, got {dt!r}")
    dim = model.dim
    rates = [rate for _, rate in model.jumps]
    if rates:
        max_rate = max(rates)
        max_norm_sq = max(_norm_2(op) ** 2 for op, _ in model.jumps)
        if dt * max_rate * max_norm_sq > 0.5:
            warnings.warn(
                f"dt*rate*||L||^2 = {dt * max_rate * max_norm_sq:.3f} > 0.5; "
                "channel is exact but per-step accuracy degrades",
                StabilityWarning,
                stacklevel=2,
            )

    drift = np.zeros((dim, dim), dtype=complex)
    if model.hamiltonian is not None:
        drift -= 1j * np.asarray(model.hamiltonian, dtype=complex)
    for op, rate in model.jumps:
        drift -= 0.5 * rate * (op.conj().T @ op)
    m0 = np.eye(dim, dtype=complex) + dt * drift

    gram = m0.conj().T @ m0
    for op, rate in model.jumps:
        gram += (rate * dt) * (op.conj().T @ op)
    gram = (gram + gram.conj().T) / 2.0

    vals, vecs = scipy.linalg.eigh(gram)
    if vals[0] <= 0:
        raise StepTooLarge(
            f"sum M†M has non-positive eigenvalue {vals[0]:.3e}; reduce dt"
        )
    inv_sqrt = (vecs * (1.0 / np.sqrt(np.clip(vals, _EIG_FLOOR, None)))) @ vecs.conj().T

    kraus = [m0 @ inv_sqrt]
    for op, rate in model.jumps:
        kraus.append(math.sqrt(rate * dt) * (op @ inv_sqrt))

    check = sum(k.conj().T @ k for k in kraus)
    defect = np.abs(check - np.eye(dim)).max()
    if defect > _CHANNEL_TOL:
        raise StepTooLarge(f"channel normalization defect {defect:.2e} exceeds 1e-12")
    return PropagatorStep(kraus=kraus, dt=dt)


def _expectations(rho, named_ops):
    return {name: np.trace(op @ rho) for name, op in named_ops}


def propagate(
    rho0: np.ndarray,
    step: PropagatorStep,
    n_steps: int,
    observables: list[tuple[str, np.ndarray]] | None = None,
    record_every: int = 1,
    eig_sample_every: int | None = None,
    t_offset: float = 0.0,
    _accumulator=None,
) -> TrajectoryRecord:
    """Iterate the one-step channel, sampling observables as we go.

    The density matrix is re-Hermitized each step ((rho + rho†)/2) to kill
    round-off drift.  Smallest-eigenvalue positivity samples are sparse
    (dense eigensolve); default every 10 recordings.
    """
    observables = observables or []
    dim = rho0.shape[0]
    rho = np.asarray(rho0, dtype=complex).copy()
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise InvalidParameter(f"rho0 trace {tr!r} != 1")
    if np.linalg.norm(rho - rho.conj().T) > 1e-8:
        raise InvalidParameter("rho0 not Hermitian")

    number_diag = np.arange(dim)
    if eig_sample_every is None:
        eig_sample_every = 10 * record_every

    acc = _accumulator if _accumulator is not None else _TrajectoryAccumulator(observables)
    if _accumulator is None:
        acc.sample(0.0 + t_offset, rho, number_diag, sample_eig=True)

    kraus = step.kraus
    for n in range(1, n_steps + 1):
        new = kraus[0] @ rho @ kraus[0].conj().T
        for k in kraus[1:]:
            new += k @ rho @ k.conj().T
        rho = (new + new.conj().T) / 2.0
        t = t_offset + n * step.dt
        if not np.isfinite(rho.diagonal().real.sum()):
            raise PropagationAborted(
                f"NaN at step {n} (t={t:.6g}); returning last good state",
                last_good_state=acc.last_good_state,
                last_good_time=acc.last_good_time,
            )
        if n % record_every == 0 or n == n_steps:
            acc.sample(t, rho, number_diag, sample_eig=(n % eig_sample_every == 0 or n == n_steps))

    if _accumulator is None:
        rec = acc.finish()
        rec._final_state = rho
        return rec
    acc.carry_state = rho
    return None


class _TrajectoryAccumulator:
    def __init__(self, observables):
        self.named_ops = observables
        self.times = []
        self.obs = {name: [] for name, _ in observables}
        self.energy = []
        self.trace_drift = []
        self.eig_samples = []
        self.eig_times = []
        self.last_good_state = None
        self.last_good_time = None
        self.carry_state = None

    def sample(self, t, rho, number_diag, sample_eig=False):
        self.times.append(t)
        for name, op in self.named_ops:
            self.obs[name].append(np.trace(op @ rho))
        self.energy.append((rho.diagonal().real * number_diag).sum())
        self.trace_drift.append(abs(np.trace(rho).real - 1.0))
        if sample_eig:
            w = scipy.linalg.eigvalsh(rho)
            self.eig_samples.append(w[0])
            self.eig_times.append(t)
        self.last_good_state = rho.copy()
        self.last_good_time = t

    def finish(self) -> TrajectoryRecord:
        return TrajectoryRecord(
            times=np.asarray(self.times),
            observables={k: np.asarray(v) for k, v in self.obs.items()},
            energy=np.asarray(self.energy),
            trace_drift=np.asarray(self.trace_drift),
            min_eigenvalue_samples=np.asarray(self.eig_samples),
            min_eigenvalue_times=np.asarray(self.eig_times),
        )


def propagate_schedule(
    rho0: np.ndarray,
    schedule: list[tuple[LindbladModel, float]],
    dt: float,
    observables: list[tuple[str, np.ndarray]] | None = None,
    record_every: int = 1,
    eig_sample_every: int | None = None,
) -> TrajectoryRecord:
    """Piecewise-constant propagation; the step is rebuilt per segment.

    Each duration must be an integer multiple of dt to within 0.1%.
    """
    observables = observables or []
    acc = _TrajectoryAccumulator(observables)
    dim = rho0.shape[0]
    acc.sample(0.0, np.asarray(rho0, dtype=complex), np.arange(dim), sample_eig=True)
    rho = rho0
    t = 0.0
    for model, duration in schedule:
        if duration <= 0:
            raise InvalidParameter("schedule durations must be positive")
        n_steps = round(duration / dt)
        if n_steps < 1 or abs(n_steps * dt - duration) > 1e-3 * duration:
            raise InvalidParameter(
                f"dt={dt} does not divide segment duration {duration} within 0.1%"
            )
        step = build_step(model, dt)
        propagate(
            rho,
            step,
            n_steps,
            observables,
            record_every=record_every,
            eig_sample_every=eig_sample_every,
            t_offset=t,
            _accumulator=acc,
        )
        rho = acc.carry_state
        t += n_steps * dt
    rec = acc.finish()
    rec._final_state = rho
    return rec


def effective_rate(g: float, kappa_b: float, mu0: float = 1.0) -> float:
    """Engineered dissipation rate |mu0|^2 * 4 g^2 / kappa_b after adiabatic
    elimination of the damped ancilla."""
    if kappa_b <= 0 or g < 0:
        raise InvalidParameter("need g >= 0 and kappa_b > 0")
    return abs(mu0) ** 2 * 4.0 * g * g / kappa_b


def two_mode_model(
    l_target: np.ndarray,
    g: float,
    kappa_b: float,
    dim_a: int,
    dim_b: int,
    mu0: float = 1.0,
    dim_cap: int = 1 << 14,
) -> LindbladModel:
    """Target-ancilla model H = g (L b† + L† b), one jump sqrt(kappa_b) b.

    Adiabatic elimination of mode b reduces it to D[L] at rate
    effective_rate(g, kappa_b, mu0).
    """
    if kappa_b <= 0 or g < 0:
        raise InvalidParameter("need g >= 0 and kappa_b > 0")
    ratio = g / kappa_b
    if ratio > 0.3:
        raise InvalidParameter(f"g/kappa_b = {ratio:.3f} outside the adiabatic regime (> 0.3)")
    if ratio > 0.1:
        warnings.warn(
            f"g/kappa_b = {ratio:.3f} > 0.1; adiabatic elimination is marginal",
            AdiabaticityWarning,
            stacklevel=2,
        )
    l_emb = two_mode_embed(np.asarray(l_target, dtype=complex), dim_b, dim_cap=dim_cap)
    b = annihilator_b(dim_a, dim_b, dim_cap=dim_cap)
    h = g * (l_emb @ b.conj().T + l_emb.conj().T @ b)
    h = (h + h.conj().T) / 2.0
    return LindbladModel(dim=dim_a * dim_b, hamiltonian=h, jumps=[(b, kappa_b)])


def write_trajectory_csv(record: TrajectoryRecord, path):
    """Dump `t,<obs>_re,<obs>_im,...,energy,trace_drift` with declaration order."""
    names = list(record.observables)
    header = ["t"]
    for name in names:
        header += [f"{name}_re", f"{name}_im"]
    header += ["energy", "trace_drift"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(record.times):
            row = [f"{t:.12g}"]
            for name in names:
                v = record.observables[name][i]
                row += [f"{v.real:.12g}", f"{v.imag:.12g}"]
            row += [f"{record.energy[i]:.12g}", f"{record.trace_drift[i]:.3e}"]
            fh.write(",".join(row) + "\n")
