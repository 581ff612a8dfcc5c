"""Exact Fock-basis construction of the operators driving grid-code stabilization.

All modular exponentials e^{i eta q} are produced by the closed two-term
recurrence along matrix diagonals, never by numerically exponentiating a
truncated quadrature matrix: the recurrence gives every matrix element of the
untruncated operator exactly (to round-off), so truncation only limits the
block kept, not the values inside it.
"""

from __future__ import annotations

import io
import math
import struct
import warnings

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from gkplab.errors import (
    DimensionCap,
    IllConditionedEnvelope,
    InvalidDimension,
    InvalidParameter,
    TruncationWarning,
)
from gkplab.geometry import CodeGeometry, EnergyParams, square_geometry

__all__ = [
    "displacement_exp_q",
    "quadratures",
    "rotation",
    "rotate_op",
    "modular_lindblad_set",
    "symmetric_lindblad_set",
    "log_lindblad_set",
    "diagonal_decomposition",
    "reconstruct_from_diagonals",
    "gkp_hamiltonian",
    "ground_pair",
    "two_mode_embed",
    "annihilator_b",
    "transformed_quadrature",
    "quadrature_pair_lindblad_set",
    "phase_space_displacement",
    "save_operator",
    "load_operator",
]

# Conditioning guard for E_delta^-1: exp(delta*dim) beyond exp(27) ~ 5e11
# leaves fewer than ~4 significant digits in the similarity transform.
_ENVELOPE_GUARD = 27.0

_DIM_CAP_DEFAULT = 1 << 14


def _check_dim(dim) -> int:
    if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool):
        raise InvalidDimension(f"dim must be an integer, got {dim!r}")
    if dim < 2:
        raise InvalidDimension(f"dim must be >= 2, got {dim}")
    return int(dim)


def displacement_diagonal_table(eta: float, dim: int, k_max: int | None = None) -> np.ndarray:
    """Real diagonals of e^{i eta q}: table[k, n] = <n|e^{i eta q}|n+k> / i^k.

    Row n = 0 comes from the coherent-state overlap
    e^{-eta^2/4} (eta/sqrt(2))^k / sqrt(k!); the rest follows the two-term
    recurrence along each diagonal.  Entries with n + k >= dim are zero.
    """
    dim = _check_dim(dim)
    if not math.isfinite(eta):
        raise InvalidParameter(f"eta must be finite, got {eta!r}")
    if k_max is None:
        k_max = dim - 1
    if not 0 <= k_max < dim:
        raise InvalidParameter(f"k_max must be in [0, dim), got {k_max}")

    table = np.zeros((k_max + 1, dim))
    ks = np.arange(k_max + 1, dtype=float)
    if eta == 0.0:
        table[0, :] = 1.0
        return table

    half = eta * eta / 2.0
    log_row0 = -half / 2.0 + ks * math.log(abs(eta) / math.sqrt(2.0)) - 0.5 * gammaln(ks + 1.0)
    sign_row0 = np.where(ks % 2 == 0, 1.0, math.copysign(1.0, eta))
    table[:, 0] = sign_row0 * np.exp(log_row0)

    prev2 = np.zeros(k_max + 1)
    prev1 = table[:, 0].copy()
    for n in range(1, dim):
        cur = (2.0 * n - 1.0 + ks - half) * prev1
        if n >= 2:
            cur -= np.sqrt((n - 1.0) * (n - 1.0 + ks)) * prev2
        cur /= np.sqrt(n * (n + ks))
        table[:, n] = cur
        prev2, prev1 = prev1, cur

    # zero out entries past the truncation edge so callers can slice freely
    for k in range(k_max + 1):
        if dim - k < dim:
            table[k, dim - k:] = 0.0
    return table


def displacement_exp_q(eta: float, dim: int) -> np.ndarray:
    """Matrix of e^{i eta q} on the first `dim` Fock states.

    The result is symmetric (not Hermitian); even diagonals are real and odd
    diagonals purely imaginary.
    """
    table = displacement_diagonal_table(eta, dim)
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        phase = 1j**k
        idx = np.arange(dim - k)
        vals = phase * table[k, : dim - k]
        out[idx, idx + k] = vals
        out[idx + k, idx] = vals
    return out


def quadratures(dim: int):
    """Standard (q, p, a, n_op) matrices with q=(a+a†)/sqrt2, p=(a-a†)/(i sqrt2)."""
    dim = _check_dim(dim)
    sq = np.sqrt(np.arange(1, dim, dtype=float))
    a = np.zeros((dim, dim), dtype=complex)
    a[np.arange(dim - 1), np.arange(1, dim)] = sq
    adag = a.conj().T
    q = (a + adag) / math.sqrt(2.0)
    p = (a - adag) / (1j * math.sqrt(2.0))
    n_op = np.diag(np.arange(dim, dtype=complex))
    return q, p, a, n_op


def rotation(theta: float, dim: int) -> np.ndarray:
    """Phase-space rotation R_theta = e^{i theta N}, diagonal in the Fock basis."""
    dim = _check_dim(dim)
    if not math.isfinite(theta):
        raise InvalidParameter(f"theta must be finite, got {theta!r}")
    return np.diag(np.exp(1j * theta * np.arange(dim)))


def rotate_op(op: np.ndarray, theta: float) -> np.ndarray:
    """Conjugate by R_theta without matrix products: entrywise phase mask."""
    n = np.arange(op.shape[0])
    phase = np.exp(1j * theta * n)
    return op * np.outer(phase, phase.conj())


def modular_core(eta: float, epsilon: float, amp: float, dim: int) -> np.ndarray:
    """Exact-element matrix of amp * e^{i eta q}(1 - eps p).

    The operator's k-th upper (lower) diagonal is the corresponding diagonal
    of e^{i eta q} scaled by amp*(1 + eps*eta/2 +- eps*k/eta), an exact
    identity of the untruncated operator.  Assembling diagonals directly
    gives the projection of the infinite-dimensional operator, with no
    truncated-product artifacts in the last rows and columns.
    """
    dim = _check_dim(dim)
    table = displacement_diagonal_table(eta, dim)
    out = np.zeros((dim, dim), dtype=complex)
    base = 1.0 + epsilon * eta / 2.0
    for k in range(dim):
        idx = np.arange(dim - k)
        diag = (1j**k) * table[k, : dim - k]
        out[idx, idx + k] = amp * (base + epsilon * k / eta) * diag
        if k > 0:
            out[idx + k, idx] = amp * (base - epsilon * k / eta) * diag
    return out


def _modular_core(ep: EnergyParams, dim: int) -> np.ndarray:
    return modular_core(ep.eta, ep.epsilon, ep.amp, dim)


def _warn_truncation(ep: EnergyParams, dim: int):
    if dim < ep.dim_floor:
        warnings.warn(
            f"dim={dim} below heuristic floor 4*eta/(2*eps)={ep.dim_floor}; "
            "energy support may be clipped",
            TruncationWarning,
            stacklevel=3,
        )


def modular_lindblad_set(geom: CodeGeometry, ep: EnergyParams, dim: int) -> list[np.ndarray]:
    """The 2M modular jump operators amp R_{k pi/M} e^{i eta q}(1-eps p) R† - 1."""
    dim = _check_dim(dim)
    if abs(ep.eta - geom.eta) > 1e-12 * geom.eta:
        raise InvalidParameter("EnergyParams bound to a different lattice spacing")
    _warn_truncation(ep, dim)
    core = _modular_core(ep, dim)
    eye = np.eye(dim)
    ops = []
    for k in range(2 * geom.M):
        ops.append(rotate_op(core, k * math.pi / geom.M) - eye)
    return ops


def symmetric_lindblad_set(ep: EnergyParams, dim: int):
    """Square-code recombination (L_{q,s}, L_{q,d}, L_{p,s}, L_{p,d}).

    A unitary mixing of the four rotated-exponential operators, so the
    Lindblad superoperators of the two families coincide.
    """
    geom = square_geometry()
    l0, l1, l2, l3 = modular_lindblad_set(geom, ep, dim)
    lqs = (l0 + l2) / math.sqrt(2.0)
    lqd = (l0 - l2) / (math.sqrt(2.0) * 1j)
    lps = (l1 + l3) / math.sqrt(2.0)
    lpd = (l1 - l3) / (math.sqrt(2.0) * 1j)
    return lqs, lqd, lps, lpd


def log_lindblad_set(delta: float, eta: float, dim: int):
    """Two jump operators from the principal log of the finite-energy stabilizers.

    The principal branch of -i log(E e^{i eta q} E^{-1}) collapses, for the
    square lattice, to the closed modular form
        L_0 = q_[m]/sqrt(2 tanh delta) + i p sqrt(tanh delta / 2),
    with m = 2 pi/(eta cosh delta) and q_[m] the sawtooth reduction of q into
    (-m/2, m/2].  The modular quadrature is evaluated in the eigenbasis of the
    Hermitian q; eigendecomposing the similarity-transformed exponential
    directly is numerically meaningless on a truncated space (sections of
    non-normal operators pull all eigenvalues deep into the unit disk).
    The partner is the quarter-turn rotation acting on p.
    """
    dim = _check_dim(dim)
    if not (delta > 0 and math.isfinite(delta)):
        raise InvalidParameter(f"delta must be positive, got {delta!r}")
    if delta * dim > _ENVELOPE_GUARD:
        raise IllConditionedEnvelope(
            f"delta*dim = {delta * dim:.2f} > {_ENVELOPE_GUARD}: E_delta^-1 too ill-conditioned"
        )
    q, p, _, _ = quadratures(dim)
    period = 2.0 * math.pi / (eta * math.cosh(delta))
    xs, vecs = scipy.linalg.eigh(q)
    folded = np.mod(xs + period / 2.0, period) - period / 2.0
    q_mod = (vecs * folded) @ vecs.conj().T
    l0 = q_mod / math.sqrt(2.0 * math.tanh(delta)) + 1j * p * math.sqrt(math.tanh(delta) / 2.0)
    l1 = rotate_op(l0, -math.pi / 2.0)
    return l0, l1


def diagonal_decomposition(eta: float, dim: int, K: int) -> list[np.ndarray]:
    """Real diagonal profiles phi_k(n) of e^{i eta q}, k = 0..K.

    phi_k(n) = sqrt(n!/(n+k)!) * <n|e^{i eta q}|n+k> / i^k; weighting the k-th
    diagonals of the displacement matrix by phi_k rebuilds it exactly.
    Magnitudes decay combinatorially in k, so profiles for large k underflow
    around k ~ 250; they are exactly zero there in double precision anyway.
    """
    dim = _check_dim(dim)
    if not (isinstance(K, (int, np.integer)) and 0 <= K < dim):
        raise InvalidParameter(f"K must satisfy 0 <= K < dim, got {K!r}")
    table = displacement_diagonal_table(eta, dim, k_max=K)
    phis = []
    for k in range(K + 1):
        n = np.arange(dim - k, dtype=float)
        if k == 0:
            ratio = np.ones(dim)
        else:
            # sqrt(n!/(n+k)!) = exp(-0.5 * sum_{j=1..k} log(n+j))
            logs = np.log(n[:, None] + np.arange(1, k + 1)[None, :]).sum(axis=1)
            ratio = np.exp(-0.5 * logs)
        phis.append(table[k, : dim - k] * ratio)
    return phis


def reconstruct_from_diagonals(phis: list[np.ndarray], dim: int) -> np.ndarray:
    """Rebuild sum_k i^k (phi_k(N) a^k + a†^k phi_k(N)) from diagonal profiles."""
    dim = _check_dim(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for k, phi in enumerate(phis):
        n = np.arange(dim - k, dtype=float)
        if k == 0:
            amp = phi.astype(complex)
        else:
            logs = np.log(n[:, None] + np.arange(1, k + 1)[None, :]).sum(axis=1)
            amp = (1j**k) * phi * np.exp(0.5 * logs)
        idx = np.arange(dim - k)
        out[idx, idx + k] += amp
        if k > 0:
            out[idx + k, idx] += amp
    return out


def _cos_eta_q_theta(eta: float, theta: float, dim: int) -> np.ndarray:
    disp = rotate_op(displacement_exp_q(eta, dim), theta)
    return (disp + disp.conj().T) / 2.0


def gkp_hamiltonian(geom: CodeGeometry, ep: EnergyParams, dim: int) -> np.ndarray:
    """Trapping Hamiltonian whose quasi-degenerate ground doublet spans the code.

    eps^2/2 (q^2+p^2) minus the lattice cosines: both cos(eta q) and
    cos(eta p) for the square code, the three cosines at 0, pi/3, 2pi/3
    (weighted 2/3) for the hexagonal code.
    """
    dim = _check_dim(dim)
    if abs(ep.eta - geom.eta) > 1e-12 * geom.eta:
        raise InvalidParameter("EnergyParams bound to a different lattice spacing")
    _warn_truncation(ep, dim)
    q, p, _, _ = quadratures(dim)
    h = ep.epsilon**2 / 2.0 * (q @ q + p @ p)
    if geom.family == "square":
        h = h - _cos_eta_q_theta(ep.eta, 0.0, dim) - _cos_eta_q_theta(ep.eta, math.pi / 2.0, dim)
    else:
        for k in range(3):
            h = h - (2.0 / 3.0) * _cos_eta_q_theta(ep.eta, k * math.pi / 3.0, dim)
    return (h + h.conj().T) / 2.0


def ground_pair(hamiltonian: np.ndarray, count: int = 2):
    """Lowest `count` eigenpairs of a Hermitian operator (dense solve)."""
    herm_defect = np.linalg.norm(hamiltonian - hamiltonian.conj().T)
    if herm_defect > 1e-10 * max(1.0, np.linalg.norm(hamiltonian)):
        raise InvalidParameter("ground_pair expects a Hermitian operator")
    vals, vecs = scipy.linalg.eigh(hamiltonian)
    return vals[:count], [np.ascontiguousarray(vecs[:, i]) for i in range(count)]


def two_mode_embed(op_a: np.ndarray, dim_b: int, dim_cap: int = _DIM_CAP_DEFAULT) -> np.ndarray:
    """op_a on mode a, identity on mode b, in mode-a-major ordering.

    Index convention: basis state |n_a, n_b> sits at row n_a*dim_b + n_b.
    """
    dim_b = _check_dim(dim_b)
    dim_a = op_a.shape[0]
    if dim_a * dim_b > dim_cap:
        raise DimensionCap(f"product dimension {dim_a * dim_b} exceeds cap {dim_cap}")
    return np.kron(op_a, np.eye(dim_b))


def annihilator_b(dim_a: int, dim_b: int, dim_cap: int = _DIM_CAP_DEFAULT) -> np.ndarray:
    """Annihilation operator of mode b embedded in the a-major product space."""
    dim_a = _check_dim(dim_a)
    dim_b = _check_dim(dim_b)
    if dim_a * dim_b > dim_cap:
        raise DimensionCap(f"product dimension {dim_a * dim_b} exceeds cap {dim_cap}")
    _, _, b, _ = quadratures(dim_b)
    return np.kron(np.eye(dim_a), b)


def transformed_quadrature(geom: CodeGeometry, angle: float, scale: float, dim: int) -> np.ndarray:
    """Generalized quadrature scale*(cos(angle) q + sin(angle) p).

    These are the symplectic images of q and p along which gate-deformed
    dissipators are built; symplectic maps keep [S(q), S(p)] = i.
    """
    dim = _check_dim(dim)
    if not (scale > 0 and math.isfinite(scale) and math.isfinite(angle)):
        raise InvalidParameter(f"need finite angle and scale > 0, got {angle!r}, {scale!r}")
    q, p, _, _ = quadratures(dim)
    return scale * (math.cos(angle) * q + math.sin(angle) * p)


def quadrature_pair_lindblad_set(
    ep: EnergyParams,
    dim: int,
    q_spec: tuple[float, float],
    p_spec: tuple[float, float],
) -> list[np.ndarray]:
    """Square-code jump operators along a symplectically transformed pair.

    `q_spec` and `p_spec` are (angle, scale) of the transformed quadratures
    Q = S(q), P = S(p) with [Q, P] = i.  Returns the four operators
    amp e^{i eta Q}(1 - eps P) - 1, amp e^{i eta P}(1 + eps Q) - 1 and their
    images under a pi rotation.
    """
    dim = _check_dim(dim)
    _warn_truncation(ep, dim)
    angle_q, scale_q = q_spec
    angle_p, scale_p = p_spec
    op_q = transformed_quadrature(square_geometry(), angle_q, scale_q, dim)
    op_p = transformed_quadrature(square_geometry(), angle_p, scale_p, dim)
    exp_q = rotate_op(displacement_exp_q(ep.eta * scale_q, dim), angle_q)
    exp_p = rotate_op(displacement_exp_q(ep.eta * scale_p, dim), angle_p)
    eye = np.eye(dim)
    l0 = ep.amp * (exp_q @ (eye - ep.epsilon * op_p)) - eye
    l1 = ep.amp * (exp_p @ (eye + ep.epsilon * op_q)) - eye
    l2 = rotate_op(l0 + eye, math.pi) - eye
    l3 = rotate_op(l1 + eye, math.pi) - eye
    return [l0, l1, l2, l3]


def grid_state(geom: CodeGeometry, ep: EnergyParams, dim: int, which: str = "+Z") -> np.ndarray:
    """Exact finite-energy grid state: the envelope e^{-delta N} applied to a
    comb of position eigenstates.

    '+Z' sums position peaks at q = j*eta, '-Z' at q = (j+1/2)*eta.  Fock
    amplitudes come from the Hermite-function recurrence, so the state is the
    normalized truncation of the untruncated grid state.
    """
    dim = _check_dim(dim)
    if which not in ("+Z", "-Z"):
        raise InvalidParameter(f"unknown grid state {which!r}")
    offset = 0.0 if which == "+Z" else 0.5
    j_max = int(math.ceil(math.sqrt(2.0 * dim) / geom.eta)) + 2
    xs = (np.arange(-j_max, j_max + 1) + offset) * geom.eta
    # Hermite functions psi_m(x) with <x|0> = pi^{-1/4} e^{-x^2/2}
    psi_prev = np.pi**-0.25 * np.exp(-(xs**2) / 2.0)
    psi_cur = math.sqrt(2.0) * xs * psi_prev
    comb = np.empty(dim)
    comb[0] = psi_prev.sum()
    if dim > 1:
        comb[1] = psi_cur.sum()
    for m in range(2, dim):
        psi_next = math.sqrt(2.0 / m) * xs * psi_cur - math.sqrt((m - 1.0) / m) * psi_prev
        comb[m] = psi_next.sum()
        psi_prev, psi_cur = psi_cur, psi_next
    amps = np.exp(-ep.delta * np.arange(dim)) * comb
    return (amps / np.linalg.norm(amps)).astype(complex)


def phase_space_displacement(alpha: float, beta: float, dim: int) -> np.ndarray:
    """Exact displacement e^{-i alpha p + i beta q} from the recurrence.

    Single-operator construction (no q-then-p splitting), so no ordering
    phase ambiguity.
    """
    dim = _check_dim(dim)
    shift = math.hypot(alpha, beta)
    if shift == 0.0:
        return np.eye(dim, dtype=complex)
    theta = math.atan2(-alpha, beta)
    return rotate_op(displacement_exp_q(shift, dim), theta)


_MAGIC = b"GKPF"
_VERSION = 1
_ORDER_COLUMN_MAJOR = ord("F")


def save_operator(op: np.ndarray, path_or_buf):
    """Write a square complex operator in the column-major fixture format.

    Layout: magic 'GKPF', version byte, order byte (always 'F'), uint32 dim,
    then dim*dim complex128 values in column-major order.
    """
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise InvalidParameter("save_operator expects a square matrix")
    header = _MAGIC + struct.pack("<BBI", _VERSION, _ORDER_COLUMN_MAJOR, op.shape[0])
    payload = np.asfortranarray(op).tobytes(order="F")
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    else:
        path_or_buf.write(header)
        path_or_buf.write(payload)


def load_operator(path_or_buf) -> np.ndarray:
    """Read an operator written by save_operator; rejects row-major payloads."""
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "rb") as fh:
            raw = fh.read()
    else:
        raw = path_or_buf.read()
    buf = io.BytesIO(raw)
    magic = buf.read(4)
    if magic != _MAGIC:
        raise InvalidParameter(f"bad magic {magic!r}")
    version, order, dim = struct.unpack("<BBI", buf.read(6))
    if version != _VERSION:
        raise InvalidParameter(f"unsupported format version {version}")
    if order != _ORDER_COLUMN_MAJOR:
        raise InvalidParameter("row-major operator payloads are not accepted")
    data = np.frombuffer(buf.read(), dtype=np.complex128)
    if data.size != dim * dim:
        raise InvalidParameter("payload size does not match header dimension")
    return data.reshape((dim, dim), order="F").copy()
