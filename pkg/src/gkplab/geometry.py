"""Grid-code geometry and finite-energy regularization parameters.

Two lattice families are supported: the square code with spacing
eta = 2*sqrt(pi) and the hexagonal code with eta = 2*sqrt(2*pi/sqrt(3)).
Both satisfy the unit-cell area constraint eta^2 * sin(pi/M') = 4*pi with
M' = 2 (square, sin = 1) and M' = 3 (hexagonal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from gkplab.errors import InvalidParameter

ETA_SQUARE = 2.0 * math.sqrt(math.pi)
ETA_HEXAGONAL = 2.0 * math.sqrt(2.0 * math.pi / math.sqrt(3.0))

_CELL_AREA = 4.0 * math.pi
_AREA_RTOL = 1e-12


@dataclass(frozen=True)
class CodeGeometry:
    """Lattice family with its spacing, rotation count and Pauli support angles.

    `M` is the rotation count of the dissipator family: the stabilizing set
    contains 2*M jump operators related by phase-space rotations of pi/M.
    `pauli_angles` are the quadrature angles carrying the Z, X, Y supports.
    """

    family: str
    eta: float
    M: int
    pauli_angles: tuple[float, float, float]

    def __post_init__(self):
        if self.family not in ("square", "hexagonal"):
            raise InvalidParameter(f"unknown lattice family {self.family!r}")
        sin_factor = math.sin(math.pi / 3.0) if self.family == "hexagonal" else 1.0
        area = self.eta**2 * sin_factor
        if abs(area - _CELL_AREA) > _AREA_RTOL * _CELL_AREA:
            raise InvalidParameter(
                f"unit-cell area {area!r} violates eta^2*sin = 4*pi for {self.family}"
            )

    @property
    def n_dissipators(self) -> int:
        return 2 * self.M


def square_geometry() -> CodeGeometry:
    return CodeGeometry(
        family="square",
        eta=ETA_SQUARE,
        M=2,
        pauli_angles=(0.0, math.pi / 2.0, math.pi / 4.0),
    )


def hexagonal_geometry() -> CodeGeometry:
    return CodeGeometry(
        family="hexagonal",
        eta=ETA_HEXAGONAL,
        M=3,
        pauli_angles=(0.0, 2.0 * math.pi / 3.0, math.pi / 3.0),
    )


def geometry(family: str) -> CodeGeometry:
    if family == "square":
        return square_geometry()
    if family == "hexagonal":
        return hexagonal_geometry()
    raise InvalidParameter(f"unknown lattice family {family!r}")


@dataclass(frozen=True)
class EnergyParams:
    """Finite-energy regularization bound to a geometry.

    epsilon = eta * sinh(delta) and amp = exp(-epsilon*eta/2); amp is the
    scalar prefactor of the modular jump operators coming from normal
    ordering of the exponential and the linear quadrature factor.
    """

    epsilon: float
    delta: float
    amp: float
    eta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon!r}")
        if self.delta < 0:
            raise InvalidParameter(f"delta must be >= 0, got {self.delta!r}")
        if abs(self.amp - math.exp(-self.epsilon * self.eta / 2.0)) > 1e-14 * self.amp:
            raise InvalidParameter("amp inconsistent with exp(-epsilon*eta/2)")
        if abs(self.epsilon - self.eta * math.sinh(self.delta)) > 1e-12 * self.epsilon:
            raise InvalidParameter("epsilon inconsistent with eta*sinh(delta)")

    @classmethod
    def from_epsilon(cls, geom: CodeGeometry, epsilon: float) -> "EnergyParams":
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise InvalidParameter(f"epsilon must be positive, got {epsilon!r}")
        delta = math.asinh(epsilon / geom.eta)
        return cls(
            epsilon=epsilon,
            delta=delta,
            amp=math.exp(-epsilon * geom.eta / 2.0),
            eta=geom.eta,
        )

    @classmethod
    def from_delta(cls, geom: CodeGeometry, delta: float) -> "EnergyParams":
        if delta <= 0:
            raise InvalidParameter(f"delta must be positive, got {delta!r}")
        epsilon = geom.eta * math.sinh(delta)
        return cls(
            epsilon=epsilon,
            delta=delta,
            amp=math.exp(-epsilon * geom.eta / 2.0),
            eta=geom.eta,
        )

    @property
    def nbar(self) -> float:
        """Grid-state mean photon number scale C(epsilon, eta) = eta/(2*epsilon)."""
        return self.eta / (2.0 * self.epsilon)

    @property
    def dim_floor(self) -> int:
        """Truncation heuristic dim >= 4*C(epsilon, eta)."""
        return math.ceil(4.0 * self.nbar)
