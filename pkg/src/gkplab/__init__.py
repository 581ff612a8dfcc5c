"""gkplab: dissipative stabilization of finite-energy GKP codes, at desk scale.

The package builds the modular Lindblad operators that confine an oscillator
onto a square or hexagonal grid code, propagates the resulting master
equations with a trace- and positivity-preserving first-order channel, and
independently predicts the logical decoherence rates from the spectrum of the
associated classical convection-diffusion operators on the torus.
"""

from gkplab.geometry import CodeGeometry, EnergyParams, square_geometry, hexagonal_geometry
from gkplab.fock import (
    displacement_exp_q,
    grid_state,
    modular_core,
    quadratures,
    rotation,
    modular_lindblad_set,
    symmetric_lindblad_set,
    log_lindblad_set,
    diagonal_decomposition,
    gkp_hamiltonian,
    ground_pair,
    two_mode_embed,
    annihilator_b,
    transformed_quadrature,
)
from gkplab.lindblad import (
    LindbladModel,
    PropagatorStep,
    TrajectoryRecord,
    build_step,
    propagate,
    propagate_schedule,
    two_mode_model,
    effective_rate,
)
from gkplab.logical import (
    PauliSet,
    RateFit,
    generalized_paulis,
    bloch_coordinates,
    extract_rate,
    phase_portrait,
)
from gkplab.spectral import (
    SigmaParams,
    SpectrumResult,
    build_tsigma,
    eigen_small_1d,
    build_lsigma_hexa,
    eigen_small_2d,
    logical_rates_from_spectrum,
    optimal_epsilon,
    asymptotic_rate,
    energy_bound,
)
from gkplab.control import (
    CombSpec,
    MiscalibrationModel,
    ideal_comb,
    effective_operator_from_comb,
    apply_miscalibration,
    real_flux_signal,
    coupling_rate,
    comb_amplitude_check,
)

__version__ = "0.1.0"
