"""Exception and warning types shared across the package."""


class GkplabError(Exception):
    """Base class for all errors raised by gkplab."""


class InvalidDimension(GkplabError, ValueError):
    """Fock truncation is too small or not a positive integer."""


class InvalidParameter(GkplabError, ValueError):
    """A numeric parameter is out of its admissible range or not finite."""


class IllConditionedEnvelope(GkplabError, ValueError):
    """exp(delta * dim) exceeds the double-precision budget for E_delta^-1."""


class StepTooLarge(GkplabError, RuntimeError):
    """The normalized one-step channel could not be built at this dt."""


class PropagationAborted(GkplabError, RuntimeError):
    """NaN detected during propagation; carries the last good state."""

    def __init__(self, message, last_good_state=None, last_good_time=None):
        super().__init__(message)
        self.last_good_state = last_good_state
        self.last_good_time = last_good_time


class AmbiguousFit(GkplabError, RuntimeError):
    """The observable changes sign inside the fit window."""


class RejectedFit(GkplabError, RuntimeError):
    """The exponential fit residual exceeds the acceptance threshold."""


class DimensionCap(GkplabError, ValueError):
    """A tensor-product dimension exceeds the configured cap."""


class OutOfRegime(GkplabError, ValueError):
    """Input violates the validity hypothesis of an asymptotic formula."""


class ConfigError(GkplabError, ValueError):
    """Experiment configuration failed validation."""


class TruncationWarning(UserWarning):
    """Fock truncation below the energy-bound heuristic dim >= 4*eta/(2*eps)."""


class AdiabaticityWarning(UserWarning):
    """Coupling-to-damping ratio g/kappa_b outside the safe adiabatic regime."""


class StabilityWarning(UserWarning):
    """Time step near or above the stability heuristic for the channel defect."""
