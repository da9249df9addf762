"""Exception types raised across the library."""


class WavegapError(Exception):
    """Base class for all wavegap errors."""


class ConfigError(WavegapError):
    """Invalid or inconsistent run configuration."""


class ShapeError(WavegapError):
    """Array length does not match the grid."""


class RootCountError(WavegapError):
    """Root scan did not find exactly three zeros on the bracket."""


class StabilityError(WavegapError):
    """Derivative signs at the fixed points violate bistability."""


class PositivityError(WavegapError):
    """A quantity that must be strictly positive is not."""


class NewtonDivergence(WavegapError):
    """Newton iteration failed to reach the requested residual."""


class MonotonicityError(WavegapError):
    """A profile that must be strictly increasing is not."""


class FrontLostError(WavegapError):
    """Front tracking lost the level crossing inside the safe window."""


class DivisionError(WavegapError):
    """Denominator of a quotient formula is numerically zero."""


class ConvexConcaveError(WavegapError):
    """Gain curvature changes sign more than once on the sampled range."""


class ConvergenceError(WavegapError):
    """Inverse iteration did not converge within the iteration budget."""


class NormalizationError(WavegapError):
    """Two independent computations of a normalizer disagree."""


class SupportError(WavegapError):
    """Test function is not negligible near the domain boundary."""


class UnboundedError(WavegapError):
    """A sup-type constant does not saturate (diverging tail or rate)."""


class TailFitError(WavegapError):
    """Log-density tail is not asymptotically affine."""


class DegenerateError(WavegapError):
    """Eigenvalue needed for a reciprocal is numerically zero."""


class NonPositiveError(WavegapError):
    """A pointwise ratio that must stay positive crossed zero."""


class CertificationFailure(WavegapError):
    """Direct gap computation contradicts the certified constant."""


class PreconditionError(WavegapError):
    """Operation called outside its stated preconditions."""


class DomainError(WavegapError):
    """Inputs are outside the validity region of a closed-form bound."""


class HypothesisError(WavegapError):
    """Stochastic run parameters violate the stability hypotheses."""


class BlowupError(WavegapError):
    """Simulated field left the physically meaningful range."""
