"""Exception hierarchy for the pricing engine."""


class HestonError(Exception):
    """Base class for all engine errors."""


class InvalidParams(HestonError):
    """Model parameters outside the supported domain (e.g. kappa or sigma = 0)."""


class DofOutOfRange(InvalidParams):
    """Non-central chi-squared sampling requires degrees of freedom > 1."""


class ConfigInvalid(HestonError):
    """Simulation configuration rejected (e.g. Sobol on a discretised scheme
    without the high-dimension acknowledgement flag)."""


class BesselNonConvergence(HestonError):
    """Complex modified-Bessel series failed to reach tolerance."""


class QuadratureNonConvergence(HestonError):
    """Characteristic-function quadrature tail did not fall below tolerance."""


class RootNotBracketed(HestonError):
    """CDF inversion failed even after the bisection fallback."""


class UnsupportedProduct(HestonError):
    """No pathwise estimator is derived for this product (e.g. put Greeks)."""


class ValidationError(HestonError):
    """User-supplied value outside its legal range."""


class UsageError(HestonError):
    """Malformed command line or configuration file."""
