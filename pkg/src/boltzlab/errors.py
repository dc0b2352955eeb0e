"""Exception hierarchy shared across the package."""


class BoltzlabError(Exception):
    """Base class for all package errors."""


class ConfigError(BoltzlabError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class NumericalError(BoltzlabError):
    """Numerical failure: NaN, divergence, or an unusable density (CLI exit code 3)."""


class KernelFormError(ConfigError):
    """A kernel was used in a form it does not support.

    Raised when a pointwise density is requested from a Dirac kernel
    (use the reduced circle form instead) or a circle reduction from a
    kernel without one.
    """


class RegionMapError(NumericalError):
    """The qualitative map of operator magnitudes over annular regions failed."""
