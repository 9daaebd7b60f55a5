"""Exception hierarchy shared by all modules."""


class KawaharaLabError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(KawaharaLabError, ValueError):
    """Invalid or inconsistent parameters, variants or constants."""


class DomainError(KawaharaLabError, ValueError):
    """A geometric input lies outside the physical domain."""


class DimensionError(KawaharaLabError, ValueError):
    """Array lengths do not match the grid they are used with."""


class SequencingError(KawaharaLabError, RuntimeError):
    """History buffer used out of time order."""


class NumericalError(KawaharaLabError, RuntimeError):
    """Linear algebra failure (singular factorization, eigensolver)."""


class WindowError(KawaharaLabError, ValueError):
    """A fit window contains unusable samples."""


class BlowUpError(KawaharaLabError, RuntimeError):
    """The discrete solution left the finite range."""

    def __init__(self, t: float, max_abs: float):
        self.t = t
        self.max_abs = max_abs
        super().__init__(f"blow-up at t={t:.6g}: max|u| = {max_abs:.6g}")
