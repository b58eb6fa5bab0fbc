"""Exception taxonomy shared across the package."""


class ShotNoiseError(Exception):
    """Base class for all package errors."""


class ParameterError(ShotNoiseError, ValueError):
    """Invalid argument (non-positive intensity, empty window, bad grid...)."""


class CapabilityError(ShotNoiseError):
    """Operation requested beyond what the kernel model supports."""


class WindowError(ShotNoiseError):
    """Point window too small for the requested evaluation interval."""


class InfeasibleConditioningError(ShotNoiseError):
    """Conditional acceptance probability too small for rejection sampling."""

    def __init__(self, message: str, acceptance: float):
        super().__init__(message)
        self.acceptance = acceptance


class AccuracyError(ShotNoiseError):
    """Requested tolerance not met; carries the achieved error estimate."""

    def __init__(self, message: str, achieved: float, target: float):
        super().__init__(message)
        self.achieved = achieved
        self.target = target


class ResolutionError(ShotNoiseError):
    """Fourier grid too coarse or too narrow for the requested inversion."""


class PhaseDegeneracyError(ShotNoiseError):
    """Phase modulus bound fell below the degeneracy threshold."""


class TrackingError(ShotNoiseError):
    """Extremum continuation lost or miscounted a track."""
