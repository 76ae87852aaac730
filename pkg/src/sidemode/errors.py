"""Exception taxonomy used across the toolkit."""


class SidemodeError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SidemodeError):
    """Invalid parameters, violated invariants or malformed config files."""


class WeakModulationError(ConfigurationError):
    """IQ drive outside the weak-modulation regime the model is valid for."""


class LockFailureError(SidemodeError):
    """Frequency estimation found no usable tone in the search band."""


class CalibrationError(SidemodeError):
    """Shot-noise calibration records are unusable."""


class NoDetectionError(SidemodeError):
    """Cross-correlation peak too weak to claim a vibration detection."""


class SolverError(SidemodeError):
    """Key-rate optimizer failed to converge or constraints are infeasible."""

    def __init__(self, message: str, gap: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations
