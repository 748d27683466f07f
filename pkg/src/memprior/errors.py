"""Exception types shared across the package."""


class MempriorError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(MempriorError, ValueError):
    """An input vector/matrix has the wrong shape for the operation."""


class DegenerateScheduleError(MempriorError, ValueError):
    """Noise schedule evaluates to a non-positive width."""


class InvalidModelError(MempriorError, ValueError):
    """A model field violates a physical constraint (e.g. nonpositive slowness)."""


class SolverFailureError(MempriorError, RuntimeError):
    """Sparse factorization or solve failed; carries a condition diagnostic."""


class TrainingFailureError(MempriorError, RuntimeError):
    """Training diverged (non-finite loss); carries the step index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class SamplerFailureError(MempriorError, RuntimeError):
    """Reverse diffusion produced non-finite state; carries the step index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class InternalConsistencyError(MempriorError, RuntimeError):
    """A quantity that must be well-posed by construction is not (likely a bug upstream)."""


class UndefinedRatioError(MempriorError, ValueError):
    """Nearest-neighbor ratio requested with fewer than two training examples."""


class UnsupportedDimensionError(MempriorError, ValueError):
    """Grid-based reference posterior requested above 2 dimensions."""


class ConfigError(MempriorError, ValueError):
    """Experiment configuration is malformed or references missing files."""
