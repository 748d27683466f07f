"""Forward-process noise schedules: signal scale m(t) and noise width sigma(t)."""

import numpy as np

from .errors import DegenerateScheduleError
from .validation import check_positive

VARIANCE_EXPLODING = "variance-exploding"
VARIANCE_PRESERVING = "variance-preserving"


class NoiseSchedule:
    """Geometric noise schedule sigma(t) = sigma_min * (sigma_max/sigma_min)**t on [0, 1].

    variance-exploding keeps m(t) = 1; variance-preserving couples
    m(t) = sqrt(1 - sigma(t)^2), which requires sigma_max <= 1.
    """

    def __init__(self, kind=VARIANCE_EXPLODING, sigma_min=0.01, sigma_max=10.0):
        if kind not in (VARIANCE_EXPLODING, VARIANCE_PRESERVING):
            raise ValueError(f"unknown schedule kind {kind!r}")
        sigma_min = check_positive(sigma_min, "sigma_min")
        sigma_max = check_positive(sigma_max, "sigma_max")
        if sigma_max <= sigma_min:
            raise DegenerateScheduleError(
                f"sigma(t) must increase strictly: sigma_min={sigma_min}, sigma_max={sigma_max}"
            )
        if kind == VARIANCE_PRESERVING and sigma_max > 1.0:
            raise ValueError("variance-preserving schedule requires sigma_max <= 1")
        self.kind = kind
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max

    @classmethod
    def variance_exploding(cls, sigma_min=0.01, sigma_max=10.0):
        return cls(VARIANCE_EXPLODING, sigma_min, sigma_max)

    @classmethod
    def variance_preserving(cls, sigma_min=0.01, sigma_max=0.999):
        return cls(VARIANCE_PRESERVING, sigma_min, sigma_max)

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("t must lie in [0, 1]")
        out = self.sigma_min * (self.sigma_max / self.sigma_min) ** t
        return float(out) if out.ndim == 0 else out

    def m(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == VARIANCE_EXPLODING:
            out = np.ones_like(t)
        else:
            out = np.sqrt(1.0 - np.square(self.sigma(t)))
        return float(out) if out.ndim == 0 else out

    def t_of_sigma(self, sigma):
        """Inverse of sigma(t); sigma must lie in [sigma_min, sigma_max]."""
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma < self.sigma_min) or np.any(sigma > self.sigma_max):
            raise ValueError(
                f"sigma must lie in [{self.sigma_min}, {self.sigma_max}], got {sigma}"
            )
        out = np.log(sigma / self.sigma_min) / np.log(self.sigma_max / self.sigma_min)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {
            "kind": self.kind,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["sigma_min"], d["sigma_max"])

    def __repr__(self):
        return (
            f"NoiseSchedule(kind={self.kind!r}, sigma_min={self.sigma_min}, "
            f"sigma_max={self.sigma_max})"
        )
