"""Log-log decay fits shared by the experiment modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DecayFit", "fit_decay"]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``log2(value) = intercept + slope * log2(scale)``.

    Attributes
    ----------
    scales, values : ndarray
        The fitted samples (values are positive magnitudes).
    slope : float
        Fitted exponent; a decay ``lambda^-sigma`` shows up as ``slope = -sigma``.
    intercept : float
        Fitted ``log2`` prefactor.
    residual : float
        Root-mean-square residual of the fit in ``log2`` units.
    max_residual : float
        Largest absolute residual in ``log2`` units.
    trials, seed : int
        Bookkeeping for randomized experiments.
    """

    scales: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    residual: float
    max_residual: float = 0.0
    trials: int = 1
    seed: int | None = None

    @property
    def samples(self) -> list[tuple[float, float]]:
        """``(log2 scale, log2 value)`` pairs."""
        return [(float(a), float(b)) for a, b in zip(np.log2(self.scales), np.log2(self.values))]

    @property
    def sigma(self) -> float:
        return -self.slope

    def predict(self, scale) -> np.ndarray:
        return 2.0 ** (self.intercept + self.slope * np.log2(scale))

    def as_dict(self) -> dict:
        return {
            "samples": [list(p) for p in self.samples],
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "residual": float(self.residual),
            "max_residual": float(self.max_residual),
            "trials": int(self.trials),
            "seed": self.seed,
        }


def fit_decay(scales, values, trials: int = 1, seed: int | None = None,
              min_samples: int = 5) -> DecayFit:
    """Fit a power law to positive ``values`` sampled at positive ``scales``."""
    s = np.asarray(scales, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.shape != v.shape or s.ndim != 1:
        raise ValueError("scales and values must be 1-D arrays of equal length")
    if s.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples to fit a slope (got {s.size})")
    if np.any(s <= 0) or np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("scales and values must be positive and finite")
    x, y = np.log2(s), np.log2(v)
    slope, intercept = np.polyfit(x, y, 1)
    res = y - (intercept + slope * x)
    if not np.isfinite(slope):
        raise ValueError("degenerate fit")
    return DecayFit(s, v, float(slope), float(intercept), float(np.sqrt(np.mean(res**2))),
                    float(np.max(np.abs(res))), int(trials), seed)
