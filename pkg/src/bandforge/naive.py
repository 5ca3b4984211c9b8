"""Symmetric normal-template bands and their asymptotic coverage under bias."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .estimators import CurveEstimate


def z_crit(alpha):
    """Two-sided normal critical value ``z_{1 - alpha/2}``.

    Computed as ``-ndtri(alpha/2)`` so small alpha keeps full precision;
    ``alpha = 0`` gives ``inf`` and ``alpha = 1`` gives 0.
    """
    return -ndtri(np.asarray(alpha, dtype=float) / 2.0)


def two_sided_level(q):
    """Inverse of :func:`z_crit`: the alpha whose critical value is ``q``."""
    return 2.0 * ndtr(-np.asarray(q, dtype=float))


@dataclass(frozen=True)
class BandResult:
    grid: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    kind: str = "normal"

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (self.lower <= values) & (values <= self.upper)


def build_naive_band(est: CurveEstimate, alpha: float) -> BandResult:
    """``ghat +/- s(x) sigma z_{1-alpha/2}`` on the estimate's grid."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    half = est.stderr * z_crit(alpha)
    center = np.asarray(est.ghat, dtype=float)
    return BandResult(np.asarray(est.grid), center, center - half, center + half, float(alpha))


def asymptotic_coverage(b, alpha):
    """Limiting coverage ``Phi(z + b) - Phi(-z + b)`` of the naive band under bias effect b."""
    z = z_crit(alpha)
    b = np.asarray(b, dtype=float)
    # symmetric form avoids cancellation when b is large
    b = np.abs(b)
    return ndtr(z - b) - ndtr(-z - b)
