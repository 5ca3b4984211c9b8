"""Baseline bands: undersmoothing and explicit bias correction with an oversmoothed pilot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow
from .estimators import CurveEstimate, Dataset, fit_curve, local_poly_deriv2
from .kernels import EPANECHNIKOV, Kernel, get_kernel
from .naive import BandResult, build_naive_band, z_crit


@dataclass(frozen=True)
class CompetitorConfig:
    method: str  # "undersmooth" or "biascorrect"
    factor: float
    base_h: float

    def __post_init__(self):
        if self.method not in ("undersmooth", "biascorrect"):
            raise ValueError(f"unknown competitor {self.method!r}")
        if not 0.0 < self.factor <= 1.0:
            raise ValueError(f"factor must lie in (0, 1], got {self.factor}")
        if not self.base_h > 0:
            raise ValueError("base_h must be positive")


def undersmooth_band(
    data: Dataset,
    config: CompetitorConfig,
    grid,
    alpha: float = 0.05,
    kernel: Kernel | str = EPANECHNIKOV,
    variance: str = "rice",
) -> BandResult:
    """Naive band from a fit at bandwidth ``gamma * h``; the scale function uses the same bandwidth."""
    h = config.factor * config.base_h
    try:
        est = fit_curve(data, h, grid, kernel, variance)
    except DegenerateWindow as exc:
        raise DegenerateWindow(exc.point, f"{exc} (undersmoothing factor {config.factor})") from exc
    return build_naive_band(est, alpha)


def estimated_bias(data: Dataset, h: float, pilot_h: float, grid, kernel: Kernel | str = EPANECHNIKOV):
    """``kappa2 / 2 * h**2 * g''(x)`` with g'' from a local cubic fit at the pilot bandwidth."""
    kernel = get_kernel(kernel)
    return 0.5 * kernel.kappa2 * h * h * local_poly_deriv2(data, pilot_h, kernel, grid)


def bias_corrected_band(
    data: Dataset,
    config: CompetitorConfig,
    grid,
    alpha: float = 0.05,
    kernel: Kernel | str = EPANECHNIKOV,
    variance: str = "rice",
    est: CurveEstimate | None = None,
) -> BandResult:
    """Naive-width band recentred at ``ghat - bias``, the bias estimated at pilot bandwidth ``h / lambda``."""
    h = config.base_h
    if est is None:
        est = fit_curve(data, h, grid, kernel, variance)
    bias = estimated_bias(data, h, h / config.factor, est.grid, kernel)
    half = est.stderr * z_crit(alpha)
    center = np.asarray(est.ghat) - bias
    return BandResult(np.asarray(est.grid), center, center - half, center + half, float(alpha))
