"""Error-variance estimators and a heteroscedastic scale estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import Dataset, local_linear_weights
from .kernels import Kernel


# residuals this small relative to max|y| are round-off from the fit, not noise
EPS_RESID = 1e-12


def snap_zero(values, ref) -> np.ndarray:
    """Zero entries with ``|v| <= EPS_RESID * max|ref|``."""
    values = np.array(values, dtype=float)
    tol = EPS_RESID * float(np.max(np.abs(ref), initial=0.0))
    values[np.abs(values) <= tol] = 0.0
    return values


@dataclass(frozen=True)
class Residuals:
    raw: np.ndarray
    centered: np.ndarray

    @classmethod
    def from_fit(cls, y, ghat_x) -> "Residuals":
        y = np.asarray(y, dtype=float)
        raw = snap_zero(y - np.asarray(ghat_x, dtype=float), y)
        return cls(raw, snap_zero(raw - raw.mean(), y))


def rice_variance(data: Dataset | None = None, *, x=None, y=None) -> float:
    """Half the mean squared successive difference of responses in design order.

    Ties in x keep their input order (stable sort).
    """
    if data is not None:
        x, y = data.x, data.y
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("rice_variance needs n >= 2")
    order = np.argsort(x, kind="stable")
    return float(np.sum(np.diff(y[order]) ** 2) / (2.0 * (x.size - 1)))


def rice_variance_batch(order: np.ndarray, ystar: np.ndarray) -> np.ndarray:
    """Rice estimator for each row of ``ystar`` given a precomputed design order."""
    d = np.diff(ystar[:, order], axis=1)
    return np.sum(d * d, axis=1) / (2.0 * (ystar.shape[1] - 1))


def residual_variance(resid: Residuals | np.ndarray) -> float:
    """Mean of squared centred residuals."""
    e = resid.centered if isinstance(resid, Residuals) else np.asarray(resid, dtype=float)
    e = e - e.mean()
    return float(np.mean(e * e))


def estimate_variance(method: str, x, y, ghat_x) -> float:
    if method == "rice":
        return rice_variance(x=x, y=y)
    if method == "residual":
        return residual_variance(Residuals.from_fit(y, ghat_x))
    raise ValueError(f"unknown variance estimator {method!r}")


def hetero_scale(data: Dataset, resid: Residuals, h: float, kernel: Kernel | str, grid) -> np.ndarray:
    """sigma(x) as the square root of a local linear smooth of squared residuals.

    Negative smooth values are clamped to zero.
    """
    w = local_linear_weights(data.x, h, kernel, grid)
    return np.sqrt(np.maximum(0.0, w @ (resid.centered**2)))
