"""Local polynomial regression and kernel density estimation on a univariate design."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, ZeroDensity
from .kernels import EPANECHNIKOV, GAUSSIAN, Kernel, get_kernel

EPS_DEN = 1e-12
EPS_F = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Paired observations ``(x_i, y_i)``; ``truth`` is set in simulation mode."""

    x: np.ndarray
    y: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError(f"x and y differ in length ({x.size} vs {y.size})")
        if x.size < 3:
            raise ValueError(f"need at least 3 observations, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.truth is not None:
            object.__setattr__(self, "truth", np.asarray(self.truth, dtype=float).ravel())

    @property
    def n(self) -> int:
        return self.x.size

    def with_y(self, y) -> "Dataset":
        return Dataset(self.x, y, self.truth)


@dataclass(frozen=True)
class CurveEstimate:
    """A fitted curve on a grid together with its pointwise standard-error ingredients.

    The standard error of ``ghat`` at grid point j is ``scale[j] * sigma[j]``, where
    ``sigma`` is ``sqrt(sigma2hat)`` unless a heteroscedastic ``sigma_grid`` is set.
    """

    grid: np.ndarray
    ghat: np.ndarray
    scale: np.ndarray
    sigma2hat: float
    bandwidth: float
    kernel: Kernel = EPANECHNIKOV
    sigma_grid: np.ndarray | None = None
    variance: str = "rice"

    def __post_init__(self):
        m = len(self.grid)
        if len(self.ghat) != m or len(self.scale) != m:
            raise ValueError("grid, ghat and scale must share a length")
        if np.any(np.asarray(self.scale) < 0) or self.sigma2hat < 0:
            raise ValueError("scale and sigma2hat must be nonnegative")

    @property
    def sigma(self) -> np.ndarray:
        if self.sigma_grid is not None:
            return np.asarray(self.sigma_grid, dtype=float)
        return np.full(len(self.grid), np.sqrt(self.sigma2hat))

    @property
    def stderr(self) -> np.ndarray:
        return np.asarray(self.scale) * self.sigma


def _as_grid(grid) -> np.ndarray:
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    if not np.all(np.isfinite(g)):
        raise ValueError("grid points must be finite")
    return g


def _check_h(h: float) -> float:
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"bandwidth must be positive and finite, got {h}")
    return h


def local_linear_weights(x, h: float, kernel: Kernel | str, grid) -> np.ndarray:
    """Smoother matrix L with ``ghat(grid) = L @ y``.

    Row j holds ``n**-1 * A_i(grid[j])``. Raises DegenerateWindow at the first
    grid point where ``S0*S2 - S1**2`` is not safely positive.
    """
    kernel = get_kernel(kernel)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    grid = _as_grid(grid)
    n = x.size
    u = (grid[:, None] - x[None, :]) / h
    k = kernel(u) / h
    s0 = k.mean(axis=1)
    s1 = (u * k).mean(axis=1)
    s2 = (u * u * k).mean(axis=1)
    den = s0 * s2 - s1 * s1
    bad = ~(den > EPS_DEN * s0 * s2)
    if np.any(bad):
        raise DegenerateWindow(grid[np.argmax(bad)])
    a = (s2[:, None] - u * s1[:, None]) / den[:, None] * k
    return a / n


def local_linear_fit(data: Dataset, h: float, kernel: Kernel | str, grid) -> np.ndarray:
    """Local linear estimate of the regression mean at each grid point."""
    return local_linear_weights(data.x, h, kernel, grid) @ data.y


def local_poly_coef(x, y, h: float, kernel: Kernel | str, grid, degree: int) -> np.ndarray:
    """Weighted polynomial fit at each grid point.

    Returns an array of shape ``(len(grid), degree + 1)`` holding the
    coefficients of ``(X - x)**j``.
    """
    kernel = get_kernel(kernel)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = _as_grid(grid)
    p = degree + 1
    u = (x[None, :] - grid[:, None]) / h
    k = kernel(u)
    powers = u[:, :, None] ** np.arange(p)  # (N, n, p)
    wp = powers * k[:, :, None]
    moments = np.einsum("gij,gik->gjk", wp, powers)
    rhs = np.einsum("gij,i->gj", wp, y)

    d = np.sqrt(np.diagonal(moments, axis1=1, axis2=2))
    ok = np.all(d > 0, axis=1)
    if not np.all(ok):
        raise DegenerateWindow(grid[np.argmin(ok)])
    norm = moments / (d[:, :, None] * d[:, None, :])
    ev = np.linalg.eigvalsh(norm)
    bad = ev[:, 0] <= EPS_DEN * ev[:, -1]
    if np.any(bad):
        raise DegenerateWindow(grid[np.argmax(bad)])
    c = np.linalg.solve(moments, rhs[:, :, None])[:, :, 0]
    return c / h ** np.arange(p)


def local_poly_deriv2(data: Dataset, h: float, kernel: Kernel | str, grid) -> np.ndarray:
    """Second derivative of the regression mean from a local cubic fit."""
    if data.n < 5:
        raise ValueError("local cubic derivative estimation needs n >= 5")
    return 2.0 * local_poly_coef(data.x, data.y, h, kernel, grid, degree=3)[:, 2]


def kde(points, h: float, kernel: Kernel | str, grid) -> np.ndarray:
    """Kernel density estimate ``(n h)**-1 * sum K((x - X_i) / h)`` on the grid."""
    kernel = get_kernel(kernel)
    h = _check_h(h)
    pts = np.asarray(points, dtype=float).ravel()
    grid = _as_grid(grid)
    return kernel((grid[:, None] - pts[None, :]) / h).mean(axis=1) / h


def silverman_bandwidth(points) -> float:
    """Silverman's normal-reference bandwidth for a Gaussian kernel."""
    pts = np.asarray(points, dtype=float).ravel()
    sd = pts.std(ddof=1)
    q75, q25 = np.percentile(pts, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd if sd > 0 else 1.0
    return 0.9 * spread * pts.size ** (-0.2)


def scale_function(n: int, h: float, kernel: Kernel | str, fhat_x, grid=None) -> np.ndarray:
    """``s(x) = sqrt(kappa / (n h fhat_X(x)))``, the standard error of ghat per unit sigma."""
    kernel = get_kernel(kernel)
    h = _check_h(h)
    f = np.atleast_1d(np.asarray(fhat_x, dtype=float))
    bad = ~(f > EPS_F)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ZeroDensity(grid[j] if grid is not None else j)
    return np.sqrt(kernel.kappa / (n * h * f))


def design_density(x, grid, h1: float | None = None, kernel: Kernel | str = GAUSSIAN) -> np.ndarray:
    """Design density estimate used in the scale function (Silverman bandwidth by default)."""
    if h1 is None:
        h1 = silverman_bandwidth(x)
    return kde(x, h1, kernel, grid)


def fit_curve(
    data: Dataset,
    h: float,
    grid,
    kernel: Kernel | str = EPANECHNIKOV,
    variance: str = "rice",
    h1: float | None = None,
) -> CurveEstimate:
    """Fit ghat, the scale function and sigma2hat in one go.

    ``variance`` is ``"rice"`` for the difference-based estimator or
    ``"residual"`` for the mean squared centred residual.
    """
    from .variance import estimate_variance

    kernel = get_kernel(kernel)
    grid = _as_grid(grid)
    ghat = local_linear_fit(data, h, kernel, grid)
    fx = design_density(data.x, grid, h1)
    scale = scale_function(data.n, h, kernel, fx, grid)
    ghat_x = local_linear_fit(data, h, kernel, data.x)
    s2 = estimate_variance(variance, data.x, data.y, ghat_x)
    return CurveEstimate(grid, ghat, scale, float(s2), float(h), kernel, variance=variance)
