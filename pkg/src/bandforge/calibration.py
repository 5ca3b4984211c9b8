"""Residual-bootstrap calibration of the nominal level of the symmetric band.

The bootstrap world keeps the design fixed and the bandwidth fixed, so every
replicate is a matrix product with one precomputed smoother matrix. Per-replicate
draws come from substreams keyed by ``(seed, replicate)``, so ensembles do not
depend on execution order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import ZeroScale
from .estimators import CurveEstimate, Dataset, fit_curve, local_linear_weights
from .kernels import EPANECHNIKOV, Kernel
from .naive import BandResult, build_naive_band, two_sided_level, z_crit
from .variance import Residuals, hetero_scale, residual_variance, rice_variance_batch, snap_zero

EPS_SCALE = 1e-12


@dataclass(frozen=True)
class BootstrapEnsemble:
    """Bootstrap statistics on the evaluation grid.

    ``tstat[b, j] = |ghat*_b(x_j) - ghat(x_j)| / (s(x_j) sigma*_b)``; ``dev`` keeps
    the signed deviations ``ghat*_b - ghat``.
    """

    tstat: np.ndarray
    dev: np.ndarray
    sigma2star: np.ndarray
    seed: tuple

    @property
    def B(self) -> int:
        return self.tstat.shape[0]


@dataclass(frozen=True)
class CalibrationProfile:
    grid: np.ndarray
    beta_hat: np.ndarray
    alpha_hat_xi: float
    alpha0: float
    xi: float
    tstat: np.ndarray | None = None


def upper_rank(level: float, count: int) -> int:
    """1-based order-statistic rank ``ceil(level * count)`` clamped to ``[1, count]``.

    A relative slack of 1e-9 absorbs binary representation error, so that
    ``0.95 * 20`` counts as 19.
    """
    r = math.ceil(level * count - 1e-9 * max(1.0, abs(level * count)))
    return min(max(r, 1), count)


def guarded_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``num / den`` with ``0/0 = 0`` and ``x/0 = inf`` for ``x > 0``."""
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    out = np.zeros(num.shape)
    pos = num > 0
    np.divide(num, den, out=out, where=pos & (den > 0))
    out[pos & ~(den > 0)] = np.inf
    return out


def draw_indices(seed, tag: int, B: int, n: int, workers: int = 1) -> np.ndarray:
    """``B x n`` resampling indices, row b drawn from substream ``(seed, tag, b)``."""

    def one(b):
        return rngmod.substream(seed, tag, b).integers(0, n, size=n)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, range(B)))
    else:
        rows = [one(b) for b in range(B)]
    return np.asarray(rows, dtype=np.intp).reshape(B, n)


def _seed_key(seed) -> tuple:
    return rngmod.child_seed(seed)


def make_residual_bootstrap(
    data: Dataset, est: CurveEstimate, B: int, seed, workers: int = 1
) -> BootstrapEnsemble:
    """Resample centred residuals onto the fitted curve and refit with the same bandwidth.

    Design points are never resampled. ``sigma*`` uses the estimator named by
    ``est.variance``.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    h, kern = est.bandwidth, est.kernel
    lg = local_linear_weights(data.x, h, kern, est.grid)
    lx = local_linear_weights(data.x, h, kern, data.x)
    ghat_x = lx @ data.y
    eps = Residuals.from_fit(data.y, ghat_x).centered

    idx = draw_indices(seed, rngmod.BOOT, B, data.n, workers)
    ystar = ghat_x[None, :] + eps[idx]
    gstar = ystar @ lg.T
    if est.variance == "rice":
        s2 = rice_variance_batch(np.argsort(data.x, kind="stable"), ystar)
    elif est.variance == "residual":
        r = ystar - ystar @ lx.T
        r = snap_zero(r - r.mean(axis=1, keepdims=True), data.y)
        s2 = np.mean(r * r, axis=1)
    else:
        raise ValueError(f"unknown variance estimator {est.variance!r}")
    dev = snap_zero(gstar - np.asarray(est.ghat)[None, :], data.y)
    t = guarded_ratio(np.abs(dev), np.asarray(est.scale)[None, :] * np.sqrt(s2)[:, None])
    return BootstrapEnsemble(t, dev, s2, _seed_key(seed))


def make_hetero_bootstrap(
    data: Dataset,
    est: CurveEstimate,
    sigma_x,
    B: int,
    seed,
    h_sigma: float | None = None,
    workers: int = 1,
) -> BootstrapEnsemble:
    """Heteroscedastic residual bootstrap ``Y* = ghat(X) + sigma(X) eps*``.

    ``eps*`` is drawn from the residuals standardised by ``sigma_x`` (recentred
    and rescaled to unit variance). Each replicate re-estimates ``sigma*(x)`` by
    smoothing its own squared residuals with bandwidth ``h_sigma`` (default: the
    fit bandwidth), and that enters the T statistic.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    h, kern = est.bandwidth, est.kernel
    h_sigma = h if h_sigma is None else h_sigma
    sigma_x = np.asarray(sigma_x, dtype=float)
    if np.any(sigma_x < 0):
        raise ValueError("sigma_x must be nonnegative")
    lg = local_linear_weights(data.x, h, kern, est.grid)
    lx = local_linear_weights(data.x, h, kern, data.x)
    lsig = local_linear_weights(data.x, h_sigma, kern, est.grid)
    ghat_x = lx @ data.y
    eps = Residuals.from_fit(data.y, ghat_x).centered

    tiny = sigma_x <= EPS_SCALE
    nonzero = np.abs(eps) > EPS_SCALE * max(1.0, float(np.max(np.abs(data.y))))
    if np.any(tiny & nonzero):
        j = int(np.argmax(tiny & nonzero))
        raise ZeroScale(f"sigma(x)=0 at design point x={data.x[j]:.17g} with nonzero residual")
    std = np.zeros_like(eps)
    np.divide(eps, sigma_x, out=std, where=~tiny)
    std -= std.mean()
    rms = np.sqrt(np.mean(std * std))
    if rms > 0:
        std /= rms

    idx = draw_indices(seed, rngmod.BOOT, B, data.n, workers)
    ystar = ghat_x[None, :] + sigma_x[None, :] * std[idx]
    gstar = ystar @ lg.T
    r = ystar - ystar @ lx.T
    r = snap_zero(r - r.mean(axis=1, keepdims=True), data.y)
    sig_star = np.sqrt(np.maximum(0.0, (r * r) @ lsig.T))
    dev = snap_zero(gstar - np.asarray(est.ghat)[None, :], data.y)
    t = guarded_ratio(np.abs(dev), np.asarray(est.scale)[None, :] * sig_star)
    return BootstrapEnsemble(t, dev, np.mean(sig_star**2, axis=1), _seed_key(seed))


def pi_hat(ens: BootstrapEnsemble, x_index=None, alpha: float = 0.05):
    """Bootstrap coverage estimate: fraction of replicates with ``T_b(x) <= z_{1-alpha/2}``."""
    t = ens.tstat if x_index is None else ens.tstat[:, x_index]
    return np.mean(t <= z_crit(alpha), axis=0)


def solve_level(tstat: np.ndarray, alpha0: float) -> np.ndarray:
    """Per-column level beta with ``pi_hat(beta) >= 1 - alpha0`` from a ``B x N`` T matrix.

    ``q`` is the order statistic of rank ``ceil((1 - alpha0)(B + 1))`` and
    ``beta = 2 (1 - Phi(q))``. beta is nudged down by ulps if rounding would put
    ``z_{1-beta/2}`` below ``q``, keeping the coverage inequality exact.
    """
    t = np.atleast_2d(tstat)
    B = t.shape[0]
    k = upper_rank(1.0 - alpha0, B + 1)
    k = min(k, B)
    q = np.sort(t, axis=0)[k - 1]
    beta = two_sided_level(q)
    for _ in range(64):
        short = z_crit(beta) < q
        if not np.any(short):
            break
        beta = np.where(short, np.nextafter(beta, 0.0), beta)
    return beta


def beta_hat(ens: BootstrapEnsemble, x_index=None, alpha0: float = 0.05):
    if not 0.0 < alpha0 < 1.0:
        raise ValueError("alpha0 must lie in (0, 1)")
    t = ens.tstat if x_index is None else ens.tstat[:, np.atleast_1d(x_index)]
    beta = solve_level(t, alpha0)
    return float(beta[0]) if np.isscalar(x_index) or isinstance(x_index, (int, np.integer)) else beta


def xi_quantile(values, xi: float) -> float:
    """Lower empirical xi-quantile: the order statistic of rank ``ceil(xi N)``."""
    if not 0.0 < xi <= 0.5:
        raise ValueError(f"xi must lie in (0, 1/2], got {xi}")
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[upper_rank(xi, v.size) - 1])


def calibrate(ens: BootstrapEnsemble, grid, alpha0: float = 0.05, xi: float = 0.1) -> CalibrationProfile:
    b = beta_hat(ens, None, alpha0)
    return CalibrationProfile(np.asarray(grid), b, xi_quantile(b, xi), alpha0, xi, ens.tstat)


def final_band(est: CurveEstimate, profile: CalibrationProfile) -> BandResult:
    if len(profile.grid) != len(est.grid) or not np.array_equal(profile.grid, est.grid):
        raise ValueError("profile and estimate were computed on different grids")
    return build_naive_band(est, profile.alpha_hat_xi)


def hetero_estimate(data: Dataset, est: CurveEstimate, h_sigma: float | None = None):
    """Attach a smoothed sigma(x) to ``est``; returns the new estimate and sigma at the design points."""
    h_sigma = est.bandwidth if h_sigma is None else h_sigma
    lx = local_linear_weights(data.x, est.bandwidth, est.kernel, data.x)
    resid = Residuals.from_fit(data.y, lx @ data.y)
    sig_grid = hetero_scale(data, resid, h_sigma, est.kernel, est.grid)
    sig_x = hetero_scale(data, resid, h_sigma, est.kernel, data.x)
    new = CurveEstimate(
        est.grid, est.ghat, est.scale, residual_variance(resid), est.bandwidth, est.kernel,
        sigma_grid=sig_grid, variance=est.variance,
    )
    return new, sig_x


def calibrated_band(
    data: Dataset,
    h: float,
    grid,
    alpha0: float = 0.05,
    xi: float = 0.1,
    B: int = 999,
    seed=0,
    kernel: Kernel | str = EPANECHNIKOV,
    variance: str = "rice",
    hetero: bool = False,
    workers: int = 1,
):
    """Steps one to six end to end. Returns ``(band, profile, estimate, ensemble)``."""
    est = fit_curve(data, h, grid, kernel, variance)
    if hetero:
        est, sig_x = hetero_estimate(data, est)
        ens = make_hetero_bootstrap(data, est, sig_x, B, seed, workers=workers)
    else:
        ens = make_residual_bootstrap(data, est, B, seed, workers=workers)
    prof = calibrate(ens, est.grid, alpha0, xi)
    return final_band(est, prof), prof, est, ens
