"""Equal-tailed percentile bands calibrated by a double bootstrap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .calibration import CalibrationProfile, draw_indices, upper_rank, xi_quantile
from .estimators import CurveEstimate, Dataset, local_linear_weights
from .naive import BandResult
from .variance import Residuals, snap_zero

MAX_WORK = 10**6


@dataclass(frozen=True)
class PercentileBand(BandResult):
    zhat_lo: np.ndarray | None = None
    zhat_hi: np.ndarray | None = None


@dataclass(frozen=True)
class DoubleBootstrapResult:
    profile: CalibrationProfile
    band: PercentileBand
    alphas: np.ndarray  # candidate levels, ascending
    pihat: np.ndarray  # (len(alphas), N) bootstrap coverage


def tail_ranks(alpha: float, B: int) -> tuple[int, int]:
    """1-based ranks of the ``alpha/2`` and ``1 - alpha/2`` order statistics among B draws."""
    lo = min(upper_rank(alpha / 2.0, B + 1), B)
    hi = min(upper_rank(1.0 - alpha / 2.0, B + 1), B)
    return lo, hi


def percentile_critical_values(dev, scale, betas) -> np.ndarray:
    """``zhat_beta(x)``: empirical beta-quantiles of ``dev / scale`` along the replicate axis.

    ``dev`` is ``B x N`` (signed deviations of ghat* from ghat). Returns an array
    of shape ``(len(betas), N)``.
    """
    dev = np.atleast_2d(np.asarray(dev, dtype=float))
    B = dev.shape[0]
    srt = np.sort(dev / np.asarray(scale, dtype=float)[None, :], axis=0)
    ranks = [min(upper_rank(b, B + 1), B) for b in np.atleast_1d(betas)]
    return srt[np.asarray(ranks) - 1]


def candidate_levels(B2: int) -> np.ndarray:
    # every distinct pair of tail ranks is reached at some j / (B2 + 1)
    return np.arange(1, B2 + 2) / (B2 + 1.0)


def double_bootstrap_calibrate(
    data: Dataset,
    est: CurveEstimate,
    B1: int,
    B2: int,
    alpha0: float = 0.05,
    xi: float = 0.1,
    seed=0,
    allow_large: bool = False,
) -> DoubleBootstrapResult:
    """Calibrate the percentile band's level with a second bootstrap layer.

    First-level replicate b uses substream ``(seed, BOOT, b)``; its B2 inner
    resamples all come from substream ``(seed, BOOT2, b)``. The coverage event
    checks whether ``ghat(x)`` lies in the bootstrap-world band built around
    ``ghat*_b`` from the inner critical values. ``beta_hat(x)`` is the largest
    candidate level whose estimated coverage is at least ``1 - alpha0`` (the
    smallest candidate when none is).
    """
    if B1 < 1 or B2 < 1:
        raise ValueError("B1 and B2 must be at least 1")
    if B1 * B2 > MAX_WORK and not allow_large:
        raise ValueError(f"B1*B2 = {B1 * B2} exceeds {MAX_WORK}; pass allow_large=True to override")
    h, kern = est.bandwidth, est.kernel
    n = data.n
    s = np.asarray(est.scale, dtype=float)
    ghat = np.asarray(est.ghat, dtype=float)
    lg = local_linear_weights(data.x, h, kern, est.grid)
    lx = local_linear_weights(data.x, h, kern, data.x)
    ghat_x = lx @ data.y
    eps = Residuals.from_fit(data.y, ghat_x).centered

    idx1 = draw_indices(seed, rngmod.BOOT, B1, n)
    ystar = ghat_x[None, :] + eps[idx1]
    gstar = ystar @ lg.T
    gstar_x = ystar @ lx.T

    alphas = candidate_levels(B2)
    ranks = np.array([tail_ranks(a, B2) for a in alphas]) - 1
    covered = np.zeros((alphas.size, s.size))
    for b in range(B1):
        e1 = ystar[b] - gstar_x[b]
        e1 = snap_zero(e1 - e1.mean(), data.y)
        idx2 = rngmod.substream(seed, rngmod.BOOT2, b).integers(0, n, size=(B2, n))
        ystar2 = gstar_x[b][None, :] + e1[idx2]
        d2 = np.sort(snap_zero(ystar2 @ lg.T - gstar[b][None, :], data.y) / s[None, :], axis=0)
        target = snap_zero(ghat - gstar[b], data.y) / s
        covered += (d2[ranks[:, 0]] <= target) & (target <= d2[ranks[:, 1]])
    pihat = covered / B1

    ok = pihat >= 1.0 - alpha0 - 1e-12
    # pihat is nonincreasing in alpha, so the last admissible candidate is the largest
    last = np.where(ok.any(axis=0), alphas.size - 1 - np.argmax(ok[::-1], axis=0), 0)
    beta = alphas[last]
    alpha_hat = xi_quantile(beta, xi)

    z = percentile_critical_values(snap_zero(gstar - ghat[None, :], data.y), s, [alpha_hat / 2.0, 1.0 - alpha_hat / 2.0])
    lo, hi = z
    band = PercentileBand(
        np.asarray(est.grid), ghat, ghat + s * lo, ghat + s * hi, float(alpha_hat), "percentile", lo, hi
    )
    prof = CalibrationProfile(np.asarray(est.grid), beta, alpha_hat, alpha0, xi)
    return DoubleBootstrapResult(prof, band, alphas, pihat)
