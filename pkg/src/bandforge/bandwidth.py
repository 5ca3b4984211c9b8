"""Bandwidth selection for the local linear estimator: direct plug-in and leave-one-out CV."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AllDegenerate, DegenerateFit, DegenerateWindow
from .estimators import EPS_DEN, Dataset, local_linear_weights
from .kernels import EPANECHNIKOV, Kernel, get_kernel

log = logging.getLogger(__name__)

EPS_THETA = 1e-12


@dataclass
class BandwidthResult:
    h: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"bandwidth must be positive and finite, got {self.h}")


def max_blocks(n: int) -> int:
    return max(1, min(5, n // 20))


def choose_blocks(x, y) -> tuple[int, list[float]]:
    """Block count minimising Mallows' Cp over ``1..max_blocks(n)``.

    ``Cp(N) = RSS(N) / (RSS(Nmax) / (n - 5 Nmax)) - (n - 10 N)``.
    """
    n = len(x)
    nmax = max_blocks(n)
    rss = []
    for nb in range(1, nmax + 1):
        fitted, _ = blocked_quartic(x, y, nb)
        rss.append(float(np.sum((np.asarray(y) - fitted) ** 2)))
    denom = rss[-1] / (n - 5 * nmax)
    if denom <= 0:
        return 1, [0.0] * nmax
    cp = [r / denom - (n - 10 * (k + 1)) for k, r in enumerate(rss)]
    return int(np.argmin(cp)) + 1, cp


def blocked_quartic(x, y, blocks: int):
    """Fit a quartic in each of ``blocks`` equal-count blocks of the sorted design.

    Returns fitted values and fitted second derivatives at the design points
    (in the input order).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x, kind="stable")
    fitted = np.empty_like(y)
    curv = np.empty_like(y)
    for idx in np.array_split(order, blocks):
        p = np.polynomial.Polynomial.fit(x[idx], y[idx], 4)
        fitted[idx] = p(x[idx])
        curv[idx] = p.deriv(2)(x[idx])
    return fitted, curv


def plug_in_bandwidth(data: Dataset, kernel: Kernel | str = EPANECHNIKOV) -> BandwidthResult:
    """Direct plug-in bandwidth for local linear regression.

    ``h = [C(K) sigma2 |supp| / (n theta22)]**(1/5)`` with sigma2 the mean
    squared centred residual and theta22 the mean squared second derivative,
    both from a blocked quartic pilot fit whose block count is chosen by
    Mallows' Cp. When the pilot finds no curvature
    the rule ``|supp| * n**(-1/5)`` is returned and ``diagnostics["fallback"]``
    is set.
    """
    kernel = get_kernel(kernel)
    n = data.n
    if n < 20:
        raise ValueError(f"plug-in bandwidth needs n >= 20, got {n}")
    nb, cp = choose_blocks(data.x, data.y)
    fitted, curv = blocked_quartic(data.x, data.y, nb)
    e = data.y - fitted
    e = e - e.mean()
    sigma2 = float(np.mean(e * e))
    theta22 = float(np.mean(curv * curv))
    support = float(np.ptp(data.x))
    diag = {"sigma2": sigma2, "theta22": theta22, "blocks": nb, "cp": cp, "support": support, "fallback": False}

    # curvature is negligible relative to the response scale
    yscale = float(np.var(data.y)) + sigma2
    try:
        if support <= 0:
            raise DegenerateFit("design points are all equal")
        if theta22 * support**4 <= EPS_THETA * yscale or theta22 == 0.0:
            raise DegenerateFit(f"pilot curvature {theta22:.3g} is negligible")
    except DegenerateFit as exc:
        log.info("plug-in fallback: %s", exc)
        diag["fallback"] = True
        diag["reason"] = str(exc)
        base = support if support > 0 else 1.0
        return BandwidthResult(base * n ** (-0.2), "plugin", diag)

    h = (kernel.plugin_constant * sigma2 * support / (n * theta22)) ** 0.2
    return BandwidthResult(float(h), "plugin", diag)


def loo_cv_score(x, y, h: float, kernel: Kernel | str) -> float:
    """Leave-one-out squared prediction error of the local linear fit.

    Uses the exact deletion identity ``(y_i - ghat(X_i)) / (1 - L_ii)``. Returns
    ``inf`` when some deleted window is degenerate.
    """
    kernel = get_kernel(kernel)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    try:
        w = local_linear_weights(x, h, kernel, x)
    except DegenerateWindow:
        return np.inf
    # deleting point i only lowers S0 by K(0)/(n h); S1, S2 are unchanged
    u = (x[:, None] - x[None, :]) / h
    k = kernel(u) / h
    s0 = k.mean(axis=1) - float(kernel(0.0)) / (n * h)
    s1 = (u * k).mean(axis=1)
    s2 = (u * u * k).mean(axis=1)
    den = s0 * s2 - s1 * s1
    if np.any(~(den > EPS_DEN * s0 * s2)) or np.any(s0 <= 0):
        return np.inf
    lev = np.diag(w)
    r = (y - w @ y) / (1.0 - lev)
    return float(np.mean(r * r))


def default_h_grid(x, size: int = 20) -> np.ndarray:
    x = np.sort(np.asarray(x, dtype=float))
    span = float(x[-1] - x[0])
    lo = max(2.0 * float(np.max(np.diff(x))), span / x.size)
    return np.geomspace(lo, span, size)


def cv_bandwidth(data: Dataset, kernel: Kernel | str = EPANECHNIKOV, h_grid=None) -> BandwidthResult:
    """Grid search for the leave-one-out CV bandwidth; ties go to the smallest h."""
    kernel = get_kernel(kernel)
    if h_grid is None:
        h_grid = default_h_grid(data.x)
    h_grid = np.sort(np.atleast_1d(np.asarray(h_grid, dtype=float)))
    if h_grid.size == 0 or np.any(h_grid <= 0):
        raise ValueError("h_grid must be nonempty and positive")
    scores = np.array([loo_cv_score(data.x, data.y, h, kernel) for h in h_grid])
    finite = np.isfinite(scores)
    if not np.any(finite):
        raise AllDegenerate(f"all {h_grid.size} candidate bandwidths give degenerate windows")
    best = scores[finite].min()
    tol = 1e-9 * abs(best) + 1e-12 * float(np.mean((data.y - data.y.mean()) ** 2))
    j = int(np.argmax(finite & (scores <= best + tol)))
    return BandwidthResult(float(h_grid[j]), "cv", {"h_grid": h_grid.tolist(), "cv": scores.tolist()})


def admissible_bandwidth(x, points, h: float, kernel: Kernel | str = EPANECHNIKOV, margin: float = 1.01) -> float:
    """Smallest bandwidth ``>= h`` whose window at every point holds two distinct design points.

    For a compact kernel the window at ``p`` is ``|X - p| < h * support``; if
    some window is short of two distinct points, ``h`` is widened to ``margin``
    times the distance to the second-nearest distinct design point. Unbounded
    kernels are returned unchanged.
    """
    kernel = get_kernel(kernel)
    if not np.isfinite(kernel.support):
        return float(h)
    xs = np.unique(np.asarray(x, dtype=float))
    if xs.size < 2:
        raise DegenerateFit("need two distinct design points")
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    dist = np.sort(np.abs(pts[:, None] - xs[None, :]), axis=1)[:, 1]
    need = margin * float(dist.max()) / kernel.support
    return float(max(h, need))


def select_bandwidth(data: Dataset, rule, kernel: Kernel | str = EPANECHNIKOV) -> BandwidthResult:
    """Dispatch on ``"plugin"``, ``"cv"`` or a numeric bandwidth."""
    if isinstance(rule, str):
        if rule == "plugin":
            return plug_in_bandwidth(data, kernel)
        if rule == "cv":
            return cv_bandwidth(data, kernel)
        rule = float(rule)
    return BandwidthResult(float(rule), "fixed")
