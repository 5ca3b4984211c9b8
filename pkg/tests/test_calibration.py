import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from bandforge.calibration import (
    BootstrapEnsemble,
    beta_hat,
    calibrate,
    calibrated_band,
    final_band,
    hetero_estimate,
    make_hetero_bootstrap,
    make_residual_bootstrap,
    pi_hat,
    solve_level,
    upper_rank,
    xi_quantile,
)
from bandforge.errors import ZeroScale
from bandforge.estimators import Dataset, fit_curve
from bandforge.naive import build_naive_band, z_crit
from bandforge.simulation import StudyConfig, generate_dataset

import oracles

X5 = np.array([-0.9, -0.35, 0.05, 0.4, 0.85])
Y5 = np.array([0.3, -0.2, 0.9, 0.1, 0.6])
GRID5 = np.array([-0.5, 0.0, 0.3, 0.6])
H5 = 1.7


def ens_from(t):
    t = np.asarray(t, dtype=float)
    return BootstrapEnsemble(t, t, np.ones(t.shape[0]), (0,))


def test_upper_rank():
    assert upper_rank(0.95, 20) == 19
    assert upper_rank(0.95, 100) == 95
    assert upper_rank(0.1, 10) == 1
    assert upper_rank(0.0, 10) == 1
    assert upper_rank(1.0, 10) == 10


# --- bootstrap ensemble ----------------------------------------------------

def test_residual_bootstrap_matches_straight_line_trace():
    d = Dataset(X5, Y5)
    est = fit_curve(d, H5, GRID5)
    ens = make_residual_bootstrap(d, est, 2, seed=11)
    prof = calibrate(ens, GRID5, 0.05, 0.1)
    ref = oracles.residual_bootstrap_trace(list(X5), list(Y5), H5, list(GRID5), 2, 11)
    np.testing.assert_allclose(est.ghat, ref["ghat"], rtol=1e-12)
    np.testing.assert_allclose(est.scale, ref["scale"], rtol=1e-12)
    np.testing.assert_allclose(ens.tstat, ref["T"], rtol=1e-12)
    np.testing.assert_allclose(prof.beta_hat, ref["beta"], rtol=1e-10)
    assert prof.alpha_hat_xi == pytest.approx(ref["alpha_hat"], rel=1e-10)


def test_hetero_bootstrap_matches_straight_line_trace():
    d = Dataset(X5, Y5)
    est = fit_curve(d, H5, GRID5)
    est_h, sig_x = hetero_estimate(d, est)
    ens = make_hetero_bootstrap(d, est_h, sig_x, 2, seed=5)
    ref = oracles.hetero_bootstrap_trace(list(X5), list(Y5), H5, list(GRID5), 2, 5)
    np.testing.assert_allclose(sig_x, ref["sigma_x"], rtol=1e-12)
    np.testing.assert_allclose(ens.tstat, ref["T"], rtol=1e-10)


def test_zero_residuals_give_zero_t():
    x = np.linspace(-1, 1, 15)
    for y in (np.full(15, 3.0), 2 * x - 1):
        d = Dataset(x, y)
        est = fit_curve(d, 0.6, np.linspace(-0.9, 0.9, 7), variance="residual")
        ens = make_residual_bootstrap(d, est, 9, 0)
        assert np.all(ens.tstat == 0)
        assert np.all(ens.sigma2star == 0)
        assert np.all(calibrate(ens, est.grid).beta_hat == 1.0)
        est_h, sig_x = hetero_estimate(d, est)
        assert np.all(make_hetero_bootstrap(d, est_h, sig_x, 9, 0).tstat == 0)


def test_hetero_constant_sigma_reproduces_homoscedastic_draws():
    d = generate_dataset(StudyConfig(g_index=3), 4)
    est = fit_curve(d, 0.35, StudyConfig().grid, variance="residual")
    c = math.sqrt(est.sigma2hat)
    homo = make_residual_bootstrap(d, est, 30, seed=9)
    het = make_hetero_bootstrap(d, est, np.full(d.n, c), 30, seed=9)
    # same resamples onto the same curve; only the sigma* in the denominator differs
    np.testing.assert_allclose(het.dev, homo.dev, rtol=1e-10, atol=1e-13)


def test_hetero_zero_scale_with_residual():
    d = generate_dataset(StudyConfig(g_index=1, n=40), 0)
    est = fit_curve(d, 0.4, np.linspace(-0.8, 0.8, 5))
    sig = np.ones(d.n)
    sig[3] = 0.0
    with pytest.raises(ZeroScale):
        make_hetero_bootstrap(d, est, sig, 5, 0)


def test_bootstrap_deterministic_and_thread_independent():
    d = generate_dataset(StudyConfig(g_index=2), 1)
    est = fit_curve(d, 0.3, StudyConfig().grid)
    a = make_residual_bootstrap(d, est, 50, seed=(7, 3))
    b = make_residual_bootstrap(d, est, 50, seed=(7, 3), workers=4)
    np.testing.assert_array_equal(a.tstat, b.tstat)
    pa, pb = calibrate(a, est.grid), calibrate(b, est.grid)
    np.testing.assert_array_equal(pa.beta_hat, pb.beta_hat)
    assert pa.alpha_hat_xi == pb.alpha_hat_xi
    c = make_residual_bootstrap(d, est, 50, seed=(7, 4))
    assert not np.array_equal(a.tstat, c.tstat)


def test_bootstrap_rejects_zero_b():
    d = Dataset(X5, Y5)
    with pytest.raises(ValueError):
        make_residual_bootstrap(d, fit_curve(d, H5, GRID5), 0, 0)


# --- coverage estimate -----------------------------------------------------

def test_pi_hat_enumeration():
    ens = ens_from([[0.5], [1.0], [2.0], [3.0]])
    assert pi_hat(ens, 0, 0.05) == 0.5
    assert pi_hat(ens, 0, 1e-6) == 1.0
    assert pi_hat(ens, 0, 1.0) == 0.0


def test_beta_all_zero_t():
    assert beta_hat(ens_from(np.zeros((19, 3))), None, 0.05).tolist() == [1.0, 1.0, 1.0]


def test_beta_rank_b19_is_max():
    t = np.random.default_rng(0).exponential(size=(19, 4))
    b = beta_hat(ens_from(t), None, 0.05)
    np.testing.assert_allclose(b, 2 * ndtr(-t.max(axis=0)), rtol=1e-12)
    assert np.all(pi_hat(ens_from(t), None, b) == 1.0)


def test_beta_rank_b99_sort_oracle():
    t = (np.arange(1, 100) / 10.0)[::-1][:, None]
    k = math.ceil(0.95 * 100)
    q = sorted(t[:, 0])[k - 1]
    assert (k, q) == (95, 9.5)
    b = beta_hat(ens_from(t), 0, 0.05)
    assert b == pytest.approx(math.erfc(9.5 / math.sqrt(2)), rel=1e-6)
    assert b < 1e-20


def test_xi_quantile_examples():
    assert xi_quantile(np.full(7, 0.03), 0.2) == 0.03
    assert xi_quantile(np.linspace(0.01, 0.10, 10)[::-1], 0.1) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        xi_quantile([0.1, 0.2], 0.0)
    with pytest.raises(ValueError):
        xi_quantile([0.1, 0.2], 0.6)


t_matrices = st.integers(1, 40).flatmap(
    lambda B: st.lists(
        st.lists(st.floats(0, 8) | st.just(0.0) | st.just(np.inf), min_size=6, max_size=6), min_size=B, max_size=B
    )
)


@settings(max_examples=80, deadline=None)
@given(t_matrices, st.floats(0.001, 0.5))
def test_pi_hat_monotone_and_beta_conservative(rows, alpha0):
    ens = ens_from(rows)
    alphas = np.linspace(0.0, 1.0, 41)
    pis = np.array([pi_hat(ens, None, a) for a in alphas])
    assert np.all(np.diff(pis, axis=0) <= 0)
    b = beta_hat(ens, None, alpha0)
    assert np.all(pi_hat(ens, None, b) >= 1 - alpha0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_alpha_hat_monotone_in_xi_and_quantile_fraction(betas, xi1, xi2):
    lo, hi = sorted((xi1, xi2))
    a_lo, a_hi = xi_quantile(betas, lo), xi_quantile(betas, hi)
    assert a_lo <= a_hi
    assert np.mean(np.asarray(betas) <= a_hi) >= hi - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.001, 0.999))
def test_event_equivalence(seed, alpha):
    d = generate_dataset(StudyConfig(g_index=1, n=30), seed % 50)
    est = fit_curve(d, 0.6, np.linspace(-0.8, 0.8, 9))
    ens = make_residual_bootstrap(d, est, 25, seed)
    z = z_crit(alpha)
    gstar = est.ghat[None, :] + ens.dev
    half = est.scale[None, :] * np.sqrt(ens.sigma2star)[:, None] * z
    literal = (gstar - half <= est.ghat[None, :]) & (est.ghat[None, :] <= gstar + half)
    np.testing.assert_array_equal(literal, ens.tstat <= z)


# --- final band ------------------------------------------------------------

def test_final_band_identities():
    d = generate_dataset(StudyConfig(g_index=3), 2)
    est = fit_curve(d, 0.35, StudyConfig().grid)
    ens = make_residual_bootstrap(d, est, 99, 0)
    prof = calibrate(ens, est.grid, 0.05, 0.1)
    same = prof.__class__(prof.grid, prof.beta_hat, 0.05, 0.05, 0.1)
    naive = build_naive_band(est, 0.05)
    band = final_band(est, same)
    np.testing.assert_array_equal(band.lower, naive.lower)
    np.testing.assert_array_equal(band.upper, naive.upper)
    narrower = prof.__class__(prof.grid, prof.beta_hat, 0.01, 0.05, 0.1)
    assert np.all(final_band(est, narrower).width > naive.width)
    with pytest.raises(ValueError):
        final_band(est, prof.__class__(prof.grid[:-1], prof.beta_hat[:-1], 0.01, 0.05, 0.1))


def test_calibrated_band_composes_steps():
    d = generate_dataset(StudyConfig(g_index=3), 0)
    grid = StudyConfig().grid
    band, prof, est, ens = calibrated_band(d, 0.35, grid, 0.05, 0.1, B=499, seed=3)
    est2 = fit_curve(d, 0.35, grid)
    ens2 = make_residual_bootstrap(d, est2, 499, 3)
    prof2 = calibrate(ens2, grid, 0.05, 0.1)
    band2 = build_naive_band(est2, prof2.alpha_hat_xi)
    np.testing.assert_array_equal(band.lower, band2.lower)
    np.testing.assert_array_equal(band.upper, band2.upper)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=False,
    reason="naive coverage at +-0.5 averages about 0.925, so with 100 sims both points fall below 0.95 in only ~62% of repeats",
)
def test_undercoverage_repair_at_half():
    """Naive coverage at +-0.5 below 0.95 and calibrated above it, in most study repeats."""
    from bandforge.simulation import MethodSpec, run_study

    grid = StudyConfig().grid
    pts = [int(np.argmin(np.abs(grid - v))) for v in (-0.5, 0.5)]
    wins = above = 0
    repeats = 100
    for r in range(repeats):
        cfg = StudyConfig(g_index=1, n_sims=100, xi_list=(0.1,), seed=10_000 + r,
                          methods=(MethodSpec("ours"), MethodSpec("naive")))
        ours, naive = run_study(cfg, threads=4)
        above += all(ours.coverage[j] > naive.coverage[j] for j in pts)
        wins += all(naive.coverage[j] < 0.95 and ours.coverage[j] > naive.coverage[j] for j in pts)
    print(f"calibrated above naive in {above}/{repeats}; full ordering in {wins}/{repeats}")
    assert wins >= 0.8 * repeats
