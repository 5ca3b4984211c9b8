"""Bootstrap-calibrated pointwise confidence bands for regression means and densities."""

from .bandwidth import BandwidthResult, cv_bandwidth, plug_in_bandwidth
from .calibration import (
    BootstrapEnsemble,
    CalibrationProfile,
    beta_hat,
    calibrate,
    calibrated_band,
    final_band,
    make_hetero_bootstrap,
    make_residual_bootstrap,
    pi_hat,
)
from .estimators import CurveEstimate, Dataset, fit_curve, kde, local_linear_fit, local_poly_deriv2
from .kernels import BIWEIGHT, EPANECHNIKOV, GAUSSIAN, Kernel, get_kernel
from .naive import BandResult, asymptotic_coverage, build_naive_band

__version__ = "0.1.0"
