import logging
import warnings

import numpy as np
from scipy.special import logsumexp, softmax

from src.errors import TiltSaturationWarning

logger = logging.getLogger(__name__)

SATURATION_ESS = 10.0


def effective_sample_size(log_weights):
    """ESS = (Σw)² / Σw² from unnormalised log weights."""
    log_weights = np.asarray(log_weights, dtype=float)
    return float(np.exp(2.0 * logsumexp(log_weights) - logsumexp(2.0 * log_weights)))


def tilt_terms(gaps, a):
    """
    Empirical cgf of the constraint gaps at ``a`` together with the tilted weights.

    Args:
        gaps (ndarray): Shape (n_paths, r), 𝔉 - targets
        a (array-like): Shape (r,)

    Returns:
        tuple: (K, gradient, hessian, weights, ess)
    """
    gaps = np.asarray(gaps, dtype=float)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    exponent = gaps @ a
    shift = np.max(exponent)
    # K(0) = 0 exactly since every shifted term is exp(0) = 1
    value = shift + np.log(np.mean(np.exp(exponent - shift)))
    weights = softmax(exponent)
    gradient = weights @ gaps
    deviation = gaps - gradient[None, :]
    hessian = (deviation * weights[:, None]).T @ deviation
    hessian = 0.5 * (hessian + hessian.T)
    ess = 1.0 / np.sum(weights ** 2)
    return float(value), gradient, hessian, weights, float(ess)


def cgf_eval(samples, a):
    """
    Evaluate K(a) = log mean exp(a·𝔛) with its gradient and Hessian.

    The gradient is the mean of 𝔛 under the weights ∝ exp(a·𝔛) and the Hessian
    the (biased) covariance under the same weights. A tilt that puts
    essentially all mass on fewer than ten samples raises a
    TiltSaturationWarning.

    Args:
        samples (FunctionalSamples): Constraint samples with targets
        a (array-like): Point of evaluation, shape (r,)

    Returns:
        tuple: (K, gradient, hessian)
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (samples.size,) or not np.all(np.isfinite(a)):
        raise ValueError(f"cgf argument must be a finite vector of length {samples.size}")
    value, gradient, hessian, _, ess = tilt_terms(samples.centered, a)
    if ess < SATURATION_ESS:
        logger.warning("Tilt saturated: effective sample size %.2f", ess)
        warnings.warn(f"Tilt saturated: effective sample size {ess:.2f} < {SATURATION_ESS:g}",
                      TiltSaturationWarning, stacklevel=2)
    return value, gradient, hessian
