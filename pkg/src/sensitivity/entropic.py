"""
Entropic derivatives: first-order change of an expectation or a distortion
risk measure when the constraints move from their reference values along
delta with the minimal-KL reweighting.

Covariances use the 1/N normalisation throughout.
"""
import logging
import warnings

import numpy as np

from src.errors import DiscretenessWarning, IllConditionedError

logger = logging.getLogger(__name__)

MIN_DISTINCT = 100
SINGULAR_CONDITION = 1e12


def _direction(functionals, delta):
    values = functionals.values
    centered = values - values.mean(axis=0)
    covariance = np.atleast_2d(centered.T @ centered / len(values))
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if delta.shape != (functionals.size,):
        raise ValueError(f"delta must have length {functionals.size}, got shape {delta.shape}")
    if np.linalg.cond(covariance) > SINGULAR_CONDITION:
        raise IllConditionedError("Constraint covariance is singular; drop redundant constraints")
    return centered, np.linalg.solve(covariance, delta)


def entropic_derivative(functionals, target_samples, delta):
    """
    C⁻¹delta · Cov(𝔉, ℓ).

    Args:
        functionals (FunctionalSamples): Constraint functionals under the reference measure
        target_samples (array-like): ℓ on the same paths
        delta (array-like): Direction of the constraint perturbation

    Returns:
        float: The derivative of E[ℓ]
    """
    centered, direction = _direction(functionals, delta)
    target = np.asarray(target_samples, dtype=float)
    covariance = centered.T @ (target - target.mean()) / len(target)
    return float(direction @ covariance)


def distortion_entropic_derivative(functionals, target_samples, delta, gamma):
    """
    -C⁻¹delta · ∫ E[(𝔉 - E𝔉) 1{ℓ <= y}] γ(F_ℓ(y)) dy on the empirical measure.

    Between consecutive order statistics y_(i) < y_(i+1) the empirical
    distribution function equals i/N and the inner expectation equals the
    running sum S_i = (1/N) Σ_{k<=i} (𝔉 - E𝔉)_(k). Samples with fewer than
    100 distinct values raise a DiscretenessWarning.
    """
    centered, direction = _direction(functionals, delta)
    target = np.asarray(target_samples, dtype=float)
    n = len(target)
    distinct = len(np.unique(target))
    if distinct < MIN_DISTINCT:
        logger.warning("Target sample has only %d distinct values", distinct)
        warnings.warn(f"Target sample has only {distinct} distinct values; the distortion "
                      f"derivative assumes a continuous distribution", DiscretenessWarning, stacklevel=2)
    order = np.argsort(target, kind="stable")
    ordered = target[order]
    running = np.cumsum(centered[order], axis=0)[:-1] / n
    gaps = np.diff(ordered)
    levels = np.arange(1, n) / n
    integral = (running * (gamma(levels) * gaps)[:, None]).sum(axis=0)
    return float(-direction @ integral)
