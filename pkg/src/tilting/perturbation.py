"""
First-order approximations for constraints perturbed away from their
reference values: targets = E[𝔉] + eps * delta.
"""
import numpy as np

from src.errors import IllConditionedError

SINGULAR_CONDITION = 1e12


def _solve(covariance, delta):
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if covariance.shape != (len(delta), len(delta)):
        raise ValueError(f"Covariance of shape {covariance.shape} does not match delta of length {len(delta)}")
    if np.linalg.cond(covariance) > SINGULAR_CONDITION:
        raise IllConditionedError("Constraint covariance is singular; drop redundant constraints")
    return np.linalg.solve(covariance, delta)


def perturbation_multiplier(covariance, delta, eps):
    """Leading-order multiplier -C⁻¹ delta eps."""
    return -_solve(covariance, delta) * float(eps)


def perturbation_kl(covariance, delta, eps):
    """
    Leading-order KL divergence ½ eps² deltaᵀC⁻¹delta.

    The factor ½ comes from the second-order expansion of the cgf; for a
    single Gaussian mean shift of size eps it gives the exact eps²/2.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return 0.5 * float(eps) ** 2 * float(delta @ _solve(covariance, delta))


def perturbed_targets(samples, delta, eps):
    """Targets E[𝔉] + eps delta built from the sample means."""
    return samples.values.mean(axis=0) + float(eps) * np.atleast_1d(np.asarray(delta, dtype=float))
