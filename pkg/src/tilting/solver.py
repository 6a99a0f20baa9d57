import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

from src.constraints.functionals import sample_moments
from src.errors import (IllConditionedError, InfeasibleTargetError,
                        LowEffectiveSampleWarning, TiltSaturationWarning)
from src.tilting.cgf import SATURATION_ESS, tilt_terms

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
MULTIPLIER_CAP = 1e3
CONDITION_LIMIT = 1e12
LOW_ESS_FRACTION = 0.1
ARMIJO = 1e-4
MAX_HALVINGS = 60


@dataclass(frozen=True)
class TiltSolution:
    """
    Optimal exponential tilt of a sample.

    Attributes:
        eta (ndarray): Multipliers, terminal block then running block
        weights (ndarray): Self-normalised RN weights, summing to one
        kl (float): Empirical KL divergence of the weights
        residual (ndarray): Tilted constraint gap E^Q[𝔉] - targets
        iterations (int): Newton iterations used
        converged (bool): Whether max|residual| reached the tolerance
        ess (float): Effective sample size 1/Σw²
        labels (tuple): Constraint labels
        targets (ndarray): Constraint targets
    """
    eta: object
    weights: object
    kl: float
    residual: object
    iterations: int
    converged: bool
    ess: float
    labels: tuple = ()
    targets: object = None

    @property
    def tilted_means(self):
        return self.residual + self.targets

    def to_dict(self):
        return {
            'eta': [float(v) for v in self.eta],
            'kl': float(self.kl),
            'residual': [float(v) for v in self.residual],
            'iterations': int(self.iterations),
            'converged': bool(self.converged),
            'ess': float(self.ess),
            'labels': list(self.labels),
        }

    def __str__(self):
        lines = [f"Tilt solution ({'converged' if self.converged else 'NOT converged'} "
                 f"after {self.iterations} iterations)"]
        for label, eta, residual in zip(self.labels, self.eta, self.residual):
            lines.append(f"  {label}: eta = {eta:.8g}, residual = {residual:.3e}")
        lines.append(f"  KL divergence: {self.kl:.6g}")
        lines.append(f"  Effective sample size: {self.ess:.1f} of {len(self.weights)}")
        return "\n".join(lines)


def rn_weights(samples, eta):
    """
    Self-normalised RN weights proportional to exp(-eta·𝔛).

    Args:
        samples (FunctionalSamples): Constraint samples with targets
        eta (array-like): Multipliers

    Returns:
        ndarray: Nonnegative weights summing to one
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if not np.all(np.isfinite(eta)):
        raise ValueError("Multipliers must be finite")
    return softmax(-(samples.centered @ eta))


def kl_divergence(weights, n_paths=None):
    """Empirical KL divergence Σ w log(w n) with 0 log 0 = 0."""
    weights = np.asarray(weights, dtype=float)
    n_paths = len(weights) if n_paths is None else int(n_paths)
    return max(0.0, float(np.sum(xlogy(weights, weights * n_paths))))


def dual_kl(samples, eta):
    """
    The dual value -K(-eta) = -log mean exp(-eta·𝔛) on the samples.

    At multipliers that meet the constraints this is the KL divergence of the
    tilted measure; the grid engine's -log ω(0, x0) estimates the same number.

    Returns:
        tuple: (value, delta-method standard error)
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    exponent = -(samples.centered @ eta)
    n_paths = samples.n_paths
    value = -(logsumexp(exponent) - np.log(n_paths))
    scaled = np.exp(exponent - exponent.max())
    standard_error = scaled.std(ddof=1) / (scaled.mean() * np.sqrt(n_paths))
    return float(value), float(standard_error)


def weighted_expectation(weights, values):
    """Σ w_i value_i; ``values`` may carry extra trailing columns."""
    return np.asarray(weights, dtype=float) @ np.asarray(values, dtype=float)


def _check_feasible(samples):
    low = samples.values.min(axis=0)
    high = samples.values.max(axis=0)
    for column, (target, lo, hi) in enumerate(zip(samples.targets, low, high)):
        if not lo < target < hi:
            raise InfeasibleTargetError(
                f"Target {target:.6g} of constraint '{samples.labels[column]}' lies outside the "
                f"open sample range ({lo:.6g}, {hi:.6g}); no equivalent reweighting attains it")


def _diagnose_weights(ess, n_paths):
    if ess < SATURATION_ESS:
        logger.warning("Tilt saturated: effective sample size %.2f", ess)
        warnings.warn(f"Tilt saturated: effective sample size {ess:.2f}",
                      TiltSaturationWarning, stacklevel=3)
    elif ess < LOW_ESS_FRACTION * n_paths:
        logger.warning("Low effective sample size %.1f of %d paths", ess, n_paths)
        warnings.warn(f"Effective sample size {ess:.1f} is below {LOW_ESS_FRACTION:.0%} of {n_paths} paths",
                      LowEffectiveSampleWarning, stacklevel=3)


def solve_multipliers(samples, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, cap=MULTIPLIER_CAP):
    """
    Solve for the multipliers of the minimal-KL reweighting.

    Minimises the convex map a -> K(-a) of the standardised constraint gaps
    by Newton steps with step halving. The solution is converged when the
    tilted gap is below ``tol`` both in standardised and in original units.

    Args:
        samples (FunctionalSamples): Constraint samples with targets
        tol (float): Tolerance on max|residual|
        max_iter (int): Maximum Newton iterations
        cap (float): Bound on |a| in standardised units beyond which the
            targets are declared infeasible

    Returns:
        TiltSolution: Multipliers, weights and diagnostics
    """
    _, covariance = sample_moments(samples)
    _check_feasible(samples)
    scale = np.sqrt(np.diag(covariance))
    gaps = samples.centered / scale[None, :]

    def objective(a):
        return tilt_terms(gaps, -a)

    a = np.zeros(samples.size)
    value, tilted_mean, hessian, weights, ess = objective(a)
    converged = False
    iterations = 0
    while True:
        residual = tilted_mean * scale
        if max(np.max(np.abs(tilted_mean)), np.max(np.abs(residual))) <= tol:
            converged = True
            break
        if iterations >= max_iter:
            logger.warning("Multiplier solve stopped after %d iterations, max|residual| = %.3e",
                           iterations, np.max(np.abs(residual)))
            break

        condition = np.linalg.cond(hessian)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise IllConditionedError(
                f"Tilted covariance has condition number {condition:.3e}; rescale the constraints "
                f"or remove redundant ones")
        # grad of a -> K(-a) is minus the tilted mean
        direction = np.linalg.solve(hessian, tilted_mean)
        slope = -tilted_mean @ direction

        step = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = a + step * direction
            trial = objective(candidate)
            if trial[0] <= value + ARMIJO * step * slope:
                break
            # near the optimum K is flat to rounding; accept a full step that halves the gap
            if step == 1.0 and np.max(np.abs(trial[1])) <= 0.5 * np.max(np.abs(tilted_mean)):
                break
            step *= 0.5
        else:
            logger.debug("Line search stagnated at iteration %d", iterations)
            break

        if np.max(np.abs(candidate)) > cap:
            raise InfeasibleTargetError(
                f"Multipliers exceed the cap {cap:g} in standardised units; the targets are "
                f"at or beyond what an equivalent measure can reach")
        a = candidate
        value, tilted_mean, hessian, weights, ess = trial
        iterations += 1
        logger.debug("Newton iteration %d: K = %.12g, max|gap| = %.3e", iterations, value,
                     np.max(np.abs(tilted_mean)))

    residual = tilted_mean * scale
    if not converged and max(np.max(np.abs(tilted_mean)), np.max(np.abs(residual))) <= tol:
        converged = True
    eta = a / scale
    weights = rn_weights(samples, eta)
    _diagnose_weights(ess, samples.n_paths)
    solution = TiltSolution(
        eta=eta,
        weights=weights,
        kl=kl_divergence(weights, samples.n_paths),
        residual=weighted_expectation(weights, samples.centered),
        iterations=iterations,
        converged=converged,
        ess=ess,
        labels=samples.labels,
        targets=samples.targets,
    )
    logger.info("Multipliers %s (converged=%s, KL=%.6g)", np.array2string(eta, precision=6),
                converged, solution.kl)
    return solution
