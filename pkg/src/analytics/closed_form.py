"""
Analytic solutions of the minimal-KL problem for a few tractable settings.

Multipliers follow the same convention as the Monte Carlo solver: the RN
density is proportional to exp(-eta·(𝔉 - targets)).
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.errors import DomainError
from src.model.process import TiltFields

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200


def _open_unit(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class TwoVarSpec:
    """
    Two VaR constraints Q(X_T <= q1) = beta1 and Q(X_T <= q2) = beta2.

    Attributes:
        p1 (float): P(X_T <= q1)
        p2 (float): P(q1 < X_T <= q2)
        beta1 (float): Target level at q1
        beta2 (float): Target level at q2
    """
    p1: float
    p2: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if not (self.p1 > 0 and self.p2 > 0 and 1.0 - self.p1 - self.p2 > 0):
            raise DomainError(f"Need p1 > 0, p2 > 0 and p1 + p2 < 1, got p1={self.p1}, p2={self.p2}")
        if not 0.0 < self.beta1 < self.beta2 < 1.0:
            raise DomainError(f"Need 0 < beta1 < beta2 < 1, got {self.beta1}, {self.beta2}")

    @property
    def p3(self):
        return 1.0 - self.p1 - self.p2

    @classmethod
    def from_samples(cls, samples, q1, q2, beta1, beta2):
        """Empirical probabilities of a 1-D sample at the two thresholds."""
        samples = np.asarray(samples, dtype=float)
        p1 = float(np.mean(samples <= q1))
        return cls(p1, float(np.mean(samples <= q2)) - p1, beta1, beta2)


@dataclass(frozen=True)
class TwoVarSolution:
    """
    Closed-form solution for interval indicators 1{X <= q1}, 1{q1 < X <= q2}.

    ``weight_low``, ``weight_mid`` and ``weight_high`` are the RN density on
    the three pieces; ``normalizer`` is the constant C at the optimum.
    """
    eta1: float
    eta2: float
    weight_low: float
    weight_mid: float
    weight_high: float
    normalizer: float

    @property
    def cumulative_multipliers(self):
        """Multipliers for the cumulative indicators 1{X <= q1}, 1{X <= q2}."""
        return self.eta1 - self.eta2, self.eta2


def two_var_solution(spec):
    """
    Multipliers and piecewise RN density for two VaR constraints.

    Args:
        spec (TwoVarSpec): Reference probabilities and targets

    Returns:
        TwoVarSolution: Multipliers, piece weights and normalizer
    """
    high = (1.0 - spec.beta2) / spec.p3
    return TwoVarSolution(
        eta1=float(np.log(spec.p1 / spec.beta1 * high)),
        eta2=float(np.log(spec.p2 / (spec.beta2 - spec.beta1) * high)),
        weight_low=spec.beta1 / spec.p1,
        weight_mid=(spec.beta2 - spec.beta1) / spec.p2,
        weight_high=high,
        normalizer=spec.p3 / (1.0 - spec.beta2),
    )


def pinned_multiplier(p_b, q):
    """
    Multiplier forcing Q(X_T in B) = q for the constraint f = 1_B.

    With weights exp(-eta (1_B - q)) the binding condition gives
    eta = log[(p_b / q) (1 - q) / (1 - p_b)]; it is negative when the
    probability of B is raised and diverges to -inf as q -> 1.
    """
    _open_unit("p_b", p_b)
    _open_unit("q", q)
    return float(np.log(p_b / q) + np.log1p(-q) - np.log1p(-p_b))


def pinned_density(p_b, q):
    """RN density (on B, off B) of the measure with Q(B) = q."""
    _open_unit("p_b", p_b)
    _open_unit("q", q)
    return q / p_b, (1.0 - q) / (1.0 - p_b)


def multiplier_sign(expected, target):
    """Sign of the multiplier of a single constraint: sgn(E[f] - c)."""
    return int(np.sign(expected - target))


@dataclass(frozen=True)
class BrownianVarianceSolution:
    """
    Tilt of a driftless Brownian motion to zero mean and variance kappa T.

    Under the optimal measure the state mean-reverts to zero with drift
    -a(t) x, a(t) = 2 eta2 / (2 eta2 (T - t) + 1).
    """
    kappa: float
    horizon: float
    eta1: float
    eta2: float
    sigma: float = 1.0

    def ou_drift(self, t):
        """Mean-reversion speed a(t)."""
        t = np.asarray(t, dtype=float)
        return 2.0 * self.eta2 / (2.0 * self.eta2 * (self.horizon - t) + 1.0)

    def drift_coefficient(self, t):
        """Coefficient of x in the drift under the optimal measure, -a(t)."""
        return -self.ou_drift(t)

    def lambda_field(self, t, x):
        """Drift control λ(t, x) = (2 eta2 x + eta1) / (2 eta2 (T - t) + 1), for unit volatility."""
        x = np.asarray(x, dtype=float)
        return (2.0 * self.eta2 * x + self.eta1) / (2.0 * self.eta2 * (self.horizon - t) + 1.0)

    def tilt_fields(self):
        """TiltFields for simulating the optimal measure of a unit-volatility Brownian motion."""
        return TiltFields(lambda_field=lambda t, x: self.lambda_field(t, x[:, :1]))


def brownian_variance_solution(kappa, horizon):
    """
    Closed form for the constraints E[X_T] = 0, E[X_T²] = kappa T on a
    standard Brownian motion.

    kappa = 1 returns the zero tilt.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if not horizon > 0:
        raise DomainError(f"Horizon must be positive, got {horizon}")
    if kappa == 1.0:
        return BrownianVarianceSolution(kappa, horizon, 0.0, 0.0)
    eta2 = (1.0 - kappa) / (2.0 * kappa * horizon)
    return BrownianVarianceSolution(kappa, horizon, 0.0, eta2)


@dataclass(frozen=True)
class IndependentIncrementModel:
    """
    X_T = x0 + A + Σ W_T + compound Poisson with rate ell and N(a, b²) marks,
    compensated under the reference measure.

    Attributes:
        x0 (float): Initial state
        drift_total (float): Deterministic part A = ∫α dt
        variance (float): Diffusive variance Σ² = ∫σ² dt
        ell (float): Jump rate
        mark_mean (float): a
        mark_std (float): b
        horizon (float): T
        sigma (float): Diffusion coefficient used for the drift control
    """
    x0: float
    drift_total: float
    variance: float
    ell: float
    mark_mean: float
    mark_std: float
    horizon: float
    sigma: float = 1.0


def indep_increment_mean_residual(x0, A, Sigma2, ell, a, b, T, c, eta):
    """
    Tilted mean of X_T minus the target c for the independent-increment model.

    Under the tilt the jumps arrive at rate ell e^{-a eta + eta² b²/2} with
    marks N(a - eta b², b²), while the reference compensator ell a T stays
    in the dynamics. For a = 0 this is
    x0 + A - eta Σ² - ell T eta b² e^{eta² b²/2} - c.
    """
    factor = np.exp(-a * eta + 0.5 * eta ** 2 * b ** 2)
    return float(x0 + A - eta * Sigma2 + ell * T * (a - eta * b ** 2) * factor - ell * a * T - c)


def _residual_for(model, c):
    def residual(eta):
        return indep_increment_mean_residual(model.x0, model.drift_total, model.variance, model.ell,
                                             model.mark_mean, model.mark_std, model.horizon, c, eta)
    return residual


def solve_indep_increment_multiplier(model, c, tol=ROOT_TOL):
    """
    Root of the strictly decreasing mean residual by bracket doubling and bisection.

    Args:
        model (IndependentIncrementModel): Reference model
        c (float): Target mean of X_T
        tol (float): Bracket width at which bisection stops

    Returns:
        float: The multiplier eta*
    """
    residual = _residual_for(model, c)
    if model.variance <= 0 and (model.ell <= 0 or model.mark_std <= 0):
        raise DomainError("The terminal mean cannot be moved without diffusion or random jumps")
    at_zero = residual(0.0)
    if at_zero == 0.0:
        return 0.0
    direction = 1.0 if at_zero > 0 else -1.0
    low, high = 0.0, direction
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if np.sign(residual(high)) != np.sign(at_zero):
            break
        low, high = high, 2.0 * high
    else:
        raise DomainError(f"Could not bracket the multiplier for target {c}")
    if low > high:
        low, high = high, low
    while high - low > tol * max(1.0, abs(low)):
        middle = 0.5 * (low + high)
        value = residual(middle)
        if value == 0.0:
            return middle
        if value > 0:
            low = middle
        else:
            high = middle
    root = 0.5 * (low + high)
    logger.debug("Independent-increment multiplier %.12g (residual %.3e)", root, residual(root))
    return root


def indep_increment_tilt(model, eta, component=0):
    """TiltFields realising the optimal measure: λ = eta σ and mark tilt eta on ``component``."""
    control = float(eta) * model.sigma
    return TiltFields(lambda_field=lambda t, x: np.full((x.shape[0], 1), control),
                      mark_tilts=((component, float(eta)),))
