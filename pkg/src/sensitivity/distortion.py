import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from src.errors import DomainError

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-6
CUMULATIVE_NODES = 20001


@dataclass(frozen=True)
class DistortionWeight:
    """
    Weight function γ of a distortion risk measure ρ(Y) = ∫ F⁻¹(u) γ(u) du.

    Args:
        gamma (callable): Vectorised γ on [0, 1], nonnegative with unit integral
        name (str): Display name
        cumulative (callable, optional): Γ(u) = ∫_0^u γ; built numerically when omitted
        breakpoints (tuple): Discontinuities of γ, passed to the quadrature
    """
    gamma: object
    name: str = "custom"
    cumulative: object = None
    breakpoints: tuple = ()

    def __post_init__(self):
        probe = np.asarray(self.gamma(np.linspace(0.0, 1.0, 1001)), dtype=float)
        if probe.shape != (1001,) or not np.all(np.isfinite(probe)) or np.any(probe < 0):
            raise DomainError(f"Distortion weight '{self.name}' must be finite and nonnegative on [0, 1]")
        total, _ = integrate.quad(lambda u: float(self.gamma(np.array([u]))[0]), 0.0, 1.0,
                                  points=self.breakpoints or None, limit=200)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"Distortion weight '{self.name}' integrates to {total:.8g}, not 1")
        if self.cumulative is None:
            nodes = np.linspace(0.0, 1.0, CUMULATIVE_NODES)
            values = integrate.cumulative_trapezoid(self.gamma(nodes), nodes, initial=0.0)
            values /= values[-1]
            object.__setattr__(self, "cumulative", lambda u: np.interp(u, nodes, values))

    def __call__(self, u):
        return np.asarray(self.gamma(np.asarray(u, dtype=float)), dtype=float)

    @classmethod
    def tvar(cls, beta):
        """Tail-Value-at-Risk at level beta: γ(u) = 1{u >= beta} / (1 - beta)."""
        if not 0.0 <= beta < 1.0:
            raise DomainError(f"TVaR level must lie in [0, 1), got {beta}")
        return cls(
            gamma=lambda u: np.where(np.asarray(u) >= beta, 1.0 / (1.0 - beta), 0.0),
            name=f"TVaR({beta:g})",
            cumulative=lambda u: np.maximum(np.asarray(u, dtype=float) - beta, 0.0) / (1.0 - beta),
            breakpoints=(beta,) if beta > 0 else ())

    @classmethod
    def mean(cls):
        return cls(gamma=lambda u: np.ones_like(np.asarray(u, dtype=float)), name="mean",
                   cumulative=lambda u: np.asarray(u, dtype=float))


def distortion_value(samples, gamma, weights=None):
    """
    Empirical distortion risk measure Σ x_(i) [Γ(u_i) - Γ(u_{i-1})].

    The u_i are the cumulative (weighted) masses of the sorted samples, so
    the quantile function is the left-continuous inverse of the empirical
    distribution function.

    Args:
        samples (array-like): Realisations of Y
        gamma (DistortionWeight): Weight function
        weights (array-like, optional): Probability weights of the samples

    Returns:
        float: ρ_γ(Y)
    """
    samples = np.asarray(samples, dtype=float)
    order = np.argsort(samples, kind="stable")
    ordered = samples[order]
    if weights is None:
        levels = np.arange(len(samples) + 1) / len(samples)
    else:
        weights = np.asarray(weights, dtype=float)
        levels = np.concatenate([[0.0], np.cumsum(weights[order])])
        levels /= levels[-1]
    masses = np.diff(np.asarray(gamma.cumulative(levels), dtype=float))
    return float(ordered @ masses)


def tvar(samples, beta, weights=None):
    return distortion_value(samples, DistortionWeight.tvar(beta), weights)


def subportfolio_tvar_sensitivity(x1, x2, beta):
    """
    d/dε TVaR_beta(X1 (1 + ε) + X2) at ε = 0, i.e. E[X1 | X1 + X2 >= VaR_beta].

    On samples the tail is the top (1 - beta) mass of the sorted sum, with
    the boundary sample weighted fractionally.
    """
    x1 = np.asarray(x1, dtype=float)
    total = x1 + np.asarray(x2, dtype=float)
    order = np.argsort(total, kind="stable")
    levels = np.arange(len(total) + 1) / len(total)
    masses = np.diff(DistortionWeight.tvar(beta).cumulative(levels))
    return float(x1[order] @ masses)


def finite_difference_tvar_sensitivity(x1, x2, beta, eps=1e-3):
    """Central finite difference of TVaR_beta(X1 (1 + ε) + X2) at ε = 0."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    up = tvar(x1 * (1.0 + eps) + x2, beta)
    down = tvar(x1 * (1.0 - eps) + x2, beta)
    return (up - down) / (2.0 * eps)
