"""
Grid computation of the optimal measure for a 1-D diffusion dX = μ(X)dt + σ(X)dW.

For fixed multipliers the pipeline is
  1. ω(t, x) = E_{t,x}[exp(-η₁·(f(X_T) - c) - ∫ η₂·(g(X_s) - d/T) ds)] by a backward θ-scheme,
  2. λ(t, x) = -σ(x) ∂_x log ω(t, x),
  3. the constraint errors k(0, x0) and ℓ(0, x0) - d under the drift μ - σλ.
The outer loop updates the multipliers by damped Newton steps on the error map.
"""
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from src.errors import (ConfigError, ConstraintError, GridError, PositivityViolationError,
                        SchemeFallbackWarning, SingularJacobianError)
from src.pde.fields import FieldTX
from src.pde.theta_scheme import PECLET_LIMIT, theta_solve

logger = logging.getLogger(__name__)

SIGMA_MIN = 1e-6
JACOBIAN_BUMP = 1e-4
DEFAULT_TOL = 1e-4
DEFAULT_MAX_OUTER = 50
SINGULAR_CONDITION = 1e12
MAX_HALVINGS = 30
MAX_BUMP_HALVINGS = 4
THREADS_ENV = "ENTROPIC_STRESS_THREADS"


def default_threads():
    """Thread count for the Jacobian solves, from ENTROPIC_STRESS_THREADS or the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive, got {threads}")
    return threads


def grid_coefficients(grid, mu, sigma, sigma_min=SIGMA_MIN):
    """μ and σ evaluated on the grid nodes, with σ checked against ``sigma_min``."""
    x = grid.x
    drift = np.broadcast_to(np.asarray(mu(x), dtype=float), x.shape).copy()
    vol = np.broadcast_to(np.asarray(sigma(x), dtype=float), x.shape).copy()
    if not (np.all(np.isfinite(drift)) and np.all(np.isfinite(vol))):
        raise GridError("Drift and volatility must be finite on the grid")
    if np.any(vol < sigma_min):
        raise GridError(f"Volatility falls below sigma_min = {sigma_min:g} on the grid "
                        f"(min {vol.min():.3g}); the diffusion must be non-degenerate")
    return drift, vol


def smoothed_indicator(x, threshold, width):
    """Logistic ramp approximating 1{x <= threshold} over roughly ``width``."""
    return expit((threshold - np.asarray(x, dtype=float)) / (0.25 * width))


def constraint_on_grid(constraint, grid, smoothing=True):
    """Constraint function on the grid nodes; indicators are smoothed over 2Δx."""
    if constraint.is_indicator and smoothing:
        return smoothed_indicator(grid.x, constraint.threshold, 2.0 * grid.dx)
    return constraint(grid.x.reshape(-1, 1))


def _check_scalar(constraints):
    if constraints.dim_state != 1:
        raise ConstraintError("The grid engine handles one-dimensional states only")


def _split(eta, constraints):
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.shape != (constraints.size,):
        raise ConstraintError(f"Expected {constraints.size} multipliers, got shape {eta.shape}")
    return eta[:constraints.n_terminal], eta[constraints.n_terminal:]


def solve_omega(grid, mu, sigma, eta1, eta2, constraints, theta=0.5, sigma_min=SIGMA_MIN,
                peclet_limit=PECLET_LIMIT, smoothing=True):
    """
    Solve for ω on the grid.

    A Crank-Nicolson solve that produces a non-positive ω is retried once
    fully implicitly with a SchemeFallbackWarning; if that also fails a
    PositivityViolationError is raised.

    Returns:
        FieldTX: ω, labelled 'omega'
    """
    _check_scalar(constraints)
    eta1 = np.atleast_1d(np.asarray(eta1, dtype=float))
    eta2 = np.atleast_1d(np.asarray(eta2, dtype=float))
    if eta1.shape != (constraints.n_terminal,) or eta2.shape != (constraints.n_running,):
        raise ConstraintError("Multiplier blocks do not match the constraint set")
    drift, vol = grid_coefficients(grid, mu, sigma, sigma_min)

    exponent = np.zeros(grid.n_x)
    for eta, constraint in zip(eta1, constraints.terminal):
        exponent -= eta * (constraint_on_grid(constraint, grid, smoothing) - constraint.target)
    potential = np.zeros(grid.n_x)
    for eta, constraint in zip(eta2, constraints.running):
        potential += eta * (constraint_on_grid(constraint, grid, smoothing) - constraint.target / grid.horizon)

    with np.errstate(over='ignore'):
        terminal = np.exp(exponent)
    for attempt in (theta, 1.0):
        values = theta_solve(grid, terminal, drift, 0.5 * vol ** 2, potential,
                             theta=attempt, peclet_limit=peclet_limit)
        if np.all(np.isfinite(values)) and np.all(values > 0):
            return FieldTX(values, grid, "omega")
        if attempt == 1.0:
            break
        logger.warning("omega lost positivity with theta=%.2f; retrying fully implicit", attempt)
        warnings.warn("omega lost positivity; falling back to the implicit scheme (theta=1)",
                      SchemeFallbackWarning, stacklevel=2)
    raise PositivityViolationError(
        "omega is not strictly positive on the grid; refine the grid or reduce the multipliers")


def drift_adjustment(omega, sigma):
    """
    λ = -σ ∂_x log ω with second-order differences, one-sided at the edges.

    Returns:
        FieldTX: λ, labelled 'lambda'
    """
    if omega.label != "omega":
        raise GridError(f"Expected an omega field, got '{omega.label}'")
    grid = omega.grid
    vol = np.broadcast_to(np.asarray(sigma(grid.x), dtype=float), grid.x.shape)
    gradient = np.gradient(np.log(omega.values), grid.dx, axis=1, edge_order=2)
    return FieldTX(-vol[None, :] * gradient, grid, "lambda")


def tilted_drift_field(grid, mu, sigma, lambda_field, sigma_min=SIGMA_MIN):
    """Drift μ - σλ of the state under the tilted measure."""
    drift, vol = grid_coefficients(grid, mu, sigma, sigma_min)
    return FieldTX(drift[None, :] - vol[None, :] * lambda_field.values, grid, "drift")


def _tilted_solves(grid, mu, sigma, lambda_field, terminals, sources, theta, sigma_min, peclet_limit):
    drift, vol = grid_coefficients(grid, mu, sigma, sigma_min)
    lam = lambda_field.values
    tilted = lambda index: drift - vol * lam[index]
    sheets = [theta_solve(grid, terminal, tilted, 0.5 * vol ** 2, source=source,
                          theta=theta, peclet_limit=peclet_limit)
              for terminal, source in zip(terminals, sources)]
    if not sheets:
        return np.empty((0,) + grid.shape)
    return np.stack(sheets)


def solve_terminal_error(grid, mu, sigma, lambda_field, constraints, theta=0.5,
                         sigma_min=SIGMA_MIN, peclet_limit=PECLET_LIMIT, smoothing=True):
    """
    k(t, x) = E^Q[f(X_T) - c | X_t = x], one sheet per terminal constraint.

    Returns:
        FieldTX: k, labelled 'k', shape (r1, n_t + 1, n_x)
    """
    _check_scalar(constraints)
    terminals = [constraint_on_grid(c, grid, smoothing) - c.target for c in constraints.terminal]
    values = _tilted_solves(grid, mu, sigma, lambda_field, terminals, [None] * len(terminals),
                            theta, sigma_min, peclet_limit)
    return FieldTX(values, grid, "k")


def solve_running_error(grid, mu, sigma, lambda_field, constraints, theta=0.5,
                        sigma_min=SIGMA_MIN, peclet_limit=PECLET_LIMIT, smoothing=True):
    """
    ℓ(t, x) = E^Q[∫_t^T g(X_s) ds | X_t = x], one sheet per running constraint.

    The constraint error is ℓ(0, x0) - d.
    """
    _check_scalar(constraints)
    sources = [constraint_on_grid(c, grid, smoothing) for c in constraints.running]
    values = _tilted_solves(grid, mu, sigma, lambda_field, [np.zeros(grid.n_x)] * len(sources),
                            sources, theta, sigma_min, peclet_limit)
    return FieldTX(values, grid, "ell")


@dataclass
class CalibrationReport:
    """Outcome of the outer multiplier loop."""
    converged: bool
    iterations: int
    eta: object
    residual: object
    scaled_residual: object
    kl: float
    omega: FieldTX = None
    k: FieldTX = None
    ell: FieldTX = None
    history: list = field(default_factory=list)

    def to_dict(self):
        return {
            'converged': bool(self.converged),
            'iterations': int(self.iterations),
            'eta': [float(v) for v in self.eta],
            'residual': [float(v) for v in self.residual],
            'scaled_residual': [float(v) for v in self.scaled_residual],
            'kl': float(self.kl),
            'residual_history': [float(v) for v in self.history],
        }


class MultiplierCalibration:
    """
    Outer loop of the grid engine: Newton steps on η ↦ (k(0, x0), ℓ(0, x0) - d).

    Residuals are divided by ``scales`` before the convergence test and the
    line search. The Jacobian is built from forward differences, one bumped
    pipeline solve per multiplier, run on a thread pool.
    """

    def __init__(self, grid, mu, sigma, constraints, x0, scales=None, theta=0.5,
                 sigma_min=SIGMA_MIN, peclet_limit=PECLET_LIMIT, smoothing=True,
                 bump=JACOBIAN_BUMP, threads=None):
        _check_scalar(constraints)
        self.grid = grid
        self.mu = mu
        self.sigma = sigma
        self.constraints = constraints
        self.x0 = float(x0)
        self.scales = np.ones(constraints.size) if scales is None else np.asarray(scales, dtype=float)
        if self.scales.shape != (constraints.size,) or np.any(self.scales <= 0):
            raise ConstraintError("Residual scales must be positive, one per constraint")
        self.options = dict(theta=theta, sigma_min=sigma_min, peclet_limit=peclet_limit,
                            smoothing=smoothing)
        self.bump = bump
        self.threads = threads or default_threads()
        self.running_targets = np.array([c.target for c in constraints.running], dtype=float)
        grid.check_margin(self.x0, float(np.asarray(sigma(np.array([self.x0])), dtype=float).ravel()[0]))

    def evaluate(self, eta):
        """
        Run the pipeline at ``eta``.

        Returns:
            dict: omega, lambda, k, ell fields and the raw and scaled residuals
        """
        eta1, eta2 = _split(eta, self.constraints)
        omega = solve_omega(self.grid, self.mu, self.sigma, eta1, eta2, self.constraints, **self.options)
        lam = drift_adjustment(omega, self.sigma)
        k = solve_terminal_error(self.grid, self.mu, self.sigma, lam, self.constraints, **self.options)
        ell = solve_running_error(self.grid, self.mu, self.sigma, lam, self.constraints, **self.options)
        residual = np.concatenate([np.atleast_1d(k.initial_value(self.x0)),
                                   np.atleast_1d(ell.initial_value(self.x0)) - self.running_targets])
        return {
            'omega': omega, 'lambda': lam, 'k': k, 'ell': ell,
            'residual': residual, 'scaled': residual / self.scales,
        }

    def jacobian(self, eta, base):
        """
        Forward-difference Jacobian of the scaled residuals at ``eta``.

        A bumped solve that loses positivity of ω is retried with half the
        bump, up to MAX_BUMP_HALVINGS times.

        Raises:
            SingularJacobianError: When a column cannot be formed with any bump
        """
        def column(index):
            bump = self.bump
            for _ in range(MAX_BUMP_HALVINGS + 1):
                bumped = np.array(eta, dtype=float)
                bumped[index] += bump
                try:
                    return (self.evaluate(bumped)['scaled'] - base) / bump
                except PositivityViolationError:
                    logger.debug("Bumped solve for '%s' lost positivity at bump %.3g; halving",
                                 self.constraints.labels[index], bump)
                    bump *= 0.5
            raise SingularJacobianError(
                f"Jacobian column for '{self.constraints.labels[index]}' could not be formed: omega "
                f"lost positivity for every bump down to {2.0 * bump:.3g} "
                f"(eta = {np.array2string(np.asarray(eta, dtype=float))})")

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            columns = list(pool.map(column, range(len(eta))))
        return np.column_stack(columns)

    def run(self, tol=DEFAULT_TOL, max_outer=DEFAULT_MAX_OUTER, initial=None):
        """
        Iterate until max|scaled residual| <= tol or ``max_outer`` iterations.

        Returns:
            tuple: (eta, lambda FieldTX, CalibrationReport)
        """
        eta = np.zeros(self.constraints.size) if initial is None else np.array(initial, dtype=float)
        state = self.evaluate(eta)
        history = [float(np.max(np.abs(state['scaled'])))]
        converged = False
        iterations = 0
        while True:
            if history[-1] <= tol:
                converged = True
                break
            if iterations >= max_outer:
                logger.warning("Multiplier calibration did not converge in %d iterations "
                               "(max|residual| = %.3e)", max_outer, history[-1])
                break
            jacobian = self.jacobian(eta, state['scaled'])
            condition = np.linalg.cond(jacobian)
            if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
                raise SingularJacobianError(
                    f"Constraint error Jacobian is singular (condition {condition:.3e}); rescale "
                    f"the constraints or remove redundant ones")
            step = np.linalg.solve(jacobian, -state['scaled'])

            norm = np.linalg.norm(state['scaled'])
            scale = 1.0
            accepted = None
            for _ in range(MAX_HALVINGS):
                candidate = eta + scale * step
                try:
                    trial = self.evaluate(candidate)
                except PositivityViolationError:
                    trial = None
                if trial is not None and np.linalg.norm(trial['scaled']) < norm:
                    accepted = (candidate, trial)
                    break
                scale *= 0.5
            if accepted is None:
                logger.warning("Line search failed at outer iteration %d", iterations)
                break
            eta, state = accepted
            iterations += 1
            history.append(float(np.max(np.abs(state['scaled']))))
            logger.info("Outer iteration %d: eta = %s, max|residual| = %.3e", iterations,
                        np.array2string(eta, precision=6), history[-1])

        kl = max(0.0, -float(np.log(state['omega'].initial_value(self.x0))))
        report = CalibrationReport(
            converged=converged,
            iterations=iterations,
            eta=eta,
            residual=state['residual'],
            scaled_residual=state['scaled'],
            kl=kl,
            omega=state['omega'],
            k=state['k'],
            ell=state['ell'],
            history=history,
        )
        return eta, state['lambda'], report


def calibrate_multipliers(grid, mu, sigma, constraints, x0, tol=DEFAULT_TOL, max_outer=DEFAULT_MAX_OUTER,
                          scales=None, threads=None, **options):
    """
    Calibrate the multipliers so the constraint errors vanish at (0, x0).

    Returns:
        tuple: (eta, lambda FieldTX, CalibrationReport)
    """
    calibration = MultiplierCalibration(grid, mu, sigma, constraints, x0, scales=scales,
                                        threads=threads, **options)
    return calibration.run(tol=tol, max_outer=max_outer)
