"""
Backward θ-scheme for 1-D parabolic equations

    ∂_t u + μ(t, x) ∂_x u + ½ σ²(x) ∂_xx u - V(x) u + s(x) = 0,  u(T, x) given,

on a uniform grid with zero-gradient (Neumann) boundaries.
"""
import logging

import numpy as np
from scipy.linalg import solve_banded

from src.errors import GridError

logger = logging.getLogger(__name__)

PECLET_LIMIT = 2.0


def spatial_operator(drift, half_variance, dx, peclet_limit=PECLET_LIMIT):
    """
    Tridiagonal coefficients of μ ∂_x + ½σ² ∂_xx.

    Central differences are used where the cell Péclet number |μ|Δx/σ²
    is at most ``peclet_limit`` and first-order upwinding elsewhere. The
    ghost nodes u_{-1} = u_1 and u_n = u_{n-2} are folded into the edge rows.

    Returns:
        tuple: (lower, diagonal, upper) arrays of length n_x
    """
    drift = np.asarray(drift, dtype=float)
    half_variance = np.broadcast_to(np.asarray(half_variance, dtype=float), drift.shape)
    diffusion = half_variance / dx ** 2
    lower = diffusion - drift / (2.0 * dx)
    diagonal = -2.0 * diffusion
    upper = diffusion + drift / (2.0 * dx)

    upwind = np.abs(drift) * dx > peclet_limit * 2.0 * half_variance
    if np.any(upwind):
        forward = upwind & (drift > 0)
        backward = upwind & (drift <= 0)
        lower = np.where(forward, diffusion, np.where(backward, diffusion - drift / dx, lower))
        upper = np.where(forward, diffusion + drift / dx, np.where(backward, diffusion, upper))
        diagonal = np.where(forward, -2.0 * diffusion - drift / dx,
                            np.where(backward, -2.0 * diffusion + drift / dx, diagonal))

    upper = upper.copy()
    lower = lower.copy()
    upper[0] += lower[0]
    lower[0] = 0.0
    lower[-1] += upper[-1]
    upper[-1] = 0.0
    return lower, diagonal, upper


def _apply(lower, diagonal, upper, u):
    out = diagonal * u
    out[1:] += lower[1:] * u[:-1]
    out[:-1] += upper[:-1] * u[1:]
    return out


def theta_solve(grid, terminal, drift, half_variance, potential=None, source=None,
                theta=0.5, peclet_limit=PECLET_LIMIT):
    """
    March the equation backward from t = T to t = 0.

    Args:
        grid (Grid): Space-time grid
        terminal (ndarray): u(T, x), shape (n_x,)
        drift (ndarray or callable): μ on the grid, either an array of shape
            (n_x,) or a callable mapping a time index to such an array
        half_variance (ndarray): ½σ²(x), shape (n_x,)
        potential (ndarray, optional): V(x), shape (n_x,)
        source (ndarray, optional): s(x), shape (n_x,)
        theta (float): 0.5 for Crank-Nicolson, 1 for fully implicit

    Returns:
        ndarray: u on the grid, shape (n_t + 1, n_x), row i at time grid.t[i]
    """
    if not 0.0 <= theta <= 1.0:
        raise GridError(f"theta must lie in [0, 1], got {theta}")
    n_x, dt, dx = grid.n_x, grid.dt, grid.dx
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (n_x,):
        raise GridError(f"Terminal data must have shape ({n_x},), got {terminal.shape}")
    potential = np.zeros(n_x) if potential is None else np.asarray(potential, dtype=float)
    source = np.zeros(n_x) if source is None else np.asarray(source, dtype=float)

    if callable(drift):
        operator_at = lambda index: spatial_operator(drift(index), half_variance, dx, peclet_limit)
    else:
        fixed = spatial_operator(drift, half_variance, dx, peclet_limit)
        operator_at = lambda index: fixed

    values = np.empty(grid.shape)
    values[-1] = terminal
    banded = np.zeros((3, n_x))
    explicit_operator = operator_at(grid.n_t)
    for n in range(grid.n_t - 1, -1, -1):
        lower, diagonal, upper = operator_at(n)
        banded[0, 1:] = -theta * dt * upper[:-1]
        banded[1, :] = 1.0 - theta * dt * (diagonal - potential)
        banded[2, :-1] = -theta * dt * lower[1:]

        previous = values[n + 1]
        e_lower, e_diagonal, e_upper = explicit_operator
        rhs = previous + (1.0 - theta) * dt * (_apply(e_lower, e_diagonal, e_upper, previous)
                                               - potential * previous)
        rhs += dt * source
        values[n] = solve_banded((1, 1), banded, rhs)
        explicit_operator = (lower, diagonal, upper)
    return values
