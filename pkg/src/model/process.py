import numpy as np
from dataclasses import dataclass
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import stats

from src.errors import ModelSpecError

QUADRATURE_NODES = 64


def _as_vector(value, size, name):
    array = np.atleast_1d(np.asarray(value, dtype=float))
    if array.shape == (1,) and size > 1:
        array = np.full(size, array[0])
    if array.shape != (size,):
        raise ModelSpecError(f"{name} must have shape ({size},), got {array.shape}")
    return array


@dataclass(frozen=True)
class JumpComponent:
    """
    A compound-Poisson driver of the reference model.

    Callables are vectorised over paths: ``coefficient(t, x, z)`` receives x of
    shape (N, n) and marks z of shape (N,) and returns the jump sizes (N, n).

    Args:
        rate (float): Arrival intensity per unit of model time
        marks: Frozen ``scipy.stats`` distribution of the marks
        coefficient (callable, optional): Jump coefficient γ(t, x, z). When
            omitted the jump is ``z * direction`` and the compensator uses the
            declared mark mean.
        direction (array-like, optional): Direction of an additive jump,
            defaults to the first coordinate axis
    """
    rate: float
    marks: object
    coefficient: object = None
    direction: object = None

    @property
    def is_gaussian(self):
        return getattr(getattr(self.marks, "dist", None), "name", None) == "norm"

    def bind(self, dim_state):
        """Return a copy with the jump direction resolved for an n-dimensional state."""
        direction = self.direction
        if direction is None:
            direction = np.eye(dim_state)[0]
        return JumpComponent(self.rate, self.marks, self.coefficient,
                             _as_vector(direction, dim_state, "jump direction"))

    def jump(self, t, x, z):
        if self.coefficient is None:
            return z[:, None] * self.direction[None, :]
        return np.asarray(self.coefficient(t, x, z), dtype=float)

    def quadrature(self):
        """Nodes and weights integrating functions of the mark against its law."""
        if self.is_gaussian:
            nodes, weights = hermegauss(QUADRATURE_NODES)
            loc, scale = self.marks.mean(), self.marks.std()
            return loc + scale * nodes, weights / np.sqrt(2.0 * np.pi)
        nodes, weights = leggauss(QUADRATURE_NODES)
        return self.marks.ppf(0.5 * (nodes + 1.0)), 0.5 * weights

    def mean_jump(self, t, x):
        """E[γ(t, x, Z)] per path, i.e. the compensator drift per unit rate."""
        if self.coefficient is None:
            return np.broadcast_to(self.marks.mean() * self.direction, x.shape)
        nodes, weights = self.quadrature()
        total = np.zeros_like(x)
        for node, weight in zip(nodes, weights):
            total += weight * self.jump(t, x, np.full(x.shape[0], node))
        return total

    def tilted(self, eta):
        """
        Law of the component under the exponential mark tilt h(z) = 1 - exp(-eta z).

        Returns:
            tuple: (tilted rate, tilted frozen mark distribution)
        """
        if not self.is_gaussian:
            raise ModelSpecError("Mark tilts are only available for Gaussian marks")
        loc, scale = self.marks.mean(), self.marks.std()
        factor = np.exp(-eta * loc + 0.5 * eta ** 2 * scale ** 2)
        return self.rate * factor, stats.norm(loc=loc - eta * scale ** 2, scale=scale)


@dataclass(frozen=True)
class ProcessSpec:
    """
    Reference Lévy-Itô model dX = α dt + σ dW + ∫γ (μ - ν)(dt, dz).

    ``drift(t, x)`` maps (N, n) states to (N, n) and ``diffusion(t, x)`` to
    (N, n, m). The coefficients are probed for finite values on a few points
    around the initial state when the ProcessSpec is built; growth and Lipschitz
    conditions are the caller's responsibility.
    """
    dim_state: int
    dim_bm: int
    drift: object
    diffusion: object
    initial_state: object
    horizon: float
    jumps: tuple = ()

    def __post_init__(self):
        if int(self.dim_state) < 1 or int(self.dim_bm) < 1:
            raise ModelSpecError("dim_state and dim_bm must be positive integers")
        if not self.horizon > 0:
            raise ModelSpecError(f"Horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "initial_state",
                           _as_vector(self.initial_state, self.dim_state, "initial_state"))
        object.__setattr__(self, "jumps",
                           tuple(component.bind(self.dim_state) for component in self.jumps))
        self._probe()

    def _probe(self):
        n, m = self.dim_state, self.dim_bm
        x = self.initial_state[None, :] + np.array([-1.0, 0.0, 1.0])[:, None]
        for t in (0.0, 0.5 * self.horizon, self.horizon):
            drift = np.asarray(self.drift(t, x), dtype=float)
            if drift.shape != (3, n) or not np.all(np.isfinite(drift)):
                raise ModelSpecError(f"Drift must return finite values of shape (N, {n}) (t={t})")
            diffusion = np.asarray(self.diffusion(t, x), dtype=float)
            if diffusion.shape != (3, n, m) or not np.all(np.isfinite(diffusion)):
                raise ModelSpecError(f"Diffusion must return finite values of shape (N, {n}, {m}) (t={t})")

        probe_rng = np.random.default_rng(0)
        for index, component in enumerate(self.jumps):
            if component.rate < 0:
                raise ModelSpecError(f"Jump component {index} has a negative rate")
            if not np.isfinite(component.marks.var()):
                raise ModelSpecError(f"Jump component {index} marks lack a finite second moment")
            sample = component.marks.rvs(size=256, random_state=probe_rng)
            if not np.all(np.isfinite(sample)):
                raise ModelSpecError(f"Jump component {index} produced non-finite marks")
            sizes = component.jump(0.0, x, sample[:3])
            if sizes.shape != (3, n) or not np.all(np.isfinite(sizes)):
                raise ModelSpecError(f"Jump component {index} coefficient must return finite (N, {n}) values")

    @property
    def is_scalar_diffusion(self):
        return self.dim_state == 1 and self.dim_bm == 1 and not self.jumps

    def scalar_coefficients(self):
        """
        Drift and volatility of a time-homogeneous 1-D diffusion as functions of x.

        Returns:
            tuple: (mu, sigma) callables mapping 1-D arrays of states to 1-D arrays
        """
        if not self.is_scalar_diffusion:
            raise ModelSpecError("The PDE engine needs a one-dimensional diffusion without jumps")

        def mu(x):
            x = np.asarray(x, dtype=float)
            return np.asarray(self.drift(0.0, x.reshape(-1, 1)), dtype=float).reshape(x.shape)

        def sigma(x):
            x = np.asarray(x, dtype=float)
            return np.asarray(self.diffusion(0.0, x.reshape(-1, 1)), dtype=float).reshape(x.shape)

        return mu, sigma

    @classmethod
    def one_dimensional(cls, mu, sigma, x0=0.0, horizon=1.0):
        """Build a 1-D diffusion from vectorised functions mu(x) and sigma(x)."""
        return cls(
            dim_state=1, dim_bm=1,
            drift=lambda t, x: np.asarray(mu(x[:, 0]), dtype=float).reshape(-1, 1),
            diffusion=lambda t, x: np.asarray(sigma(x[:, 0]), dtype=float).reshape(-1, 1, 1),
            initial_state=x0, horizon=horizon)

    @classmethod
    def brownian(cls, sigma=1.0, drift=0.0, x0=0.0, horizon=1.0):
        return cls.one_dimensional(lambda x: np.full_like(x, drift),
                                   lambda x: np.full_like(x, sigma), x0, horizon)

    @classmethod
    def ornstein_uhlenbeck(cls, theta=1.0, mean=0.0, sigma=1.0, x0=0.0, horizon=1.0):
        return cls.one_dimensional(lambda x: theta * (mean - x),
                                   lambda x: np.full_like(x, sigma), x0, horizon)

    @classmethod
    def merton_gaussian(cls, rate, mark_mean, mark_std, drift=0.0, sigma=1.0,
                        x0=0.0, horizon=1.0):
        """Brownian motion with drift plus compensated Gaussian-mark compound Poisson jumps."""
        return cls(
            dim_state=1, dim_bm=1,
            drift=lambda t, x: np.full_like(x, drift),
            diffusion=lambda t, x: np.full((x.shape[0], 1, 1), sigma),
            initial_state=x0, horizon=horizon,
            jumps=(JumpComponent(rate, stats.norm(loc=mark_mean, scale=mark_std)),))


@dataclass(frozen=True)
class TiltFields:
    """
    Controls (λ, h) of a measure change.

    ``lambda_field`` is either a callable λ(t, x) returning (N, m) or a
    grid-backed field exposing ``interpolate(t, x, clamp)`` (1-D models).
    ``mark_tilts`` holds (component index, eta) pairs for the exponential mark
    family h(z) = 1 - exp(-eta z).
    """
    lambda_field: object = None
    mark_tilts: tuple = ()
    clamp: bool = True

    @classmethod
    def null(cls):
        return cls()

    @property
    def tilted_components(self):
        return {int(index): float(eta) for index, eta in self.mark_tilts}

    def validate(self, spec):
        for index in self.tilted_components:
            if index < 0 or index >= len(spec.jumps):
                raise ModelSpecError(f"Mark tilt refers to missing jump component {index}")
            if not spec.jumps[index].is_gaussian:
                raise ModelSpecError(f"Jump component {index} has non-Gaussian marks; it cannot be tilted")
        if self.lambda_field is not None and hasattr(self.lambda_field, "interpolate") \
                and spec.dim_bm != 1:
            raise ModelSpecError("Grid-backed drift controls need a single Brownian driver")

    def drift_control(self, t, x):
        if self.lambda_field is None:
            return None
        if hasattr(self.lambda_field, "interpolate"):
            values = self.lambda_field.interpolate(t, x[:, 0], clamp=self.clamp)
            return np.asarray(values, dtype=float).reshape(-1, 1)
        return np.asarray(self.lambda_field(t, x), dtype=float)
