import numpy as np
from dataclasses import dataclass

from src.errors import GridError

MARGIN_STDS = 4.0


@dataclass(frozen=True)
class Grid:
    """
    Uniform (t, x) grid on [0, T] x [x_min, x_max].

    Args:
        x_min (float): Left edge
        x_max (float): Right edge
        n_x (int): Number of space nodes, at least 3
        n_t (int): Number of time steps
        horizon (float): T
    """
    x_min: float
    x_max: float
    n_x: int
    n_t: int
    horizon: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise GridError(f"Need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_x) < 3:
            raise GridError(f"n_x must be at least 3, got {self.n_x}")
        if int(self.n_t) < 1:
            raise GridError(f"n_t must be at least 1, got {self.n_t}")
        if not self.horizon > 0:
            raise GridError(f"Horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "n_t", int(self.n_t))

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def t(self):
        return np.linspace(0.0, self.horizon, self.n_t + 1)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dt(self):
        return self.horizon / self.n_t

    @property
    def shape(self):
        return self.n_t + 1, self.n_x

    def check_margin(self, x0, sigma0, stds=MARGIN_STDS):
        """Require [x0 - stds σ√T, x0 + stds σ√T] inside the grid."""
        reach = stds * abs(sigma0) * np.sqrt(self.horizon)
        if x0 - reach < self.x_min or x0 + reach > self.x_max:
            raise GridError(
                f"Grid [{self.x_min:g}, {self.x_max:g}] does not cover x0 = {x0:g} with a margin of "
                f"{stds:g} reference standard deviations ({reach:.4g})")

    def refined(self, factor=2):
        """Grid with ``factor`` times smaller steps in both directions."""
        return Grid(self.x_min, self.x_max, factor * (self.n_x - 1) + 1, factor * self.n_t, self.horizon)

    @classmethod
    def around(cls, x0, sigma0, horizon, n_x=401, n_t=400, stds=8.0):
        """Grid centred on x0 spanning ``stds`` reference standard deviations each way."""
        reach = stds * abs(sigma0) * np.sqrt(horizon)
        if reach <= 0:
            raise GridError("Cannot size a grid around a zero volatility")
        return cls(x0 - reach, x0 + reach, n_x, n_t, horizon)

    def to_dict(self):
        return {
            'x_min': float(self.x_min),
            'x_max': float(self.x_max),
            'n_x': self.n_x,
            'n_t': self.n_t,
            'horizon': float(self.horizon),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data['x_min'], data['x_max'], data['n_x'], data['n_t'], data['horizon'])
