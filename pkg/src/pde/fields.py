import csv
import os
from dataclasses import dataclass

import numpy as np

from src.errors import ExtrapolationError, GridError, PositivityViolationError
from src.pde.grid import Grid

LABELS = ("omega", "lambda", "k", "ell", "drift")


@dataclass(frozen=True)
class FieldTX:
    """
    A function of (t, x) sampled on a Grid.

    ``values`` has shape (n_t + 1, n_x), or (r, n_t + 1, n_x) for
    vector-valued fields with one sheet per constraint. Row i holds time
    grid.t[i].
    """
    values: object
    grid: Grid
    label: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape[-2:] != self.grid.shape or values.ndim not in (2, 3):
            raise GridError(f"Field '{self.label}' has shape {values.shape}, grid needs {self.grid.shape}")
        if self.label not in LABELS:
            raise GridError(f"Unknown field label '{self.label}'")
        if not np.all(np.isfinite(values)):
            raise GridError(f"Field '{self.label}' contains non-finite values")
        if self.label == "omega" and np.any(values <= 0):
            raise PositivityViolationError("omega must be strictly positive on the whole grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_vector(self):
        return self.values.ndim == 3

    @property
    def sheets(self):
        if not self.is_vector:
            return [self]
        return [FieldTX(sheet, self.grid, self.label) for sheet in self.values]

    def _time_rows(self, t):
        position = np.clip(float(t) / self.grid.dt, 0.0, self.grid.n_t)
        lower = min(int(np.floor(position)), self.grid.n_t - 1)
        weight = position - lower
        return (1.0 - weight) * self.values[..., lower, :] + weight * self.values[..., lower + 1, :]

    def interpolate(self, t, x, clamp=True):
        """
        Values at time t and states x, linear in both directions.

        Outside [x_min, x_max] the edge value is used when ``clamp`` is set;
        otherwise an ExtrapolationError is raised.
        """
        if self.is_vector:
            raise GridError("Interpolate a single sheet of a vector field")
        x = np.asarray(x, dtype=float)
        if not clamp and (np.any(x < self.grid.x_min) or np.any(x > self.grid.x_max)):
            raise ExtrapolationError(
                f"Field '{self.label}' evaluated outside [{self.grid.x_min:g}, {self.grid.x_max:g}]")
        return np.interp(x, self.grid.x, self._time_rows(t))

    def initial_value(self, x0):
        """Value at (0, x0); one entry per sheet for vector fields."""
        if self.is_vector:
            return np.array([np.interp(x0, self.grid.x, sheet[0]) for sheet in self.values])
        return float(np.interp(x0, self.grid.x, self.values[0]))

    def to_csv(self, filepath):
        """
        Write the field as a CSV matrix with a one-line header.

        The header reads ``# label=...,x_min=...,x_max=...,horizon=...,n_t=...,n_x=...``;
        each following row is one time slice.
        """
        if self.is_vector:
            raise GridError("Export vector fields one sheet at a time")
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        grid = self.grid
        header = (f"# label={self.label},x_min={float(grid.x_min)!r},x_max={float(grid.x_max)!r},"
                  f"horizon={float(grid.horizon)!r},n_t={grid.n_t},n_x={grid.n_x}")
        with open(filepath, 'w', newline='') as f:
            f.write(header + "\n")
            writer = csv.writer(f, lineterminator="\n")
            for row in self.values:
                writer.writerow([format(value, '.17g') for value in row])
        return filepath

    @classmethod
    def from_csv(cls, filepath):
        try:
            with open(filepath, newline='') as f:
                header = f.readline().strip()
                rows = [[float(value) for value in row] for row in csv.reader(f) if row]
        except OSError as exc:
            raise GridError(f"Could not read {filepath}: {exc}") from exc
        if not header.startswith("#"):
            raise GridError(f"{filepath} lacks a field header line")
        meta = dict(item.split("=", 1) for item in header[1:].strip().split(","))
        try:
            grid = Grid(float(meta['x_min']), float(meta['x_max']), int(meta['n_x']),
                        int(meta['n_t']), float(meta['horizon']))
        except KeyError as exc:
            raise GridError(f"{filepath} header is missing {exc}") from exc
        return cls(np.array(rows), grid, meta.get('label', 'lambda'))
