import numpy as np
import pandas as pd
from dataclasses import dataclass

from src.errors import SeriesError

MIN_OBSERVATIONS = 100


@dataclass(frozen=True)
class SeriesData:
    """
    A sampled price path with its normalisation record.

    ``values`` are stored in original units; ``normalized`` applies
    (value - shift) / scale, with shift the sample mean and scale the
    sample standard deviation when built by ``from_prices``.
    """
    timestamps: object
    values: object
    shift: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        timestamps = np.array(self.timestamps, dtype=float)
        values = np.array(self.values, dtype=float)
        if timestamps.ndim != 1 or timestamps.shape != values.shape:
            raise SeriesError("Timestamps and values must be 1-D arrays of equal length")
        if len(values) < MIN_OBSERVATIONS:
            raise SeriesError(f"A series needs at least {MIN_OBSERVATIONS} observations, got {len(values)}")
        if not (np.all(np.isfinite(timestamps)) and np.all(np.isfinite(values))):
            raise SeriesError("Series contains non-finite entries")
        if np.any(np.diff(timestamps) <= 0):
            raise SeriesError("Timestamps must be strictly increasing")
        if not self.scale > 0:
            raise SeriesError(f"Normalisation scale must be positive, got {self.scale}")
        timestamps.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_prices(cls, timestamps, prices):
        """Series normalised by the sample mean and standard deviation of the prices."""
        prices = np.asarray(prices, dtype=float)
        if len(prices) < 2 or np.std(prices, ddof=1) == 0:
            raise SeriesError("A constant price series cannot be normalised")
        return cls(timestamps, prices, float(np.mean(prices)), float(np.std(prices, ddof=1)))

    @classmethod
    def from_csv(cls, filepath):
        """
        Load a CSV with header ``timestamp,value``.

        Args:
            filepath (str): Path to the CSV file

        Returns:
            SeriesData: Normalised series
        """
        try:
            frame = pd.read_csv(filepath)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise SeriesError(f"Could not read {filepath}: {exc}") from exc
        missing = {"timestamp", "value"} - set(frame.columns)
        if missing:
            raise SeriesError(f"{filepath} is missing columns {sorted(missing)}")
        return cls.from_prices(frame["timestamp"].to_numpy(float), frame["value"].to_numpy(float))

    @property
    def normalized(self):
        return (self.values - self.shift) / self.scale

    def denormalize(self, x):
        return np.asarray(x, dtype=float) * self.scale + self.shift

    @property
    def increments(self):
        """(left states, ΔX, Δt) of the normalised path."""
        x = self.normalized
        return x[:-1], np.diff(x), np.diff(self.timestamps)

    def __len__(self):
        return len(self.values)
