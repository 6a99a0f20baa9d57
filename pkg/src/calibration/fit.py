import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.errors import FitError
from src.model.process import ProcessSpec

logger = logging.getLogger(__name__)

MIN_COUNT = 20
SIGMA_FLOOR = 1e-3
CSV_COLUMNS = ["bin_left", "bin_right", "center", "mu", "sigma", "count", "inherited"]


@dataclass(frozen=True)
class FittedModel:
    """
    Binned drift and volatility estimates of a 1-D diffusion in normalised units.

    mu(x) and sigma(x) interpolate linearly between bin centres and are
    constant beyond the outer centres.
    """
    edges: object
    mu_hat: object
    sigma_hat: object
    counts: object
    inherited: object
    shift: float = 0.0
    scale: float = 1.0

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_bins(self):
        return len(self.mu_hat)

    def mu(self, x):
        return np.interp(np.asarray(x, dtype=float), self.centers, self.mu_hat)

    def sigma(self, x):
        return np.interp(np.asarray(x, dtype=float), self.centers, self.sigma_hat)

    def to_process_spec(self, x0=0.0, horizon=1.0):
        return ProcessSpec.one_dimensional(self.mu, self.sigma, x0, horizon)

    def to_csv(self, filepath):
        """Write one row per bin after a ``# shift=...,scale=...`` header line."""
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame = pd.DataFrame({
            'bin_left': self.edges[:-1],
            'bin_right': self.edges[1:],
            'center': self.centers,
            'mu': self.mu_hat,
            'sigma': self.sigma_hat,
            'count': np.asarray(self.counts, dtype=int),
            'inherited': np.asarray(self.inherited, dtype=bool).astype(int),
        }, columns=CSV_COLUMNS)
        with open(filepath, 'w', newline='') as f:
            f.write(f"# shift={float(self.shift)!r},scale={float(self.scale)!r}\n")
            frame.to_csv(f, index=False, float_format='%.17g')
        return filepath

    @classmethod
    def from_csv(cls, filepath):
        try:
            with open(filepath, newline='') as f:
                first = f.readline().strip()
                meta = {}
                if first.startswith("#"):
                    meta = dict(item.split("=", 1) for item in first[1:].strip().split(","))
                else:
                    f.seek(0)
                frame = pd.read_csv(f, float_precision="round_trip")
        except (OSError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise FitError(f"Could not read {filepath}: {exc}") from exc
        missing = set(CSV_COLUMNS) - set(frame.columns)
        if missing:
            raise FitError(f"{filepath} is missing columns {sorted(missing)}")
        if frame.empty:
            raise FitError(f"{filepath} contains no bins")
        edges = np.concatenate([frame["bin_left"].to_numpy(float)[:1], frame["bin_right"].to_numpy(float)])
        return cls(
            edges=edges,
            mu_hat=frame["mu"].to_numpy(float),
            sigma_hat=frame["sigma"].to_numpy(float),
            counts=frame["count"].to_numpy(int),
            inherited=frame["inherited"].to_numpy(int) == 1,
            shift=float(meta.get("shift", 0.0)),
            scale=float(meta.get("scale", 1.0)),
        )

    def __str__(self):
        lines = ["Fitted model", "============", "",
                 f"{'center':>10} {'mu':>10} {'sigma':>10} {'count':>8}"]
        for center, mu, sigma, count, inherited in zip(self.centers, self.mu_hat, self.sigma_hat,
                                                       self.counts, self.inherited):
            flag = " (inherited)" if inherited else ""
            lines.append(f"{center:10.4f} {mu:10.4f} {sigma:10.4f} {count:8d}{flag}")
        return "\n".join(lines)


def fit_drift_vol(series, n_bins, min_count=MIN_COUNT, sigma_floor=SIGMA_FLOOR):
    """
    Per-bin Gaussian maximum likelihood of the Euler increments.

    Increments are assigned to bins by their left endpoint. In bin b
    mu = ΣΔX / ΣΔt and sigma² = mean((ΔX - mu Δt)² / Δt). Bins with fewer
    than ``min_count`` increments take the estimates of the nearest
    occupied bin and are flagged.

    Args:
        series (SeriesData): Observed path
        n_bins (int): Number of equal-width bins over the observed range
        min_count (int): Occupancy threshold
        sigma_floor (float): Lower bound on sigma

    Returns:
        FittedModel: The estimates
    """
    if int(n_bins) < 2:
        raise FitError(f"Need at least 2 bins, got {n_bins}")
    n_bins = int(n_bins)
    path = series.normalized
    if np.ptp(path) == 0:
        raise FitError("The series has zero variance; drift and volatility cannot be fitted")
    x, dx, dt = series.increments

    edges = np.linspace(path.min(), path.max(), n_bins + 1)
    index = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(index, minlength=n_bins)
    occupied = counts >= min_count
    if occupied.sum() < 2:
        raise FitError(f"Only {occupied.sum()} bins hold {min_count} or more increments; use fewer bins")

    sum_dx = np.bincount(index, weights=dx, minlength=n_bins)
    sum_dt = np.bincount(index, weights=dt, minlength=n_bins)
    mu_hat = np.zeros(n_bins)
    mu_hat[occupied] = sum_dx[occupied] / sum_dt[occupied]
    squared = (dx - mu_hat[index] * dt) ** 2 / dt
    variance = np.zeros(n_bins)
    variance[occupied] = np.bincount(index, weights=squared, minlength=n_bins)[occupied] / counts[occupied]
    sigma_hat = np.maximum(np.sqrt(variance), sigma_floor)

    centers = 0.5 * (edges[:-1] + edges[1:])
    donors = np.flatnonzero(occupied)
    for b in np.flatnonzero(~occupied):
        nearest = donors[np.argmin(np.abs(centers[donors] - centers[b]))]
        mu_hat[b] = mu_hat[nearest]
        sigma_hat[b] = sigma_hat[nearest]
    logger.info("Fitted %d bins (%d inherited) from %d increments", n_bins, int((~occupied).sum()), len(dx))

    return FittedModel(edges, mu_hat, sigma_hat, counts, ~occupied, series.shift, series.scale)
