import numpy as np
import pandas as pd
import pytest

from src.calibration.fit import FittedModel, fit_drift_vol
from src.calibration.series import SeriesData
from src.errors import FitError, SeriesError

DT = 0.01
STEPS = 100_000


def euler_path(rng, drift, sigma, x0=0.0):
    noise = sigma * np.sqrt(DT) * rng.standard_normal(STEPS)
    path = np.empty(STEPS + 1)
    path[0] = x0
    for k in range(STEPS):
        path[k + 1] = path[k] + drift(path[k]) * DT + noise[k]
    return SeriesData(np.arange(STEPS + 1) * DT, path)


def occupied(fitted):
    return ~fitted.inherited


def test_brownian_fit_within_standard_errors(rng):
    mu, sigma = 0.3, 0.8
    series = euler_path(rng, lambda x: mu, sigma)
    fitted = fit_drift_vol(series, 20)
    keep = occupied(fitted)
    assert keep.sum() >= 10
    counts = fitted.counts[keep]
    mu_error = 4.0 * sigma / np.sqrt(counts * DT)
    sigma_error = 4.0 * sigma / np.sqrt(2.0 * counts)
    assert np.all(np.abs(fitted.mu_hat[keep] - mu) <= mu_error)
    assert np.all(np.abs(fitted.sigma_hat[keep] - sigma) <= sigma_error)


def test_ou_fit_tracks_linear_drift(rng):
    theta, sigma = 1.0, 1.0
    series = euler_path(rng, lambda x: -theta * x, sigma)
    fitted = fit_drift_vol(series, 20)
    keep = occupied(fitted)
    half_width = 0.5 * (fitted.edges[1] - fitted.edges[0])
    tolerance = 4.0 * sigma / np.sqrt(fitted.counts[keep] * DT) + theta * half_width
    assert np.all(np.abs(fitted.mu_hat[keep] + theta * fitted.centers[keep]) <= tolerance)
    assert np.all(np.abs(fitted.sigma_hat[keep] - sigma)
                  <= 4.0 * sigma / np.sqrt(2.0 * fitted.counts[keep]) + 0.01)


def test_sparse_bins_inherit_neighbours(rng):
    series = euler_path(rng, lambda x: -x, 1.0)
    fitted = fit_drift_vol(series, 40, min_count=500)
    assert fitted.inherited.any()
    for b in np.flatnonzero(fitted.inherited):
        donors = np.flatnonzero(~fitted.inherited)
        nearest = donors[np.argmin(np.abs(fitted.centers[donors] - fitted.centers[b]))]
        assert fitted.mu_hat[b] == fitted.mu_hat[nearest]
        assert fitted.sigma_hat[b] == fitted.sigma_hat[nearest]


def test_fit_errors(rng):
    series = SeriesData(np.arange(200.0), rng.standard_normal(200))
    with pytest.raises(FitError):
        fit_drift_vol(series, 1)
    with pytest.raises(FitError):
        fit_drift_vol(series, 10, min_count=1000)
    with pytest.raises(FitError):
        fit_drift_vol(SeriesData(np.arange(200.0), np.zeros(200)), 10)


def test_sigma_floor():
    # a straight line has no residual variance
    series = SeriesData(np.arange(200.0), np.arange(200.0))
    fitted = fit_drift_vol(series, 2, sigma_floor=0.25)
    np.testing.assert_allclose(fitted.mu_hat, 1.0)
    np.testing.assert_allclose(fitted.sigma_hat, 0.25)


def test_normalisation_round_trip(rng):
    prices = 100.0 + np.cumsum(rng.standard_normal(500))
    series = SeriesData.from_prices(np.arange(500.0), prices)
    normalized = series.normalized
    assert normalized.mean() == pytest.approx(0.0, abs=1e-10)
    assert normalized.std(ddof=1) == pytest.approx(1.0)
    np.testing.assert_allclose(series.denormalize(normalized), prices, atol=1e-10)
    x, dx, dt = series.increments
    assert len(x) == len(dx) == len(dt) == 499
    assert len(series) == 500


def test_series_validation():
    with pytest.raises(SeriesError):
        SeriesData(np.arange(50.0), np.zeros(50))
    with pytest.raises(SeriesError):
        SeriesData(np.zeros(200), np.arange(200.0))
    with pytest.raises(SeriesError):
        SeriesData(np.arange(200.0), np.full(200, np.nan))
    with pytest.raises(SeriesError):
        SeriesData.from_prices(np.arange(200.0), np.ones(200))


def test_series_from_csv(tmp_path, rng):
    path = tmp_path / "prices.csv"
    pd.DataFrame({'timestamp': np.arange(300.0), 'value': 50.0 + rng.standard_normal(300)}).to_csv(
        path, index=False)
    series = SeriesData.from_csv(str(path))
    assert len(series) == 300
    assert series.scale > 0

    bad = tmp_path / "bad.csv"
    pd.DataFrame({'time': np.arange(300.0), 'value': np.ones(300)}).to_csv(bad, index=False)
    with pytest.raises(SeriesError):
        SeriesData.from_csv(str(bad))
    with pytest.raises(SeriesError):
        SeriesData.from_csv(str(tmp_path / "missing.csv"))


def test_fitted_model_file_and_spec(tmp_path, rng):
    series = euler_path(rng, lambda x: -x, 1.0)
    fitted = fit_drift_vol(series, 10)
    loaded = FittedModel.from_csv(fitted.to_csv(str(tmp_path / "model.csv")))
    np.testing.assert_array_equal(loaded.mu_hat, fitted.mu_hat)
    np.testing.assert_array_equal(loaded.edges, fitted.edges)
    np.testing.assert_array_equal(loaded.inherited, fitted.inherited)
    spec = loaded.to_process_spec(x0=0.0, horizon=2.0)
    mu, sigma = spec.scalar_coefficients()
    np.testing.assert_allclose(mu(fitted.centers), fitted.mu_hat)
    np.testing.assert_allclose(sigma(fitted.centers), fitted.sigma_hat)
    assert "Fitted model" in str(fitted)
    with pytest.raises(FitError):
        FittedModel.from_csv(str(tmp_path / "missing.csv"))

    header = (tmp_path / "model.csv").read_text().splitlines()[:2]
    assert header[0].startswith("# shift=")
    assert header[1] == "bin_left,bin_right,center,mu,sigma,count,inherited"


def test_fitted_model_file_needs_every_column(tmp_path):
    path = tmp_path / "partial.csv"
    pd.DataFrame({'bin_left': [0.0, 1.0], 'bin_right': [1.0, 2.0], 'mu': [0.1, -0.1]}).to_csv(path, index=False)
    with pytest.raises(FitError, match="missing columns"):
        FittedModel.from_csv(str(path))
    empty = tmp_path / "empty.csv"
    empty.write_text("# shift=0.0,scale=1.0\nbin_left,bin_right,center,mu,sigma,count,inherited\n")
    with pytest.raises(FitError, match="no bins"):
        FittedModel.from_csv(str(empty))
