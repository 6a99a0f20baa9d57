import numpy as np
import pytest

from src.engines.pipeline import occupation_times, provenance, run_pipeline, shared_histogram
from src.errors import ConfigError, ConstraintError, EntropicStressError, InfeasibleTargetError
from src.model.process import ProcessSpec
from src.reporting.report_generator import export_report
from src.simulation.config import RunConfig
from src.simulation.simulator import simulate_paths

STRESS = ["var(level=0.9,shift=+10%)", "barrier_time(level=-0.1,scale=0.5)"]


def small_config(**overrides):
    settings = dict(model="ou", model_params={"theta": 1.0, "mean": 0.0, "sigma": 1.0},
                    n_paths=4000, n_steps=50, seed=99, histogram_bins=20)
    settings.update(overrides)
    return RunConfig(**settings)


def test_provenance_prefixes_project_errors():
    with pytest.raises(ConstraintError, match=r"^\[constraints\] boom$"):
        with provenance("constraints"):
            raise ConstraintError("boom")
    with pytest.raises(KeyError):
        with provenance("constraints"):
            raise KeyError("untouched")


def test_occupation_times_and_histogram():
    ensemble = simulate_paths(ProcessSpec.brownian(), 20, 500, seed=1)
    times = occupation_times(ensemble, 0.0)
    assert np.all((times >= 0.0) & (times <= 1.0))
    # the first step starts at the level
    assert np.all(times >= 0.05)
    weights = np.full(500, 1.0 / 500)
    histogram = shared_histogram("tau", times, 10, times, weights)
    np.testing.assert_allclose(histogram.mass_p, histogram.mass_q)
    assert histogram.mass_p.sum() == pytest.approx(1.0)
    assert len(histogram.edges) == 11


def test_unconstrained_run_returns_reference():
    report = run_pipeline(small_config())
    assert report.result is None
    assert report.converged
    assert report.exit_code == 0
    assert report.kl == 0.0
    assert set(report.histograms) == {"X_T"}
    assert report.histograms["X_T"].mass_q is None
    assert "unchanged" in str(report)


def test_zero_shift_needs_no_tilt():
    report = run_pipeline(small_config(constraints=["mean(shift=0)"]))
    result = report.result
    assert result.converged
    assert report.exit_code == 0
    assert abs(result.eta[0]) <= 1e-8
    assert result.kl <= 1e-6


def test_mc_stress_run():
    report = run_pipeline(small_config(constraints=STRESS))
    result = report.result
    assert result.engine == "mc"
    assert result.converged
    assert np.all(np.abs(result.residual) <= 1e-8)
    # less time below the barrier
    assert result.eta[1] > 0
    assert result.kl > 0
    assert result.weights.sum() == pytest.approx(1.0)
    assert set(report.histograms) == {"X_T", "tau"}
    for histogram in report.histograms.values():
        assert histogram.mass_q.sum() == pytest.approx(1.0)
    assert [row["constraint"] for row in report.sensitivities] == list(result.labels)
    assert "KL divergence" in str(report)


def test_infeasible_target_exit_code():
    with pytest.raises(InfeasibleTargetError) as excinfo:
        run_pipeline(small_config(constraints=["mean(target=100)"]))
    assert str(excinfo.value).startswith("[mc engine]")
    assert excinfo.value.exit_code == 3


def test_bad_constraint_names_stage():
    with pytest.raises(ConstraintError, match=r"^\[constraints\]"):
        run_pipeline(small_config(constraints=["tail(level=0.9)"]))


def test_bad_model_parameters():
    with pytest.raises(ConfigError):
        run_pipeline(small_config(model_params={"kappa": 1.0}))


def test_missing_fitted_model_names_stage(tmp_path):
    config = small_config(model="fitted", model_file=str(tmp_path / "missing.csv"))
    with pytest.raises(EntropicStressError, match=r"^\[fit\]") as excinfo:
        run_pipeline(config)
    assert excinfo.value.exit_code == 4


def test_rerun_is_byte_identical(tmp_path):
    config = small_config(constraints=STRESS, out_dir=str(tmp_path / "run"))
    first = export_report(run_pipeline(config), str(tmp_path / "first"))
    second = export_report(run_pipeline(config), str(tmp_path / "second"))
    assert first == second
    assert "manifest.json" in first
    for name in first:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_pde_stress_run():
    config = small_config(engine="pde", constraints=STRESS, n_paths=20000, n_steps=100,
                          grid_n_x=201, grid_n_t=200)
    report = run_pipeline(config)
    result = report.result
    assert result.engine == "pde"
    assert result.converged
    assert result.iterations <= 50
    assert np.max(np.abs(result.diagnostics['scaled_residual'])) <= 1e-3
    assert np.all(np.abs(result.diagnostics['simulated_residual']) <= 0.05)
    assert result.tilted.log_density is not None
    assert result.diagnostics['path_kl'] > 0

    tau = report.histograms["tau"]
    lowest = max(1, len(tau.mass_p) // 10)
    assert tau.mass_q[:lowest].sum() > tau.mass_p[:lowest].sum()

    # μ - σλ pushes paths up below the barrier
    lam = result.lambda_field
    grid = lam.grid
    early = grid.t <= 0.5 * grid.horizon
    below = (grid.x >= -2.0) & (grid.x <= -0.2)
    assert np.all(lam.values[np.ix_(early, below)] < 0)
    reference_drift = -grid.x
    assert np.all(result.drift_field.values[np.ix_(early, below)] > reference_drift[below])


def test_pde_variance_run_agrees_with_sampled_estimates():
    config = small_config(engine="pde", model="brownian", model_params={"sigma": 1.0},
                          constraints=["mean(target=0)", "second_moment(target=0.5)"],
                          n_paths=20000, n_steps=400, seed=17, grid_n_x=241, grid_n_t=240)
    result = run_pipeline(config).result
    diagnostics = result.diagnostics
    assert result.converged
    # KL of N(0, 1/2) against N(0, 1)
    assert result.kl == pytest.approx(0.5 * (0.5 - 1.0 - np.log(0.5)), abs=1e-3)

    assert abs(result.kl - diagnostics['sample_dual_kl']) <= 3.0 * diagnostics['sample_dual_kl_standard_error']
    assert abs(result.kl - diagnostics['path_kl']) <= 3.0 * diagnostics['path_kl_standard_error']
    residual = np.array(diagnostics['simulated_residual'])
    standard_error = np.array(diagnostics['simulated_standard_error'])
    assert np.all(standard_error > 0)
    assert np.all(np.abs(residual) <= 3.0 * standard_error)
