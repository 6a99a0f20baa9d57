import numpy as np
import pytest

from src.analytics.closed_form import brownian_variance_solution
from src.constraints.constraint_set import ConstraintSet
from src.constraints.presets import barrier_time_constraint, mean_constraint, second_moment_constraint
from src.errors import (ConstraintError, ExtrapolationError, GridError, PositivityViolationError,
                        SingularJacobianError)
from src.pde.algorithm import (MultiplierCalibration, calibrate_multipliers, drift_adjustment, smoothed_indicator,
                               solve_omega, solve_running_error, solve_terminal_error,
                               tilted_drift_field)
from src.pde.fields import FieldTX
from src.pde.grid import Grid
from src.pde.theta_scheme import spatial_operator, theta_solve


def zero(x):
    return np.zeros_like(x)


def one(x):
    return np.ones_like(x)


@pytest.fixture
def variance_constraints():
    return ConstraintSet((mean_constraint(0.0), second_moment_constraint(0.5)))


def test_grid_validation():
    with pytest.raises(GridError):
        Grid(1.0, 0.0, 10, 10, 1.0)
    with pytest.raises(GridError):
        Grid(0.0, 1.0, 2, 10, 1.0)
    with pytest.raises(GridError):
        Grid.around(0.0, 0.0, 1.0)
    grid = Grid.around(1.0, 0.5, 4.0, n_x=11, n_t=20, stds=2.0)
    assert (grid.x_min, grid.x_max) == (-1.0, 3.0)
    assert grid.refined().n_x == 21
    assert Grid.from_dict(grid.to_dict()) == grid


def test_grid_margin():
    grid = Grid(-2.0, 2.0, 41, 10, 1.0)
    grid.check_margin(0.0, 0.5)
    with pytest.raises(GridError):
        grid.check_margin(0.0, 1.0)


def test_operator_annihilates_constants():
    drift = np.linspace(-3.0, 3.0, 9)
    lower, diagonal, upper = spatial_operator(drift, 0.5 * np.ones(9), 0.1)
    np.testing.assert_allclose(lower + diagonal + upper, 0.0, atol=1e-12)
    lower, diagonal, upper = spatial_operator(100.0 * drift, 0.5 * np.ones(9), 0.1)
    np.testing.assert_allclose(lower + diagonal + upper, 0.0, atol=1e-9)
    assert np.all(lower[1:] >= 0) and np.all(upper[:-1] >= 0)


def test_pure_discount():
    grid = Grid(-1.0, 1.0, 5, 2000, 1.0)
    values = theta_solve(grid, np.ones(5), np.zeros(5), 0.5 * np.ones(5), potential=0.5 * np.ones(5))
    np.testing.assert_allclose(values[0], np.exp(-0.5), rtol=1e-7)
    np.testing.assert_allclose(values[-1], 1.0)


def test_theta_range_checked():
    grid = Grid(-1.0, 1.0, 5, 10, 1.0)
    with pytest.raises(GridError):
        theta_solve(grid, np.ones(5), np.zeros(5), np.ones(5), theta=1.5)
    with pytest.raises(GridError):
        theta_solve(grid, np.ones(4), np.zeros(5), np.ones(5))


def heat_error(n_x, n_t):
    grid = Grid(-10.0, 10.0, n_x, n_t, 1.0)
    x = grid.x
    values = theta_solve(grid, np.exp(-0.5 * x ** 2), np.zeros(n_x), 0.5 * np.ones(n_x))
    exact = np.exp(-x ** 2 / 4.0) / np.sqrt(2.0)
    window = np.abs(x) <= 3.0
    return np.max(np.abs(values[0] - exact)[window])


def test_heat_equation_matches_gaussian_convolution():
    assert heat_error(401, 400) < 1e-3


def test_heat_equation_second_order_refinement():
    assert heat_error(81, 80) / heat_error(161, 160) >= 3.0


def test_zero_multipliers_give_unit_omega(variance_constraints):
    grid = Grid(-4.0, 4.0, 81, 40, 1.0)
    omega = solve_omega(grid, zero, one, [0.0, 0.0], [], variance_constraints)
    np.testing.assert_allclose(omega.values, 1.0, atol=1e-12)
    lam = drift_adjustment(omega, one)
    np.testing.assert_allclose(lam.values, 0.0, atol=1e-10)


@pytest.mark.parametrize("eta", [-0.7, 0.5])
def test_omega_matches_feynman_kac(eta):
    grid = Grid(-8.0, 8.0, 321, 320, 1.0)
    constraints = ConstraintSet((mean_constraint(0.2),))
    omega = solve_omega(grid, zero, one, [eta], [], constraints)
    # E[exp(-eta (x + W_{T-t} - c))]
    exact = np.exp(-eta * (grid.x[None, :] - 0.2) + 0.5 * eta ** 2 * (grid.horizon - grid.t[:, None]))
    window = np.abs(grid.x) <= 2.0
    np.testing.assert_allclose(omega.values[:, window], exact[:, window], rtol=1e-3)


def test_omega_multiplier_blocks_checked(variance_constraints):
    grid = Grid(-4.0, 4.0, 81, 40, 1.0)
    with pytest.raises(ConstraintError):
        solve_omega(grid, zero, one, [0.0], [], variance_constraints)


def test_degenerate_volatility_rejected(variance_constraints):
    grid = Grid(-4.0, 4.0, 81, 40, 1.0)
    with pytest.raises(GridError):
        solve_omega(grid, zero, zero, [0.0, 0.0], [], variance_constraints)


def test_lambda_matches_variance_closed_form(variance_constraints):
    grid = Grid(-6.0, 6.0, 801, 800, 1.0)
    omega = solve_omega(grid, zero, one, [0.0, 0.5], [], variance_constraints)
    lam = drift_adjustment(omega, one)
    exact = brownian_variance_solution(0.5, 1.0)
    window = np.abs(grid.x) <= 2.0
    np.testing.assert_allclose(lam.values[0, window], exact.lambda_field(0.0, grid.x[window]), atol=1e-3)
    drift = tilted_drift_field(grid, zero, one, lam)
    np.testing.assert_allclose(drift.values, -lam.values)


def lambda_error(constraints, n_x, n_t):
    grid = Grid(-6.0, 6.0, n_x, n_t, 1.0)
    omega = solve_omega(grid, zero, one, [0.0, 0.5], [], constraints)
    lam = drift_adjustment(omega, one)
    window = np.abs(grid.x) <= 2.0
    exact = brownian_variance_solution(0.5, 1.0).lambda_field(0.0, grid.x[window])
    return np.max(np.abs(lam.values[0, window] - exact))


def test_lambda_refinement(variance_constraints):
    coarse = lambda_error(variance_constraints, 81, 80)
    fine = lambda_error(variance_constraints, 161, 160)
    assert coarse / fine >= 3.0


def test_terminal_error_under_reference():
    grid = Grid(-6.0, 6.0, 241, 100, 1.0)
    constraints = ConstraintSet((mean_constraint(0.2),))
    untilted = FieldTX(np.zeros(grid.shape), grid, "lambda")
    k = solve_terminal_error(grid, zero, one, untilted, constraints)
    assert k.is_vector
    assert k.initial_value(1.0)[0] == pytest.approx(0.8, abs=1e-6)


def test_running_error_counts_time_below_level():
    grid = Grid(-6.0, 6.0, 241, 200, 1.0)
    constraints = ConstraintSet((), (barrier_time_constraint(0.0, 0.3),))
    untilted = FieldTX(np.zeros(grid.shape), grid, "lambda")
    ell = solve_running_error(grid, zero, one, untilted, constraints)
    # symmetric about the level
    assert ell.initial_value(0.0)[0] == pytest.approx(0.5, abs=2e-3)
    assert ell.initial_value(-3.0)[0] > 0.95


def test_smoothed_indicator():
    x = np.array([-1.0, 0.0, 1.0])
    values = smoothed_indicator(x, 0.0, 0.1)
    assert values[0] == pytest.approx(1.0)
    assert values[1] == pytest.approx(0.5)
    assert values[2] == pytest.approx(0.0, abs=1e-12)


def test_calibration_recovers_variance_multipliers(variance_constraints):
    grid = Grid(-6.0, 6.0, 241, 240, 1.0)
    eta, lam, report = calibrate_multipliers(grid, zero, one, variance_constraints, 0.0,
                                             tol=1e-6, threads=2)
    assert report.converged
    np.testing.assert_allclose(eta, [0.0, 0.5], atol=1e-2)
    # KL of N(0, 1/2) against N(0, 1)
    assert report.kl == pytest.approx(0.5 * (0.5 - 1.0 - np.log(0.5)), abs=1e-3)
    assert lam.label == "lambda"
    summary = report.to_dict()
    assert summary['residual_history'][-1] <= 1e-6
    assert len(summary['eta']) == 2


def test_jacobian_halves_bump_after_positivity_loss(variance_constraints, monkeypatch):
    grid = Grid(-6.0, 6.0, 121, 120, 1.0)
    calibration = MultiplierCalibration(grid, zero, one, variance_constraints, 0.0, threads=1)
    eta = np.array([0.0, 0.5])
    base = calibration.evaluate(eta)['scaled']
    reference = calibration.jacobian(eta, base)

    evaluate = calibration.evaluate

    def fragile(point):
        if point[0] - eta[0] > 0.75 * calibration.bump:
            raise PositivityViolationError("omega is not strictly positive on the grid")
        return evaluate(point)

    monkeypatch.setattr(calibration, "evaluate", fragile)
    jacobian = calibration.jacobian(eta, base)
    assert np.all(np.isfinite(jacobian))
    np.testing.assert_allclose(jacobian, reference, rtol=1e-2, atol=1e-3)


def test_jacobian_reports_column_that_cannot_be_formed(variance_constraints, monkeypatch):
    grid = Grid(-6.0, 6.0, 121, 120, 1.0)
    calibration = MultiplierCalibration(grid, zero, one, variance_constraints, 0.0, threads=1)
    eta = np.array([0.0, 0.5])
    base = calibration.evaluate(eta)['scaled']
    evaluate = calibration.evaluate

    def fragile(point):
        if point[1] != eta[1]:
            raise PositivityViolationError("omega is not strictly positive on the grid")
        return evaluate(point)

    monkeypatch.setattr(calibration, "evaluate", fragile)
    with pytest.raises(SingularJacobianError) as excinfo:
        calibration.jacobian(eta, base)
    assert variance_constraints.labels[1] in str(excinfo.value)


def test_calibration_needs_margin(variance_constraints):
    grid = Grid(-2.0, 2.0, 41, 40, 1.0)
    with pytest.raises(GridError):
        calibrate_multipliers(grid, zero, one, variance_constraints, 0.0)


def test_field_interpolation_and_csv(tmp_path):
    grid = Grid(0.0, 1.0, 3, 2, 1.0)
    field = FieldTX(np.array([[0.0, 1.0, 2.0], [1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]), grid, "lambda")
    np.testing.assert_allclose(field.interpolate(0.25, np.array([0.25, 2.0])), [1.0, 2.5])
    with pytest.raises(ExtrapolationError):
        field.interpolate(0.0, np.array([2.0]), clamp=False)
    path = field.to_csv(str(tmp_path / "lambda_grid.csv"))
    loaded = FieldTX.from_csv(path)
    np.testing.assert_array_equal(loaded.values, field.values)
    assert loaded.grid == grid
    with pytest.raises(GridError):
        FieldTX.from_csv(str(tmp_path / "missing.csv"))


def test_field_validation():
    grid = Grid(0.0, 1.0, 3, 2, 1.0)
    with pytest.raises(GridError):
        FieldTX(np.zeros((2, 3)), grid, "lambda")
    with pytest.raises(GridError):
        FieldTX(np.zeros((3, 3)), grid, "speed")
    with pytest.raises(PositivityViolationError):
        FieldTX(np.zeros((3, 3)), grid, "omega")
