import numpy as np
import pytest

from src.constraints.functionals import FunctionalSamples
from src.errors import DiscretenessWarning, DomainError, IllConditionedError
from src.sensitivity.distortion import (DistortionWeight, distortion_value,
                                        finite_difference_tvar_sensitivity,
                                        subportfolio_tvar_sensitivity, tvar)
from src.sensitivity.entropic import distortion_entropic_derivative, entropic_derivative
from src.tilting.solver import solve_multipliers


@pytest.fixture
def portfolio(rng):
    n = 100_000
    x1 = rng.standard_normal(n)
    x2 = 0.5 * x1 + rng.standard_normal(n)
    return x1, x2


def test_tvar_of_standard_normal(rng):
    samples = rng.standard_normal(1_000_000)
    assert tvar(samples, 0.9) == pytest.approx(1.7550, rel=0.01)


def test_mean_weight_gives_sample_mean(rng):
    samples = rng.standard_normal(1000)
    assert distortion_value(samples, DistortionWeight.mean()) == pytest.approx(samples.mean())
    weights = rng.uniform(size=1000)
    weights /= weights.sum()
    assert distortion_value(samples, DistortionWeight.mean(), weights) == pytest.approx(weights @ samples)


def test_tvar_at_zero_is_mean():
    samples = np.array([3.0, 1.0, 2.0, 6.0])
    assert tvar(samples, 0.0) == pytest.approx(3.0)
    assert tvar(samples, 0.75) == pytest.approx(6.0)
    assert tvar(samples, 0.5) == pytest.approx(4.5)


def test_numeric_cumulative_weight():
    gamma = DistortionWeight(lambda u: 2.0 * np.asarray(u), name="linear")
    samples = np.array([0.0, 1.0])
    # Γ(u) = u², so the upper sample carries mass 3/4
    assert distortion_value(samples, gamma) == pytest.approx(0.75, abs=1e-6)


def test_weight_validation():
    with pytest.raises(DomainError):
        DistortionWeight(lambda u: 2.0 * np.ones_like(u), name="double")
    with pytest.raises(DomainError):
        DistortionWeight(lambda u: 2.0 - 4.0 * np.asarray(u), name="negative")
    with pytest.raises(DomainError):
        DistortionWeight.tvar(1.0)


def test_subportfolio_sensitivity_matches_finite_difference(portfolio):
    x1, x2 = portfolio
    analytic = subportfolio_tvar_sensitivity(x1, x2, 0.9)
    assert finite_difference_tvar_sensitivity(x1, x2, 0.9) == pytest.approx(analytic, abs=1e-2)


def test_var_constraint_derivative_matches_subportfolio_sensitivity(portfolio):
    x1, x2 = portfolio
    beta = 0.9
    total = x1 + x2
    level = np.quantile(total, beta)
    functionals = FunctionalSamples((total <= level).astype(float), [beta])
    derivative = entropic_derivative(functionals, x1, [beta])
    sensitivity = subportfolio_tvar_sensitivity(x1, x2, beta)
    standard_error = x1.std() / np.sqrt(len(x1) * (1.0 - beta))
    assert derivative == pytest.approx(-sensitivity, abs=3.0 * np.sqrt(2.0) * standard_error)


def test_mean_shift_moves_tvar_one_for_one(rng):
    x = rng.standard_normal(200_000)
    functionals = FunctionalSamples(x, [x.mean()])
    gamma = DistortionWeight.tvar(0.9)
    derivative = distortion_entropic_derivative(functionals, x, [1.0], gamma)
    assert derivative == pytest.approx(1.0, abs=0.05)

    eps = 0.05
    values = []
    for sign in (1.0, -1.0):
        solution = solve_multipliers(functionals.with_targets([x.mean() + sign * eps]))
        values.append(distortion_value(x, gamma, solution.weights))
    finite_difference = (values[0] - values[1]) / (2.0 * eps)
    assert finite_difference == pytest.approx(derivative, abs=0.05)


def test_unit_weight_reduces_to_covariance(rng):
    x = rng.standard_normal(5000)
    target = x + 0.3 * rng.standard_normal(5000)
    functionals = FunctionalSamples(np.column_stack([x, x ** 2]), [0.0, 1.0])
    for delta in ([1.0, 0.0], [0.3, -0.7]):
        distortion = distortion_entropic_derivative(functionals, target, delta, DistortionWeight.mean())
        covariance = entropic_derivative(functionals, target, delta)
        assert distortion == pytest.approx(covariance, rel=1e-10, abs=1e-12)


def test_discrete_target_warns(rng):
    x = rng.standard_normal(1000)
    functionals = FunctionalSamples(x, [0.0])
    with pytest.warns(DiscretenessWarning):
        distortion_entropic_derivative(functionals, np.round(x), [1.0], DistortionWeight.tvar(0.5))


def test_singular_covariance(rng):
    x = rng.standard_normal(1000)
    functionals = FunctionalSamples(np.column_stack([x, 2.0 * x]), [0.0, 0.0])
    with pytest.raises(IllConditionedError):
        entropic_derivative(functionals, x, [1.0, 0.0])
    with pytest.raises(ValueError):
        entropic_derivative(FunctionalSamples(x, [0.0]), x, [1.0, 0.0])
