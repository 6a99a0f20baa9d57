"""
End-to-end stress run: reference model, reference paths, constraint
resolution, engine solve, histograms and sensitivity tables.
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from src.calibration.fit import FittedModel, fit_drift_vol
from src.calibration.series import SeriesData
from src.constraints.functionals import evaluate_functionals
from src.constraints.presets import build_constraint_set, parse_constraint
from src.engines.mc_engine import MonteCarloEngine
from src.engines.pde_engine import PdeEngine
from src.errors import ConfigError, EntropicStressError, IllConditionedError
from src.model.process import ProcessSpec
from src.sensitivity.distortion import DistortionWeight
from src.sensitivity.entropic import distortion_entropic_derivative, entropic_derivative
from src.simulation.simulator import simulate_paths

logger = logging.getLogger(__name__)

ENGINES = {
    MonteCarloEngine.name: MonteCarloEngine,
    PdeEngine.name: PdeEngine,
}
SENSITIVITY_TVAR_LEVEL = 0.9


@contextmanager
def provenance(stage):
    """Prefix project errors raised inside the block with ``[stage]``."""
    try:
        yield
    except EntropicStressError as exc:
        exc.args = (f"[{stage}] {exc}",)
        raise


@dataclass(frozen=True)
class Histogram:
    """Masses of a quantity under the reference and the optimal measure on shared bins."""
    name: str
    edges: object
    mass_p: object
    mass_q: object = None


@dataclass
class RunReport:
    """
    Everything a stress run produced.

    ``result`` is None when the run had no constraints; the reference
    measure is then optimal and only P histograms are produced.
    """
    config: object
    reference: object
    result: object = None
    fitted_model: FittedModel = None
    histograms: dict = field(default_factory=dict)
    sensitivities: list = field(default_factory=list)

    @property
    def converged(self):
        return self.result is None or bool(self.result.converged)

    @property
    def exit_code(self):
        return 0 if self.converged else 2

    @property
    def kl(self):
        return 0.0 if self.result is None else float(self.result.kl)

    def __str__(self):
        lines = ["Stress Run Summary", "==================", ""]
        lines.append(f"Engine: {self.config.engine}")
        lines.append(f"Reference paths: {self.reference.n_paths} x {self.reference.n_steps} steps")
        if self.result is None:
            lines.append("No constraints: the reference measure is returned unchanged")
            return "\n".join(lines)
        result = self.result
        lines.append(f"Status: {'converged' if result.converged else 'NOT converged'} "
                     f"after {result.iterations} iterations")
        lines.append(f"KL divergence: {result.kl:.6g}")
        if result.ess is not None:
            lines.append(f"Effective sample size: {result.ess:.1f} of {self.reference.n_paths}")
        lines.append("")
        lines.append(f"{'constraint':<40} {'target':>12} {'eta':>14} {'residual':>12}")
        for label, target, eta, residual in zip(result.labels, result.targets, result.eta,
                                                result.residual):
            lines.append(f"{label:<40} {target:12.6g} {eta:14.8g} {residual:12.3e}")
        if self.sensitivities:
            lines.append("")
            lines.append("Entropic sensitivities (per unit shift of each target):")
            for row in self.sensitivities:
                lines.append(f"  {row['constraint']}: d mean(X_T) = {row['mean']:.6g}, "
                             f"d TVaR = {row['tvar']:.6g}")
        return "\n".join(lines)


def build_reference_model(config):
    """
    Reference model of a run.

    Returns:
        tuple: (ProcessSpec, FittedModel or None)
    """
    if config.model == "fitted":
        with provenance("fit"):
            if config.model_file:
                fitted = FittedModel.from_csv(config.model_file)
            else:
                fitted = fit_drift_vol(SeriesData.from_csv(config.series_file), int(config.n_bins))
        return fitted.to_process_spec(float(config.x0), float(config.horizon)), fitted

    builder = ProcessSpec.brownian if config.model == "brownian" else ProcessSpec.ornstein_uhlenbeck
    try:
        spec = builder(x0=float(config.x0), horizon=float(config.horizon), **config.model_params)
    except TypeError as exc:
        raise ConfigError(f"Invalid parameters for model '{config.model}': {exc}") from exc
    return spec, None


def occupation_times(ensemble, level, component=0):
    """Time each path spends at or below ``level`` (left-Riemann sum)."""
    below = ensemble.states[:, :-1, component] <= level
    return below.astype(float) @ ensemble.time_steps


def shared_histogram(name, reference_values, bins, tilted_values=None, weights=None):
    """
    Histogram of a quantity under P and, when given, under Q on common bin edges.

    Args:
        name (str): Quantity name
        reference_values (ndarray): Samples under P, equally weighted
        bins (int): Number of bins
        tilted_values (ndarray, optional): Samples under Q
        weights (ndarray, optional): Probability weights of ``tilted_values``

    Returns:
        Histogram: Bin edges and masses
    """
    pooled = reference_values if tilted_values is None else np.concatenate([reference_values, tilted_values])
    edges = np.histogram_bin_edges(pooled, bins=bins)
    mass_p, _ = np.histogram(reference_values, bins=edges)
    mass_p = mass_p / len(reference_values)
    mass_q = None
    if tilted_values is not None:
        if weights is None:
            weights = np.full(len(tilted_values), 1.0 / len(tilted_values))
        mass_q, _ = np.histogram(tilted_values, bins=edges, weights=weights)
    return Histogram(name, edges, mass_p, mass_q)


def _barrier_request(requests):
    for request in requests:
        if request.name == "barrier_time":
            return request
    return None


def build_histograms(config, requests, reference, result=None):
    bins = int(config.histogram_bins)
    tilted = None if result is None else result.tilted
    weights = None if result is None else result.weights
    histograms = {
        'X_T': shared_histogram('X_T', reference.terminal[:, 0], bins,
                                None if tilted is None else tilted.terminal[:, 0], weights),
    }
    barrier = _barrier_request(requests)
    if barrier is not None:
        level, component = barrier.params["level"], barrier.component
        histograms['tau'] = shared_histogram(
            'tau', occupation_times(reference, level, component), bins,
            None if tilted is None else occupation_times(tilted, level, component), weights)
    return histograms


def sensitivity_table(reference, constraints, level=SENSITIVITY_TVAR_LEVEL):
    """
    Entropic derivatives of E[X_T] and TVaR_level(X_T) along each constraint direction.

    Returns:
        list: One dict per constraint; empty when the constraint covariance is singular
    """
    functionals = evaluate_functionals(reference, constraints)
    terminal = reference.terminal[:, 0]
    gamma = DistortionWeight.tvar(level)
    rows = []
    try:
        for j, label in enumerate(functionals.labels):
            delta = np.zeros(functionals.size)
            delta[j] = 1.0
            rows.append({
                'constraint': label,
                'mean': entropic_derivative(functionals, terminal, delta),
                'tvar': distortion_entropic_derivative(functionals, terminal, delta, gamma),
            })
    except IllConditionedError as exc:
        logger.warning("Skipping sensitivities: %s", exc)
        return []
    return rows


def run_pipeline(config):
    """
    Run a stress test as configured.

    Args:
        config (RunConfig): Run settings

    Returns:
        RunReport: The run outcome; ``exit_code`` is 2 when the engine did not converge
    """
    config.validate()
    spec, fitted = build_reference_model(config)

    with provenance("simulation"):
        reference = simulate_paths(spec, int(config.n_steps), int(config.n_paths), int(config.seed),
                                   block_size=int(config.block_size))

    with provenance("constraints"):
        requests = [parse_constraint(text) for text in config.constraints]
        if not requests:
            logger.info("No constraints given; returning the reference measure")
            return RunReport(config, reference, None, fitted,
                             build_histograms(config, requests, reference))
        constraints = build_constraint_set(requests, spec.dim_state, reference)

    engine = ENGINES[config.engine](config)
    with provenance(f"{engine.name} engine"):
        result = engine.solve(spec, constraints, reference)

    with provenance("sensitivity"):
        sensitivities = sensitivity_table(reference, constraints)

    return RunReport(config, reference, result, fitted,
                     build_histograms(config, requests, reference, result), sensitivities)
