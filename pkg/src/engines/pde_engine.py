import logging

import numpy as np

from src.constraints.functionals import evaluate_functionals, sample_moments
from src.engines.base_engine import BaseEngine, EngineResult
from src.model.process import TiltFields
from src.pde.algorithm import DEFAULT_TOL, calibrate_multipliers, tilted_drift_field
from src.pde.grid import Grid
from src.simulation.tilted_simulator import simulate_tilted_paths
from src.tilting.solver import dual_kl

logger = logging.getLogger(__name__)


class PdeEngine(BaseEngine):
    """
    Grid engine for one-dimensional diffusions.

    Residuals are standardised by the reference-sample standard deviations
    of the constraint functionals. After calibration the optimal measure is
    represented by paths simulated with the grid drift control, drawn from
    the same substreams as the reference paths.
    """

    name = "pde"
    default_tol = DEFAULT_TOL

    def build_grid(self, spec, sigma):
        x0 = float(spec.initial_state[0])
        sigma0 = float(np.asarray(sigma(np.array([x0])), dtype=float).ravel()[0])
        return Grid.around(x0, sigma0, spec.horizon, n_x=self.config.grid_n_x,
                           n_t=self.config.grid_n_t, stds=self.config.grid_stds)

    def solve(self, spec, constraints, reference):
        mu, sigma = spec.scalar_coefficients()
        grid = self.build_grid(spec, sigma)
        reference_samples = evaluate_functionals(reference, constraints)
        _, covariance = sample_moments(reference_samples)
        scales = np.sqrt(np.diag(covariance))

        eta, lambda_field, report = calibrate_multipliers(
            grid, mu, sigma, constraints, float(spec.initial_state[0]),
            tol=self.tol, max_outer=int(self.config.max_outer), scales=scales,
            theta=float(self.config.theta), smoothing=bool(self.config.smoothing))

        config = self.config
        tilted = simulate_tilted_paths(spec, TiltFields(lambda_field), int(config.n_steps),
                                       int(config.n_paths), int(config.seed),
                                       block_size=int(config.block_size))
        simulated = evaluate_functionals(tilted, constraints)
        path_kl = float(np.mean(tilted.log_density))
        path_kl_se = float(np.std(tilted.log_density, ddof=1) / np.sqrt(tilted.n_paths))
        sample_kl, sample_kl_se = dual_kl(reference_samples, eta)
        logger.info("Grid calibration %s after %d outer iterations, KL %.6g (path estimate %.6g)",
                    "converged" if report.converged else "did not converge",
                    report.iterations, report.kl, path_kl)

        diagnostics = report.to_dict()
        diagnostics.update({
            'grid': grid.to_dict(),
            'residual_scales': [float(v) for v in scales],
            'path_kl': path_kl,
            'path_kl_standard_error': path_kl_se,
            'sample_dual_kl': sample_kl,
            'sample_dual_kl_standard_error': sample_kl_se,
            'simulated_residual': [float(v) for v in simulated.values.mean(axis=0) - simulated.targets],
            'simulated_standard_error': [float(v) for v in
                                         simulated.values.std(axis=0, ddof=1) / np.sqrt(simulated.n_paths)],
        })
        return EngineResult(
            engine=self.name,
            eta=eta,
            labels=constraints.labels,
            targets=constraints.targets,
            residual=report.residual,
            kl=report.kl,
            converged=report.converged,
            iterations=report.iterations,
            tilted=tilted,
            lambda_field=lambda_field,
            drift_field=tilted_drift_field(grid, mu, sigma, lambda_field),
            diagnostics=diagnostics,
        )
