import logging

from src.constraints.functionals import evaluate_functionals
from src.engines.base_engine import BaseEngine, EngineResult
from src.tilting.solver import DEFAULT_TOL, solve_multipliers

logger = logging.getLogger(__name__)


class MonteCarloEngine(BaseEngine):
    """
    Exponential tilting of the reference paths.

    The optimal measure is represented by the reference ensemble itself,
    reweighted by the RN weights of the dual solution.
    """

    name = "mc"
    default_tol = DEFAULT_TOL

    def solve(self, spec, constraints, reference):
        samples = evaluate_functionals(reference, constraints)
        solution = solve_multipliers(samples, tol=self.tol, max_iter=int(self.config.max_iter))
        logger.info("Sample tilt %s after %d iterations, KL %.6g, ESS %.1f",
                    "converged" if solution.converged else "did not converge",
                    solution.iterations, solution.kl, solution.ess)
        return EngineResult(
            engine=self.name,
            eta=solution.eta,
            labels=samples.labels,
            targets=samples.targets,
            residual=solution.residual,
            kl=solution.kl,
            converged=solution.converged,
            iterations=solution.iterations,
            tilted=reference,
            weights=solution.weights,
            ess=solution.ess,
            diagnostics={
                'ess': float(solution.ess),
                'ess_fraction': float(solution.ess / samples.n_paths),
                'tilted_means': [float(v) for v in solution.tilted_means],
            },
        )
