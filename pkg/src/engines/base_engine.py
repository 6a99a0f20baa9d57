from dataclasses import dataclass, field


@dataclass
class EngineResult:
    """
    Outcome of one engine solve.

    Attributes:
        engine (str): Engine name
        eta (ndarray): Multipliers, terminal block then running block
        labels (tuple): Constraint labels
        targets (ndarray): Constraint targets
        residual (ndarray): Constraint errors at the solution
        kl (float): KL divergence of the optimal measure
        converged (bool): Whether the tolerance was reached
        iterations (int): Newton or outer iterations used
        tilted (PathEnsemble): Paths representing the optimal measure
        weights (ndarray, optional): Probability weights of ``tilted``; None for equal weights
        ess (float, optional): Effective sample size of ``weights``
        lambda_field (FieldTX, optional): Drift control on the grid
        drift_field (FieldTX, optional): Drift under the optimal measure
        diagnostics (dict): Engine-specific diagnostics for the manifest
    """
    engine: str
    eta: object
    labels: tuple
    targets: object
    residual: object
    kl: float
    converged: bool
    iterations: int
    tilted: object
    weights: object = None
    ess: float = None
    lambda_field: object = None
    drift_field: object = None
    diagnostics: dict = field(default_factory=dict)


class BaseEngine:
    """
    Base class for engines that find the minimal-KL measure under a constraint set.
    """

    name = None
    default_tol = None

    def __init__(self, config):
        """
        Initialize the engine.

        Args:
            config (RunConfig): Run settings
        """
        self.config = config

    @property
    def tol(self):
        return self.default_tol if self.config.tol is None else float(self.config.tol)

    def solve(self, spec, constraints, reference):
        """
        Find the optimal multipliers and a representation of the optimal measure.

        Args:
            spec (ProcessSpec): Reference model
            constraints (ConstraintSet): Resolved constraints
            reference (PathEnsemble): Paths simulated under the reference measure

        Returns:
            EngineResult: The engine outcome
        """
        raise NotImplementedError("Subclasses must implement solve()")
