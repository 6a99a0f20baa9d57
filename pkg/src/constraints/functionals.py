import numpy as np
from dataclasses import dataclass

from src.errors import ConstraintError, DegenerateConstraintError, FunctionalEvaluationError


@dataclass(frozen=True)
class FunctionalSamples:
    """
    Constraint functionals evaluated on every path.

    Attributes:
        values (ndarray): Shape (n_paths, r), terminal columns then running columns
        targets (ndarray): Shape (r,)
        labels (tuple): Column labels
        source (PathEnsemble, optional): Ensemble the values were computed from
    """
    values: object
    targets: object
    labels: tuple = ()
    source: object = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        targets = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if values.ndim != 2 or values.shape[1] != targets.shape[0]:
            raise ConstraintError(
                f"Sample matrix of shape {values.shape} does not match {targets.shape[0]} targets")
        if values.shape[0] < 1:
            raise ConstraintError("Functional samples need at least one path")
        labels = tuple(self.labels) or tuple(f"c{j}" for j in range(values.shape[1]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "labels", labels)

    @property
    def n_paths(self):
        return self.values.shape[0]

    @property
    def size(self):
        return self.values.shape[1]

    @property
    def centered(self):
        """The constraint gaps 𝔉 - targets."""
        return self.values - self.targets[None, :]

    def with_targets(self, targets):
        return FunctionalSamples(self.values, targets, self.labels, self.source)


def _checked(constraint, values, path_offset=0):
    finite = np.isfinite(values)
    if not np.all(finite):
        raise FunctionalEvaluationError(constraint.label, path_offset + int(np.argmax(~finite)))
    return values


def evaluate_functionals(ensemble, constraints):
    """
    Evaluate the constraint functionals on an ensemble.

    Terminal columns are f_j(X_T); running columns are left-Riemann sums
    Σ_k g_i(X_{t_k}) Δt_k.

    Args:
        ensemble (PathEnsemble): Simulated paths
        constraints (ConstraintSet): Constraints to evaluate

    Returns:
        FunctionalSamples: Sample matrix with targets
    """
    if ensemble.n_paths < 1:
        raise ConstraintError("Cannot evaluate functionals on an empty ensemble")
    if ensemble.dim != constraints.dim_state:
        raise ConstraintError(
            f"Constraints expect {constraints.dim_state}-dimensional states, ensemble has {ensemble.dim}")

    columns = []
    terminal = ensemble.terminal
    for constraint in constraints.terminal:
        columns.append(_checked(constraint, constraint(terminal)))

    dt = ensemble.time_steps
    for constraint in constraints.running:
        total = np.zeros(ensemble.n_paths)
        for k, step in enumerate(dt):
            total += _checked(constraint, constraint(ensemble.states[:, k, :])) * step
        columns.append(total)

    return FunctionalSamples(np.column_stack(columns), constraints.targets,
                             constraints.labels, ensemble)


def sample_moments(samples):
    """
    Unbiased sample mean and covariance of the functionals.

    Returns:
        tuple: (mean of shape (r,), symmetric covariance of shape (r, r))
    """
    if samples.n_paths < 2:
        raise ConstraintError("Sample moments need at least two paths")
    values = samples.values
    for column in range(samples.size):
        if np.ptp(values[:, column]) == 0.0:
            raise DegenerateConstraintError(samples.labels[column], column)
    mean = values.mean(axis=0)
    covariance = np.atleast_2d(np.cov(values, rowvar=False, ddof=1))
    return mean, 0.5 * (covariance + covariance.T)
