import numpy as np
from dataclasses import dataclass, field, replace

from src.errors import ConstraintError

PROBE_POINTS = np.array([-3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0])


@dataclass(frozen=True)
class TerminalConstraint:
    """
    Expectation constraint E[f(X_T)] = target.

    ``function`` maps states of shape (N, n) to values of shape (N,).
    ``threshold`` is set for indicator functions 1{x_component <= threshold};
    the PDE engine smooths those instead of evaluating them pointwise.
    """
    function: object
    target: float
    label: str
    threshold: float = None
    component: int = 0

    @property
    def is_indicator(self):
        return self.threshold is not None

    def __call__(self, x):
        return np.asarray(self.function(x), dtype=float)


@dataclass(frozen=True)
class RunningConstraint:
    """Expectation constraint E[∫ g(X_s) ds] = target."""
    function: object
    target: float
    label: str
    threshold: float = None
    component: int = 0

    @property
    def is_indicator(self):
        return self.threshold is not None

    def __call__(self, x):
        return np.asarray(self.function(x), dtype=float)


@dataclass(frozen=True)
class ConstraintSet:
    """
    Terminal constraints followed by running constraints.

    The column order of every sample matrix built from a ConstraintSet is
    the terminal block first, then the running block.
    """
    terminal: tuple = ()
    running: tuple = ()
    dim_state: int = 1
    labels: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "terminal", tuple(self.terminal))
        object.__setattr__(self, "running", tuple(self.running))
        if self.size < 1:
            raise ConstraintError("A constraint set needs at least one terminal or running constraint")
        labels = tuple(constraint.label for constraint in self.constraints)
        if len(set(labels)) != len(labels):
            raise ConstraintError(f"Constraint labels must be unique, got {labels}")
        object.__setattr__(self, "labels", labels)
        self._probe()

    def _probe(self):
        points = np.tile(PROBE_POINTS[:, None], (1, self.dim_state))
        for constraint in self.constraints:
            try:
                values = constraint(points)
            except Exception as exc:
                raise ConstraintError(f"Constraint '{constraint.label}' failed on probe points: {exc}") from exc
            if values.shape != (len(points),) or not np.all(np.isfinite(values)):
                raise ConstraintError(
                    f"Constraint '{constraint.label}' must return finite values of shape (N,)")
            if not np.isfinite(constraint.target):
                raise ConstraintError(f"Constraint '{constraint.label}' has a non-finite target")

    @property
    def constraints(self):
        return self.terminal + self.running

    @property
    def size(self):
        return len(self.terminal) + len(self.running)

    @property
    def n_terminal(self):
        return len(self.terminal)

    @property
    def n_running(self):
        return len(self.running)

    @property
    def targets(self):
        return np.array([constraint.target for constraint in self.constraints], dtype=float)

    def with_targets(self, targets):
        """Copy of the set with new targets, in column order."""
        targets = np.asarray(targets, dtype=float)
        if targets.shape != (self.size,):
            raise ConstraintError(f"Expected {self.size} targets, got shape {targets.shape}")
        terminal = tuple(replace(c, target=float(t)) for c, t in zip(self.terminal, targets))
        running = tuple(replace(c, target=float(t))
                        for c, t in zip(self.running, targets[self.n_terminal:]))
        return ConstraintSet(terminal, running, self.dim_state)

    def __str__(self):
        lines = []
        for kind, block in (("terminal", self.terminal), ("running", self.running)):
            for constraint in block:
                lines.append(f"  {constraint.label} ({kind}): target {constraint.target:.6g}")
        return "Constraints:\n" + "\n".join(lines)
