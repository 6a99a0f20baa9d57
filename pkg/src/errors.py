"""
Exception and warning types shared by every package in the project.

Input problems derive from ValueError and solver problems from RuntimeError,
so callers that only care about the broad category can keep catching those.
"""


class EntropicStressError(Exception):
    """Base class for all errors raised by the project."""

    exit_code = 1


class InputError(EntropicStressError, ValueError):
    """Invalid user input: model, constraint, grid, series or config."""

    exit_code = 4


class ModelSpecError(InputError):
    pass


class ConstraintError(InputError):
    pass


class GridError(InputError):
    pass


class SeriesError(InputError):
    pass


class FitError(InputError):
    pass


class ConfigError(InputError):
    pass


class DomainError(InputError):
    """A closed-form formula was called outside its domain."""


class DegenerateConstraintError(InputError):
    """A constraint column has zero sample variance."""

    def __init__(self, label, column):
        self.label = label
        self.column = column
        super().__init__(
            f"Constraint '{label}' (column {column}) has zero sample variance; "
            f"its multiplier equation is ill-posed")


class FunctionalEvaluationError(InputError):
    """A constraint callable returned a non-finite value."""

    def __init__(self, label, path_index):
        self.label = label
        self.path_index = path_index
        super().__init__(
            f"Constraint '{label}' returned a non-finite value on path {path_index}")


class SolverError(EntropicStressError, RuntimeError):
    pass


class IllConditionedError(SolverError):
    pass


class SingularJacobianError(SolverError):
    pass


class PositivityViolationError(SolverError):
    pass


class ExtrapolationError(SolverError):
    pass


class SimulationDivergedError(SolverError):
    """A simulated path left the divergence bound or became non-finite."""

    def __init__(self, step, path):
        self.step = step
        self.path = path
        super().__init__(f"Simulation diverged at step {step} on path {path}")


class InfeasibleTargetError(SolverError):
    """The constraint targets cannot be reached by an equivalent measure."""

    exit_code = 3


class TiltSaturationWarning(RuntimeWarning):
    pass


class LowEffectiveSampleWarning(RuntimeWarning):
    pass


class DiscretenessWarning(RuntimeWarning):
    pass


class SchemeFallbackWarning(RuntimeWarning):
    pass
