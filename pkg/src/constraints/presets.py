"""
Named constraint presets and the ``name(key=value,...)`` request grammar.

Relative requests (``shift``, ``scale``) are resolved against reference
values computed on an ensemble simulated under the reference measure.
"""
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from src.constraints.constraint_set import ConstraintSet, RunningConstraint, TerminalConstraint
from src.errors import ConstraintError

logger = logging.getLogger(__name__)

PRESETS = ("var", "mean", "second_moment", "barrier_time")
ALLOWED_KEYS = {
    "var": {"level", "quantile", "shift", "scale", "component"},
    "mean": {"target", "shift", "scale", "component"},
    "second_moment": {"target", "shift", "scale", "component"},
    "barrier_time": {"level", "target", "shift", "scale", "component"},
}
_REQUEST_PATTERN = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


def var_constraint(quantile, level, component=0, label=None):
    """P(X_T[component] <= quantile) = level, i.e. the level-VaR sits at ``quantile``."""
    quantile = float(quantile)
    return TerminalConstraint(
        function=lambda x: (x[:, component] <= quantile).astype(float),
        target=float(level),
        label=label or f"var({level:g})",
        threshold=quantile,
        component=component)


def mean_constraint(target, component=0, label=None):
    return TerminalConstraint(
        function=lambda x: x[:, component],
        target=float(target),
        label=label or "mean",
        component=component)


def second_moment_constraint(target, component=0, label=None):
    return TerminalConstraint(
        function=lambda x: x[:, component] ** 2,
        target=float(target),
        label=label or "second_moment",
        component=component)


def barrier_time_constraint(level, target, component=0, label=None):
    """Expected time spent at or below ``level``."""
    level = float(level)
    return RunningConstraint(
        function=lambda x: (x[:, component] <= level).astype(float),
        target=float(target),
        label=label or f"barrier_time({level:g})",
        threshold=level,
        component=component)


def _parse_amount(text):
    text = text.strip()
    if text.endswith("%"):
        return float(text[:-1]) / 100.0
    return float(text)


@dataclass(frozen=True)
class ConstraintRequest:
    """
    A parsed constraint request, possibly relative to reference values.

    Attributes:
        name (str): One of ``var``, ``mean``, ``second_moment``, ``barrier_time``
        params (dict): Parsed numeric parameters
    """
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in PRESETS:
            raise ConstraintError(f"Unknown constraint '{self.name}'; expected one of {', '.join(PRESETS)}")
        unknown = set(self.params) - ALLOWED_KEYS[self.name]
        if unknown:
            raise ConstraintError(f"Constraint '{self.name}' does not accept {sorted(unknown)}")
        has_absolute = "quantile" in self.params if self.name == "var" else "target" in self.params
        relative = [key for key in ("shift", "scale") if key in self.params]
        if has_absolute + len(relative) != 1:
            raise ConstraintError(
                f"Constraint '{self.name}' needs exactly one of an absolute value, shift or scale")
        if self.name in ("var", "barrier_time") and "level" not in self.params:
            raise ConstraintError(f"Constraint '{self.name}' needs a level")
        if self.name == "var" and not 0.0 < self.params["level"] < 1.0:
            raise ConstraintError(f"VaR level must lie in (0, 1), got {self.params['level']}")

    @property
    def component(self):
        return int(self.params.get("component", 0))

    @property
    def is_relative(self):
        return "shift" in self.params or "scale" in self.params

    @property
    def is_running(self):
        return self.name == "barrier_time"

    def reference_value(self, ensemble):
        """Value of the requested quantity under the measure that generated ``ensemble``."""
        terminal = ensemble.terminal[:, self.component]
        if self.name == "var":
            return float(np.quantile(terminal, self.params["level"], method="inverted_cdf"))
        if self.name == "mean":
            return float(terminal.mean())
        if self.name == "second_moment":
            return float(np.mean(terminal ** 2))
        below = ensemble.states[:, :-1, self.component] <= self.params["level"]
        return float(np.mean(below @ ensemble.time_steps))

    def resolve_value(self, reference=None):
        if "shift" in self.params:
            return reference + self.params["shift"] * abs(reference)
        if "scale" in self.params:
            return reference * self.params["scale"]
        return self.params["quantile"] if self.name == "var" else self.params["target"]

    def resolve(self, ensemble=None):
        """
        Build the constraint, resolving relative amounts against ``ensemble``.

        Returns:
            TerminalConstraint or RunningConstraint: The resolved constraint
        """
        reference = None
        if self.is_relative:
            if ensemble is None:
                raise ConstraintError(f"Relative constraint '{self}' needs a reference ensemble")
            reference = self.reference_value(ensemble)
        value = self.resolve_value(reference)
        if reference is not None:
            logger.info("Resolved %s: reference %.6g -> %.6g", self, reference, value)

        component = self.component
        if self.name == "var":
            return var_constraint(value, self.params["level"], component, label=str(self))
        if self.name == "mean":
            return mean_constraint(value, component, label=str(self))
        if self.name == "second_moment":
            return second_moment_constraint(value, component, label=str(self))
        return barrier_time_constraint(self.params["level"], value, component, label=str(self))

    def __str__(self):
        parts = ",".join(f"{key}={value:g}" for key, value in sorted(self.params.items()))
        return f"{self.name}({parts})"


def parse_constraint(text):
    """
    Parse a constraint request from string format.

    Args:
        text (str): Request such as "var(level=0.9,shift=+10%)" or
            "barrier_time(level=-0.1,scale=0.5)". Percent amounts are divided
            by 100; plain amounts are used as given.

    Returns:
        ConstraintRequest: The parsed request
    """
    match = _REQUEST_PATTERN.match(text or "")
    if not match:
        raise ConstraintError(f"Invalid constraint format: {text!r}")
    name, body = match.group(1), match.group(2)
    params = {}
    for item in body.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConstraintError(f"Invalid constraint parameter {item.strip()!r} in {text!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        try:
            params[key] = _parse_amount(value)
        except ValueError as exc:
            raise ConstraintError(f"Invalid value for '{key}' in {text!r}") from exc
    return ConstraintRequest(name, params)


def build_constraint_set(requests, dim_state=1, ensemble=None):
    """
    Resolve requests into a ConstraintSet, terminal constraints first.

    Args:
        requests (list): ConstraintRequest objects or strings
        dim_state (int): State dimension of the model
        ensemble (PathEnsemble, optional): Reference ensemble for relative requests
    """
    parsed = [parse_constraint(r) if isinstance(r, str) else r for r in requests]
    for request in parsed:
        if request.component >= dim_state:
            raise ConstraintError(f"Constraint '{request}' refers to component {request.component} "
                                  f"of a {dim_state}-dimensional state")
    terminal = [request.resolve(ensemble) for request in parsed if not request.is_running]
    running = [request.resolve(ensemble) for request in parsed if request.is_running]
    return ConstraintSet(tuple(terminal), tuple(running), dim_state)
