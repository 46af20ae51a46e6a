"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Malformed or non-finite input (shapes, NaNs, empty lists)."""


class OutOfDomainError(ValueError):
    """A wrench outside the image of the parametrization, with saturation off."""


class DegenerateProblemError(RuntimeError):
    """Constraint matrix lost row rank; ``residual`` is what could be achieved."""

    def __init__(self, message, residual=float("nan"), solution=None):
        super().__init__(message)
        self.residual = residual
        self.solution = solution


class DegradedAuthorityError(DegenerateProblemError):
    """``A @ Phi`` lost row rank: the wrench variables no longer steer momentum."""


class ActuationDeficiencyError(DegenerateProblemError):
    """``J M^-1 B`` lost rank: torques cannot realize the requested wrenches."""


class ConfigError(ValueError):
    """Scenario validation failure; ``fields`` lists every offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        self.fields = [p[0] for p in self.problems]
        lines = "\n".join(f"  {k}: {msg}" for k, msg in self.problems)
        super().__init__(f"invalid scenario ({len(self.problems)} problem(s)):\n{lines}")
