"""Exception hierarchy shared by all solver modules."""


class PCPError(Exception):
    """Base class for all errors raised by pcpgrhd."""


class EosDomainError(PCPError, ValueError):
    """Non-positive (or below-floor) pressure or density handed to an EOS."""


class EosAdmissibilityError(PCPError, ValueError):
    """The EOS violates the causality / thermal-expansion conditions at a point."""


class UnsupportedEosError(PCPError, TypeError):
    """An operation that needs the ideal EOS was called with another EOS."""


class MetricError(PCPError, ValueError):
    """Degenerate or non-SPD spatial metric, singular 4-metric, bad lapse."""


class DomainError(PCPError, ValueError):
    """A state is outside the admissible set where the operation needs it inside."""


class SolverError(PCPError, RuntimeError):
    """An iterative root solve failed to converge within its iteration cap."""


class ContractError(PCPError, ValueError):
    """A caller-side precondition was violated (e.g. viscosity below the bound)."""


class ConfigError(PCPError, ValueError):
    """Invalid run configuration or mesh description.

    ``problems`` holds one message per offending field, each prefixed with
    the dotted field path.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InadmissibleStateError(PCPError, RuntimeError):
    """A scheme produced a state outside the admissible set.

    Raised instead of silently repairing the state; carries enough context
    to locate the failure.
    """

    def __init__(self, message, *, indices=None, step=None, stage=None):
        self.indices = indices
        self.step = step
        self.stage = stage
        super().__init__(message)

    def __str__(self):
        ctx = [f"{k} {v}" for k, v in (("step", self.step), ("stage", self.stage)) if v is not None]
        base = super().__str__()
        return f"{base} [{', '.join(ctx)}]" if ctx else base


class StageCFLViolation(PCPError, RuntimeError):
    """A Runge-Kutta stage found its time step above the stage CFL bound."""

    def __init__(self, message, dt_max):
        self.dt_max = dt_max
        super().__init__(message)
