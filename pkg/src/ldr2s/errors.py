"""Exception types shared across the package."""


class Ldr2sError(Exception):
    """Base class for all package errors."""


class MalformedLP(Ldr2sError):
    """A StandardLP violates its structural invariants."""


class NumericalFailure(Ldr2sError):
    """Pivoting stalled beyond the anti-cycling fallback budget, or the
    basis became numerically singular."""


class ModelError(Ldr2sError):
    """A model violates an assumption the caller relied on."""


class DimensionMismatch(ModelError):
    """A stage generator produced data of the wrong shape."""

    def __init__(self, stage, what, expected, got):
        self.stage = stage
        self.what = what
        super().__init__(
            f"stage {stage}: {what} has shape {got}, expected {expected}"
        )


class UnsupportedMoment(Ldr2sError):
    """A requested closed-form moment is not available."""


class TooFewSamples(Ldr2sError):
    """A confidence interval was requested on fewer than two values."""


class SizeGuard(Ldr2sError):
    """A deterministic-equivalent build would exceed the memory guard."""


class IterationLimit(Ldr2sError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class MasterInfeasible(Ldr2sError):
    """The Benders master is infeasible (inconsistent coefficient region
    or state box for the given sample)."""


class LevelSetEmpty(NumericalFailure):
    """The level-set projection problem is empty, which signals LB above
    the true optimum (a numerical failure)."""


class AssumptionViolation(Ldr2sError):
    """A stage subproblem was unbounded/infeasible where the model's
    declared assumptions say it cannot be."""


class AssumptionNotMet(Ldr2sError):
    """An exact reformulation was requested for a model that does not
    satisfy the required assumptions."""


class StageInfeasible(Ldr2sError):
    """A tracking-policy stage problem was infeasible (relatively
    complete recourse violated; a model bug)."""

    def __init__(self, stage, scenario=None):
        self.stage = stage
        self.scenario = scenario
        where = f"stage {stage}" + ("" if scenario is None else f", scenario {scenario}")
        super().__init__(f"stage problem infeasible at {where}")


class NonAffineDependence(Ldr2sError):
    """A row handed to the robust reformulation is not affine in xi."""


class DegenerateSupport(Ldr2sError):
    """Coefficient matching needs full-dimensional support for an
    involved xi component."""


class InvalidConfig(Ldr2sError):
    """Bad experiment configuration."""
