"""Exception types raised by the solver and its building blocks."""


class NowpacError(Exception):
    """Base class for all solver errors."""


class DimensionMismatch(NowpacError, ValueError):
    pass


class NonFiniteEvaluation(NowpacError):
    """The black box returned NaN or an infinite value."""

    def __init__(self, x, f, c):
        self.x = x
        self.f = f
        self.c = c
        super().__init__(f"non-finite evaluation at x={list(x)}: f={f}, c={list(c)}")


class SingularGeometry(NowpacError):
    """Interpolation system is too ill-conditioned to define a model."""


class ImprovementStalled(NowpacError):
    """Geometry improvement failed to reduce the poisedness constant."""


class SubproblemInfeasibleStart(NowpacError):
    """The zero step violates the model constraints beyond the allowed slack."""


class InfeasibleStart(NowpacError):
    """The starting point violates at least one constraint."""


class BudgetExhausted(NowpacError):
    """Raised internally when the evaluation budget is used up."""


class UnknownProblemId(NowpacError, KeyError):
    pass


class EmptyResults(NowpacError, ValueError):
    pass


class ConfigRangeError(NowpacError, ValueError):
    """A solver parameter lies outside its admissible range."""


class FeasibilityViolation(NowpacError, AssertionError):
    """An accepted iterate violates a true constraint."""
