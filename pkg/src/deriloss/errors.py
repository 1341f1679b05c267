"""Exception hierarchy shared by all deriloss modules."""


class DerilossError(Exception):
    """Base class for every error raised by the package."""


class NonFiniteEvaluation(DerilossError, ValueError):
    pass


class IntegralMismatch(DerilossError):
    pass


class DivergentIntegral(DerilossError, ValueError):
    pass


class DivergentObjective(DerilossError, ValueError):
    pass


class GridTooSmall(DerilossError, ValueError):
    pass


class PoorFit(DerilossError):
    def __init__(self, message, slope=None, r2=None):
        super().__init__(message)
        self.slope = slope
        self.r2 = r2


class OutOfInterval(DerilossError, ValueError):
    pass


class HypothesisViolated(DerilossError):
    """A construction was asked for at a lambda where its hypotheses fail.

    ``failed`` lists the names of the violated conditions.
    """

    def __init__(self, failed, detail=""):
        self.failed = list(failed)
        msg = "hypotheses violated: " + ", ".join(self.failed)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptySubdivision(HypothesisViolated):
    def __init__(self, detail=""):
        super().__init__(["nonempty subdivision"], detail)


class NotClassMember(DerilossError, ValueError):
    pass


class StepSizeUnderflow(DerilossError):
    pass


class NonFiniteState(DerilossError):
    pass


class BoundViolated(DerilossError):
    """A measured log energy quantity crossed its predicted log bound."""

    def __init__(self, lam, t, log_value, log_bound):
        self.lam, self.t, self.log_value, self.log_bound = lam, t, log_value, log_bound
        super().__init__(f"bound violated at lambda={lam:g}, t={t:g}: log value {log_value:.6g} "
                         f"vs log bound {log_bound:.6g}")


class RateTooSlow(DerilossError):
    pass


class ConfigError(DerilossError, ValueError):
    pass
