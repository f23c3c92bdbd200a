"""Exception types raised across omdlab."""


class OMDError(Exception):
    """Base class for omdlab errors."""


class DomainError(OMDError, ValueError):
    """A point lies outside the domain of a regularizer (e.g. x <= 0 for a barrier)."""


class InfeasiblePointError(OMDError, ValueError):
    """A point violates a constraint of the decision set.

    ``index`` is the offending coordinate or constraint row, ``kind`` tells which.
    """

    def __init__(self, message, index=None, kind=None):
        super().__init__(message)
        self.index = index
        self.kind = kind


class RankDeficientError(OMDError, ValueError):
    def __init__(self, message, dependent_rows=()):
        super().__init__(message)
        self.dependent_rows = tuple(dependent_rows)


class SolverError(OMDError, RuntimeError):
    """A subproblem solver failed (bracket failure, iteration cap, LP infeasibility)."""

    def __init__(self, message, best_gap=None, round_index=None):
        super().__init__(message)
        self.best_gap = best_gap
        self.round_index = round_index


class ResolutionError(OMDError, ValueError):
    """Requested accuracy is below what double precision can certify."""


class CertificationError(OMDError, RuntimeError):
    """A constructed step failed its epsilon-minimizer certificate."""


class OptimalityGapViolation(OMDError, AssertionError):
    pass


class BalanceViolation(OMDError, AssertionError):
    """A balance-lemma audit found a violating (t, i) pair."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PreconditionError(OMDError, ValueError):
    """Parameters do not satisfy a construction's threshold."""


class EventNotSatisfied(OMDError, ValueError):
    pass


class SamplingExhausted(OMDError, RuntimeError):
    def __init__(self, message, tries=0, accepted=0):
        super().__init__(message)
        self.tries = tries
        self.accepted = accepted


class ConfigError(OMDError, ValueError):
    """A scenario config failed to parse or validate.

    ``problems`` lists every violated condition, not just the first.
    """

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)
