"""Exception types shared across the package."""


class DralabError(Exception):
    pass


class NonRegular(DralabError):
    pass


class TailExhausted(DralabError):
    pass


class PreconditionViolated(DralabError):
    pass


class SearchFailed(DralabError):
    pass


class InfiniteMean(DralabError):
    pass


class PrimeSearchFailed(DralabError):
    pass


class OutOfRange(DralabError):
    pass


class MalleabilityDisabled(DralabError):
    pass


class ParentsUnrevealed(DralabError):
    pass


class BindingViolation(DralabError):
    pass


class UnsafeStrategy(DralabError):
    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class CountViolation(DralabError):
    pass


class UnsortedBids(DralabError):
    pass


class GridOverflow(DralabError):
    pass


class SchemaError(DralabError):
    pass


class SpecError(DralabError, ValueError):
    """Malformed distribution, fine or strategy specifier."""
