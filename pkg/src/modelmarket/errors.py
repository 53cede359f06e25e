"""Exception hierarchy for the market simulator."""


class MarketError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MarketError, ValueError):
    """A configuration failed validation.

    ``violations`` holds every problem found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"invalid config ({len(self.violations)} violation(s)): {lines}")


class NegativeImport(MarketError, ValueError):
    pass


class LengthMismatch(MarketError, ValueError):
    pass


class NotACollaborator(MarketError, ValueError):
    pass


class SelfEdge(MarketError, ValueError):
    pass


class TooManyClients(MarketError, ValueError):
    pass


class GraphProblemMismatch(MarketError, ValueError):
    pass


class PaymentConsistencyError(MarketError, RuntimeError):
    """A remittance came out negative, meaning graph and payment disagree."""


class UnbalancedLedger(MarketError, ValueError):
    pass


class DimensionMismatch(MarketError, ValueError):
    pass


class DivergedLoss(MarketError, ArithmeticError):
    pass


class InfeasiblePartition(MarketError, ValueError):
    pass


class EmptyTestSet(MarketError, ValueError):
    pass


class SimulationAborted(MarketError, RuntimeError):
    """A round failed; ``partial`` carries the result up to the failure."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
