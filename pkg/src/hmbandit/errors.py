"""Exception hierarchy shared across the package."""


class HMBanditError(Exception):
    """Base class for all hmbandit errors."""


class OutOfRange(HMBanditError):
    """A probability parameter lies outside [0, 1]."""


class OrderViolation(HMBanditError):
    """Parameter ordering assumption broken (needs rho0 < rho1 and eta0 < eta1)."""


class DegenerateObservation(HMBanditError):
    """Bayes denominator vanished during a belief update."""


class NoConvergence(HMBanditError):
    """Fixed-point iteration exhausted its budget."""


class UnsupportedOrdering(HMBanditError):
    """Closed-form index machinery requires lambda0 = mu0 > mu1 = lambda1."""


class TooCoarse(HMBanditError):
    """Belief grids need at least 3 nodes."""


class IterationBudgetExceeded(HMBanditError):
    """Value iteration did not converge within the sweep budget."""


class HorizonTooLarge(HMBanditError):
    """Exact belief-tree evaluation is limited to horizons of at most 20."""


class NonTerminatingTau(HMBanditError):
    """The gamma1 orbit never re-crossed its start within the iteration budget."""


class NoCrossingInBracket(HMBanditError):
    """Subsidy search found no sign change, even after expanding the bracket."""


class MissingIndexTable(HMBanditError):
    """Whittle policy requested without one index table per arm."""


class ParseError(HMBanditError):
    """Config file unreadable, empty, or not a valid key-value document."""


class ValidationError(HMBanditError):
    """Config contents failed domain validation; message names the field path."""
