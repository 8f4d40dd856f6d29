"""Exception hierarchy shared by all cusplab modules."""


class CuspLabError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(CuspLabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class EvaluationError(CuspLabError):
    """A user-supplied component evaluated to a non-finite value."""


class ConfigError(CuspLabError, ValueError):
    """Invalid run configuration or layer constants."""


class IntegrationError(CuspLabError):
    """Base class for numerical integration failures.

    Attributes
    ----------
    state : numpy.ndarray or None
        Last accepted state when the failure happened.
    t : float or None
        Time of that state.
    """

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class StiffnessError(IntegrationError):
    """Step size fell below the floor."""


class BlowUpError(IntegrationError):
    """The solution left the finite range."""


class SectionTimeoutError(IntegrationError):
    """No section crossing happened before the time limit."""


class DegenerateFiberError(CuspLabError):
    """A fiber derivative came out non-finite."""


class ChartDomainError(DomainError):
    """A point is outside the domain of a blow-up chart."""


class FoldSingularityError(CuspLabError, ValueError):
    """A slow-flow quantity was requested on or across the fold curve."""


class GeometryError(CuspLabError):
    """Section endpoints on the critical manifold could not be selected."""


class NonContractiveError(CuspLabError):
    """A map is not of exponential type at the probed point."""


class DiffeomorphismError(CuspLabError):
    """A family of maps failed the monotonicity check."""


class ShiftViolationError(CuspLabError):
    """A map that must fix the origin does not."""


class ChainStructureError(CuspLabError):
    """The maps handed to a chain composition break the role pattern."""


class SweepError(CuspLabError):
    """Every row of an epsilon sweep failed."""


class FoldDetectionError(CuspLabError):
    """A trajectory did not jump off the fold within the allotted window."""
