"""Exception hierarchy for the toolkit."""


class RlweForgeError(Exception):
    """Base class for all toolkit errors."""


class BadModulus(RlweForgeError):
    """Conductor m is even, not squarefree, or too small."""


class NonUnitGenerator(RlweForgeError):
    """A subgroup generator shares a factor with m."""


class NonUnit(RlweForgeError):
    """Residue is not invertible mod m."""


class RamifiedPrime(RlweForgeError):
    """Prime divides the conductor; no unramified residue data exists."""


class ZeroElement(RlweForgeError):
    """Degree of the zero element is undefined."""


class PrecisionLoss(RlweForgeError):
    """A numeric residual exceeded the tolerance for the working precision."""


class ConvergenceFailure(RlweForgeError):
    """An iterative numeric routine hit its iteration cap."""


class EmptyBins(RlweForgeError):
    """A chi-square bin has non-positive expected mass."""


class NotADistribution(RlweForgeError):
    """Probability vector does not sum to one."""


class InsufficientSamples(RlweForgeError):
    """Sample count is below the 5-per-expected-bin gate."""


class NotInSubfield(RlweForgeError):
    """Field element does not lie in the claimed subfield."""


class UnsupportedContext(RlweForgeError):
    """Residue field extension degree is beyond the supported cap."""


class SingularSystem(RlweForgeError):
    """Stacked linear system for secret recovery is rank-deficient."""


class PartialFailure(RlweForgeError):
    """Some per-prime attacks failed; carries the offending twists."""

    def __init__(self, failed_twists, reports=None):
        self.failed_twists = list(failed_twists)
        self.reports = reports or {}
        super().__init__(f"attack failed on twists {self.failed_twists}")


class SampleFileMismatch(RlweForgeError):
    """Sample file was generated from a different instance."""
