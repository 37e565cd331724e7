"""Exception hierarchy for hltomo.

All library errors derive from :class:`HltomoError` so callers can catch one
base class. The CLI maps subfamilies onto exit codes (config / model /
data-quality).
"""


class HltomoError(Exception):
    """Base class for all hltomo errors."""


class DomainError(HltomoError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class OrderOverflowError(DomainError):
    """A wavefunction or pattern-function order exceeds the configured cap."""


class CutoffTooSmallError(DomainError):
    """A Fock-space cutoff leaves more truncation tail mass than allowed."""


class CutoffCapExceededError(HltomoError):
    """Auto-growing a count cutoff hit the hard cap before meeting the
    tail-mass target."""


class DimensionMismatchError(DomainError):
    """Two matrices that must share a Fock dimension do not."""


class NonHermitianError(DomainError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class UnequalEfficiencyError(DomainError):
    """The single-photon closed form requires equal detector efficiencies."""


class PatternInstabilityError(HltomoError):
    """Tabulated pattern-function values exceeded the sanity envelope,
    indicating numerical instability of the construction."""


class PhaseCoverageError(HltomoError):
    """Sample phases do not cover [0, pi) well enough for a phase-sensitive
    reconstruction."""


class TraceFormatError(HltomoError):
    """A raw trace file violates the expected CSV schema."""


class FitFailureError(HltomoError):
    """The interference-fringe fit is degenerate or did not converge."""


class UncalibratedStepError(HltomoError):
    """A record refers to a piezo step outside the calibration range."""
