"""Exception hierarchy for floqlin.

Every failure that a caller may want to distinguish gets its own class;
all of them derive from :class:`FloqlinError` so batch drivers can catch
numerical failures in one place.
"""


class FloqlinError(Exception):
    """Base class for all floqlin numerical failures."""


class DivergenceError(FloqlinError):
    """A deterministic integration produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DegenerateSpectrumError(FloqlinError):
    """2x2 eigenproblem with (near-)coincident eigenvalues."""


class BranchCutError(FloqlinError):
    """Matrix logarithm hit the principal-branch cut (or a singular matrix)."""


class NoLimitCycleError(FloqlinError):
    """The classical flow settled onto a fixed point instead of a cycle."""


class PeriodDetectionError(FloqlinError):
    """No reproducible period was detected (or shooting failed) within budget."""


class DegenerateMonodromyError(FloqlinError):
    """Both Floquet multipliers sit near 1: the cycle is at a bifurcation."""


class ModeConsistencyError(FloqlinError):
    """A Floquet mode failed its periodicity tolerance (grid too coarse)."""


class InconsistentModesError(FloqlinError):
    """A projected noise kernel violated its reality/positivity guarantees."""


class KernelConvergenceError(FloqlinError):
    """The periodic variance kernel did not converge within the period budget."""


class UnstableCycleError(FloqlinError):
    """An operation requiring a damped transverse mode got Re(mu1) >= 0."""


class DegenerateCovarianceError(FloqlinError):
    """A snapshot covariance is numerically singular."""


class SteadyStateError(FloqlinError):
    """Master-equation evolution did not reach the steady state in time."""


class CutoffError(FloqlinError):
    """Fock-space truncation escalation exceeded the hard cap."""


class AccuracyGuardError(FloqlinError):
    """Requested moment order too high for the current truncation."""


class ReliabilityError(FloqlinError):
    """Too many stochastic trajectories diverged for the ensemble to be trusted."""


class UsageError(Exception):
    """Bad command-line arguments (exit code 1, not a numerical failure)."""
