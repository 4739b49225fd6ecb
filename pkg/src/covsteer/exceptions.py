"""Exception hierarchy for the covariance steering pipeline."""


class CovsteerError(Exception):
    """Base class for every error raised by this package."""


class AsymmetryError(CovsteerError, ValueError):
    """A matrix that should be symmetric is not, beyond tolerance."""

    def __init__(self, asymmetry, tol):
        self.asymmetry = float(asymmetry)
        self.tol = float(tol)
        super().__init__(f"asymmetry {self.asymmetry:.3e} exceeds tolerance {self.tol:.1e}")


class NotPositiveDefinite(CovsteerError, ValueError):
    """A matrix required to be positive definite is not."""

    def __init__(self, min_eig, where=""):
        self.min_eig = float(min_eig)
        self.where = where
        loc = f" ({where})" if where else ""
        super().__init__(f"matrix not positive definite{loc}: smallest eigenvalue {self.min_eig:.3e}")


class OutOfHorizon(CovsteerError, ValueError):
    """A time query falls outside the problem horizon."""


class StmIdentityViolation(CovsteerError):
    """The computed transition matrix fails the symplectic block identities."""

    def __init__(self, residuals, tol):
        self.residuals = tuple(residuals)
        self.tol = tol
        worst = max(self.residuals)
        super().__init__(f"STM identity residual {worst:.3e} exceeds {tol:.1e}; increase grid_steps")


class SingularBlock(CovsteerError):
    """Phi11 or Phi12 is numerically singular."""


class LftSingular(CovsteerError):
    """The denominator of a linear fractional map is numerically singular."""

    def __init__(self, rcond, stage=None):
        self.rcond = float(rcond)
        self.stage = stage
        tag = f" in {stage}" if stage else ""
        super().__init__(f"singular LFT denominator{tag} (rcond={self.rcond:.3e})")


class MaxIterExceeded(CovsteerError):
    """The fixed-point recursion did not reach tolerance."""

    def __init__(self, trace):
        self.trace = trace
        last = trace.errors[-1] if trace.errors else float("nan")
        super().__init__(f"no convergence after {trace.iterations} iterations (last step {last:.3e})")


class RetriesExhausted(CovsteerError):
    """Too many restarts after singular iterates."""

    def __init__(self, retries, trace=None):
        self.retries = retries
        self.trace = trace
        super().__init__(f"gave up after {retries} singular restarts")


class NonFiniteState(CovsteerError):
    """An integrated trajectory produced non-finite values."""


class MeanBvpSingular(CovsteerError):
    """The mean two-point boundary value problem is singular."""


class NonFinitePath(CovsteerError):
    """A simulated sample path diverged."""

    def __init__(self, path, t):
        self.path = int(path)
        self.t = float(t)
        super().__init__(f"path {self.path} became non-finite at t={self.t:g}")


class TooFewPaths(CovsteerError, ValueError):
    """Sample statistics need at least two paths."""


class InvalidProblem(CovsteerError, ValueError):
    """A problem failed validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        codes = ", ".join(v.code for v in self.violations)
        super().__init__(f"invalid problem: {codes}")
