"""Exception hierarchy. Every failure the library can signal derives from BandError."""


class BandError(Exception):
    """Base class for bandforge errors."""


class DegenerateWindow(BandError):
    """The kernel window at some evaluation point holds too few distinct design points."""

    def __init__(self, point, message=None):
        self.point = float(point)
        super().__init__(message or f"degenerate kernel window at x={self.point:.17g}")


class ZeroDensity(BandError):
    """Design density estimate vanishes at an evaluation point."""

    def __init__(self, point):
        self.point = float(point)
        super().__init__(f"design density estimate is zero at x={self.point:.17g}")


class DegenerateFit(BandError):
    """Pilot curvature estimate is zero; the plug-in rule cannot be formed."""


class AllDegenerate(BandError):
    """Every candidate bandwidth produced a degenerate leave-one-out fit."""


class ZeroScale(BandError):
    """Heteroscedastic scale is zero at a design point carrying a nonzero residual."""


class UnsamplableKernel(BandError):
    """No sampler is registered for the requested kernel."""


class StudyAborted(BandError):
    """Too many simulated datasets failed."""
