"""Exception types raised across the toolkit.

Errors that callers are expected to branch on (degenerate classifications,
section collisions, loss of differentiability) get their own class; plain
misuse raises ValueError.
"""


class VibroImpactError(Exception):
    """Base class for all toolkit-specific errors."""


class IntegrationError(VibroImpactError):
    """The ODE solver failed (step-size underflow, bad state)."""


class WallCrossingError(IntegrationError):
    """Free flight crossed the delimiter inside a span that was assumed clear.

    Carries the bracketing time of the first crossing so the caller can
    switch to event location.
    """

    def __init__(self, message, t_cross=None):
        super().__init__(message)
        self.t_cross = t_cross


class EventExplosionError(VibroImpactError):
    """Impact count exceeded the hard cap; the trajectory was truncated."""


class SectionCollisionError(VibroImpactError):
    """An impact fell within tolerance of the Poincare section time."""


class NonDifferentiableError(VibroImpactError):
    """The trajectory met the delimiter tangentially; the flow map has no
    Jacobian at this point (the state lies on the grazing separatrix)."""


class NearGrazingError(VibroImpactError):
    """Impact normal speed below the resolvable floor; saltation entries
    diverge like 1/Y."""


class ShootingError(VibroImpactError):
    """Newton shooting failed to converge."""


class ImpactCountChangedError(ShootingError):
    """The impact pattern changed between Newton iterations; restart from a
    better guess."""

    def __init__(self, message, count_before=None, count_after=None):
        super().__init__(message)
        self.count_before = count_before
        self.count_after = count_after


class DegenerateGrazingError(VibroImpactError):
    """Grazing solution violates the transversality hypotheses
    (non-positive normal acceleration at contact, or singular test matrix)."""


class ContinuationStalledError(VibroImpactError):
    """Continuation step control hit the minimum step (fold or loss of
    transversality)."""

    def __init__(self, message, mu=None, reason=None):
        super().__init__(message)
        self.mu = mu
        self.reason = reason


class SpectralSplitError(VibroImpactError):
    """No spectral gap between dominant and central eigenvalues."""


class ConfigError(VibroImpactError):
    """Malformed configuration document or unknown system name."""
