"""Exception types shared across the package."""


class NewtonDynError(Exception):
    """Base class for all package-specific errors."""


class DegreeError(NewtonDynError):
    """Polynomial degree outside the range an operation supports."""


class NonConvergenceError(NewtonDynError):
    """An iterative solve exhausted its sweep budget without meeting tolerance."""


class ZeroRootError(NewtonDynError):
    """Normalization hit a root at the origin after centering."""


class NonSimpleRootsError(NewtonDynError):
    """An operation that needs pairwise distinct roots got a multiple root."""


class IndeterminateError(NewtonDynError):
    """p and p' share a zero that root multiplicities do not account for."""


class PoleError(NewtonDynError):
    """Evaluation requested exactly at a pole of the map."""


class CountMismatchError(NewtonDynError):
    """Critical points found do not satisfy the Riemann-Hurwitz count."""


class NotACycleError(NewtonDynError):
    """Points handed in as a cycle are not mapped onto each other."""


class NonRealMapError(NewtonDynError):
    """Real-line machinery invoked on a map with non-real coefficients."""


class LengthMismatchError(NewtonDynError):
    """Symbol sequences of different truncation lengths were compared."""


class ChartFailureError(NewtonDynError):
    """No conjugating disk chart with acceptable defect could be built."""


class RayTraceError(NewtonDynError):
    """Inverse-step continuation of an internal ray broke down."""


class LandingAmbiguityError(NewtonDynError):
    """A traced ray did not exit toward infinity within its level budget."""


class LiftError(NewtonDynError):
    """Branch continuation while lifting a graph edge lost its branch."""


class LevelNotReachedError(NewtonDynError):
    """Graph containment conditions not met within the level budget.

    Carries the deepest graph built so far in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EmbeddingError(NewtonDynError):
    """The planar embedding data is inconsistent (Euler check failed)."""


class DiscriminantZeroError(NewtonDynError):
    """Parameter point lies on (or numerically too close to) the discriminant."""


class ContinuationLostError(NewtonDynError):
    """Cycle continuation diverged or crossed a bifurcation."""

class IoError(NewtonDynError):
    """Raster or report output could not be written."""
