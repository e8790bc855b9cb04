"""Exception hierarchy shared by all modules."""


class BilliardError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(BilliardError, ValueError):
    """Vector lengths do not match the ambient dimension of the space."""


class OffSurfaceError(BilliardError, ValueError):
    """A point is not on the sphere / hyperboloid within tolerance."""


class SingularityError(BilliardError):
    """Evaluation at (or too close to) a singular point of the model."""


class EquatorSingularity(SingularityError):
    """Central projection is undefined at the equator / ideal boundary."""


class CenterCollision(SingularityError):
    """The particle reached a Kepler center (or its antipode)."""


class GrazingHit(BilliardError):
    """Reflection requested for a velocity (nearly) tangent to the wall."""


class WallError(BilliardError, ValueError):
    """Inconsistent quadric wall description."""


class ScenarioError(BilliardError, ValueError):
    """Invalid scenario configuration."""
