"""Integrable Lagrange billiards in Euclidean, spherical and hyperbolic space."""
from .errors import (
    BilliardError,
    CenterCollision,
    DimensionError,
    EquatorSingularity,
    GrazingHit,
    OffSurfaceError,
    ScenarioError,
    SingularityError,
    WallError,
)
from .flow import PhaseState, ReflectionEvent, Status, Trajectory, detect_crossing, reflect, simulate, step
from .forces import Centers, LagrangeParams, force_chart, force_curved, force_function_chart, force_function_curved
from .integrals import (
    FirstIntegral,
    angular_momentum,
    casimir_C,
    drift_report,
    evaluate,
    integral_family,
    jacobian_rank,
    poisson_bracket,
)
from .projection import lift_point, lift_state, project_point, project_state, pull_velocity, push_velocity
from .quadrics import QuadricWall, Sheet, WallKind, focal_distance_residual, focal_parameter, implicit_value
from .spaceform import Geometry, SpaceForm, center_angle, inner, norm, tangent_project

__version__ = "0.1.0"
