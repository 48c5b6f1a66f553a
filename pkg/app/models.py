"""Enumerations shared across the solver package."""
import enum


class ProfileKind(str, enum.Enum):
    """Families of upstream axial-velocity profiles."""
    UNIFORM = "uniform"
    EXP_VORTICAL = "exp_vortical"  # u_bar + K (r e^-r + e^-r)
    TABULATED = "tabulated"


class ObstacleKind(str, enum.Enum):
    """Obstacle shapes sitting on the symmetry axis."""
    NONE = "none"
    SMOOTH_BUMP = "smooth_bump"
    TABULATED = "tabulated"


class NodeClass(enum.IntEnum):
    """Grid node classification (stored as int8 rasters)."""
    INTERIOR = 0
    OBSTACLE = 1  # wall node snapped onto r = f(x)
    AXIS = 2
    TOP = 3
    INFLOW = 4
    OUTFLOW = 5
    SOLID = 6  # r < f(x), masked


class InitialGuess(str, enum.Enum):
    """Admissible initial fields for the Picard iteration."""
    BOUNDARY_EXTENSION = "boundary_extension"
    UPSTREAM_CLIPPED = "upstream_clipped"
    BLEND = "blend"


class Relaxation(str, enum.Enum):
    """Relaxation of the Picard update."""
    FIXED = "fixed"
    AITKEN = "aitken"  # factor from consecutive increments


class SweepStatus(str, enum.Enum):
    """Outcome of a single density in a continuation sweep."""
    CERTIFIED = "certified"
    TRUNCATION_ACTIVE = "truncation-active"
    DIVERGED = "diverged"


class TaskName(str, enum.Enum):
    """Tasks the run engine can execute."""
    SOLVE = "solve"
    VERIFY = "verify"
    ANNULUS = "annulus"
    SWEEP = "sweep"
    BRACKET = "bracket"


class ErrorType(str, enum.Enum):
    """Classification of errors."""
    NONE = "none"
    CONFIGURATION = "configuration"
    DOMAIN = "domain"
    HYPOTHESIS = "hypothesis"
    OUT_OF_BRANCH = "out_of_branch"
    SINGULARITY = "singularity"
    NUMERICAL = "numerical"
    DIVERGED = "diverged"
    TRACING = "tracing"
    INSUFFICIENT_DATA = "insufficient_data"
    PRECONDITION = "precondition"
    UNKNOWN = "unknown"
