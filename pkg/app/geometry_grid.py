"""
Obstacle profiles and the masked Cartesian grid on [-X, X] x [0, L].

Nodes under the graph r < f(x) are masked solid. Fluid nodes whose south
neighbour is solid keep their cut-cell gap r - f(x) for the wall flux; nodes
closer to the wall than `snap * dr` are snapped onto it and carry psi = 0.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from app.errors import ConfigurationError
from app.models import NodeClass, ObstacleKind
from app.schemas import CheckResult, VerificationReport
from app.upstream_profile import RadialProfile

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_SNAP = 0.1
_RASTER_CHARS = {
    NodeClass.INTERIOR: ".",
    NodeClass.OBSTACLE: "w",
    NodeClass.AXIS: "a",
    NodeClass.TOP: "t",
    NodeClass.INFLOW: "i",
    NodeClass.OUTFLOW: "o",
    NodeClass.SOLID: "#",
}


def bump_profile(h: float, x: ArrayLike) -> ArrayLike:
    """f(x) = h exp(4 - 1/(x(1-x))) on (0, 1), zero elsewhere; peak h at x = 1/2."""
    if h < 0.0:
        raise ConfigurationError("bump height must be non-negative")
    xx = np.asarray(x, dtype=float)
    inside = (xx > 0.0) & (xx < 1.0)
    safe = np.where(inside, xx, 0.5)
    value = np.where(inside, h * np.exp(4.0 - 1.0 / (safe * (1.0 - safe))), 0.0)
    if np.ndim(x) == 0:
        return float(value)
    return value


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Compactly supported obstacle profile f on [0, 1]."""
    kind: ObstacleKind = ObstacleKind.NONE
    height: float = 0.0
    table: Optional[Tuple[np.ndarray, np.ndarray]] = None
    _spline: Optional[CubicSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.height < 0.0:
            raise ConfigurationError("obstacle height must be non-negative")
        if self.kind == ObstacleKind.TABULATED:
            if self.table is None:
                raise ConfigurationError("tabulated obstacle needs an (x, f) table")
            xs, fs = (np.asarray(t, dtype=float) for t in self.table)
            if xs.size < 4 or np.any(np.diff(xs) <= 0.0):
                raise ConfigurationError("obstacle table needs increasing x with at least four rows")
            object.__setattr__(self, "_spline", CubicSpline(xs, fs, bc_type="natural"))

    @classmethod
    def none(cls) -> "Obstacle":
        return cls(ObstacleKind.NONE)

    @classmethod
    def smooth_bump(cls, height: float) -> "Obstacle":
        return cls(ObstacleKind.SMOOTH_BUMP, height=height)

    @classmethod
    def tabulated(cls, x: np.ndarray, f: np.ndarray) -> "Obstacle":
        return cls(ObstacleKind.TABULATED, table=(np.asarray(x, float), np.asarray(f, float)))

    def f(self, x: ArrayLike) -> np.ndarray:
        xx = np.asarray(x, dtype=float)
        if self.kind == ObstacleKind.NONE:
            return np.zeros_like(xx)
        if self.kind == ObstacleKind.SMOOTH_BUMP:
            return np.asarray(bump_profile(self.height, xx))
        inside = (xx > 0.0) & (xx < 1.0)
        return np.where(inside, self._spline(np.clip(xx, 0.0, 1.0)), 0.0)

    @property
    def J(self) -> float:
        """sup f."""
        if self.kind == ObstacleKind.NONE:
            return 0.0
        if self.kind == ObstacleKind.SMOOTH_BUMP:
            return self.height
        return float(np.max(self.f(np.linspace(0.0, 1.0, 4001))))


def validate_obstacle(obstacle: Obstacle, probe: float = 1e-3) -> VerificationReport:
    """Non-negativity, support in [0, 1] and a C2 probe at the support ends."""
    xs = np.linspace(-0.5, 1.5, 4001)
    fs = obstacle.f(xs)
    outside = np.abs(fs[(xs <= 0.0) | (xs >= 1.0)])
    outside_max = float(outside.max()) if outside.size else 0.0

    def second_difference(x0: float) -> float:
        return float((obstacle.f(x0 + probe) - 2.0 * obstacle.f(x0) + obstacle.f(x0 - probe)) / probe ** 2)

    def first_difference(x0: float) -> float:
        return float((obstacle.f(x0 + probe) - obstacle.f(x0 - probe)) / (2.0 * probe))

    end_jump = max(abs(second_difference(0.0)), abs(second_difference(1.0)),
                   abs(first_difference(0.0)), abs(first_difference(1.0)))
    smooth_tol = 10.0 * max(obstacle.J, 1.0) * probe
    checks = [
        CheckResult(name="non_negative", passed=bool(fs.min() >= 0.0),
                    margin=float(fs.min()), tolerance=0.0),
        CheckResult(name="support", passed=outside_max == 0.0,
                    margin=-outside_max, tolerance=0.0),
        CheckResult(name="c2_probe", passed=end_jump <= smooth_tol,
                    margin=smooth_tol - end_jump, tolerance=smooth_tol),
    ]
    return VerificationReport(checks=checks)


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Uniform tensor grid, arrays indexed [i, j] with x_i = -X + i dx, r_j = j dr."""
    obstacle: Obstacle
    X: float
    L: float
    nx: int
    nr: int
    x: np.ndarray
    r: np.ndarray
    f_nodes: np.ndarray
    node_class: np.ndarray
    cut_gap: np.ndarray  # r_j - f(x_i) where the south neighbour is solid, nan elsewhere

    @property
    def dx(self) -> float:
        return 2.0 * self.X / self.nx

    @property
    def dr(self) -> float:
        return self.L / self.nr

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx + 1, self.nr + 1)

    @property
    def J(self) -> float:
        return self.obstacle.J

    @property
    def solid(self) -> np.ndarray:
        return self.node_class == NodeClass.SOLID

    @property
    def wall(self) -> np.ndarray:
        """Solid or snapped-wall nodes (psi = 0, no flow state)."""
        return (self.node_class == NodeClass.SOLID) | (self.node_class == NodeClass.OBSTACLE)

    @property
    def fluid(self) -> np.ndarray:
        return ~self.wall

    @property
    def interior(self) -> np.ndarray:
        return self.node_class == NodeClass.INTERIOR

    @property
    def masked_count(self) -> int:
        return int(np.count_nonzero(self.solid))

    def counts(self) -> dict:
        return {NodeClass(c).name.lower(): int(np.count_nonzero(self.node_class == c)) for c in NodeClass}


def build_grid(obstacle: Obstacle, X: float, L: float, nx: int, nr: int,
               snap: float = DEFAULT_SNAP) -> DomainGrid:
    """Masked grid on [-X, X] x [0, L] with exhaustive, disjoint node classes."""
    if X < 2.0:
        raise ConfigurationError(f"X={X} must be at least 2 so the obstacle sits inside the window")
    if nx < 16 or nr < 16:
        raise ConfigurationError("nx and nr must be at least 16")
    if L <= obstacle.J:
        raise ConfigurationError(f"obstacle taller than domain (J={obstacle.J}, L={L})")

    x = np.linspace(-X, X, nx + 1)
    r = np.linspace(0.0, L, nr + 1)
    dr = L / nr
    f_nodes = obstacle.f(x)
    F = f_nodes[:, None]
    R = r[None, :]

    cls = np.full((nx + 1, nr + 1), NodeClass.INTERIOR, dtype=np.int8)
    solid = R < F
    cls[solid] = NodeClass.SOLID
    snapped = (F > 0.0) & (R >= F) & (R < F + snap * dr)
    cls[snapped] = NodeClass.OBSTACLE
    axis = np.zeros_like(solid)
    axis[:, 0] = f_nodes == 0.0
    cls[axis] = NodeClass.AXIS
    cls[:, -1] = NodeClass.TOP
    cls[0, :] = NodeClass.INFLOW
    cls[-1, :] = NodeClass.OUTFLOW

    cut_gap = np.full((nx + 1, nr + 1), np.nan)
    south_solid = np.zeros_like(solid)
    south_solid[:, 1:] = cls[:, :-1] == NodeClass.SOLID
    cut = south_solid & (cls == NodeClass.INTERIOR)
    cut_gap[cut] = (R - F)[cut]

    grid = DomainGrid(obstacle=obstacle, X=float(X), L=float(L), nx=int(nx), nr=int(nr),
                      x=x, r=r, f_nodes=f_nodes, node_class=cls, cut_gap=cut_gap)
    logger.info(f"Built grid {nx}x{nr} on [-{X}, {X}]x[0, {L}]: {grid.counts()}")
    return grid


def side_boundary_values(trunc: RadialProfile, grid: DomainGrid, k: float) -> np.ndarray:
    """
    psi on the inflow/outflow columns: m_L I_k(r) / I_k(L), I_k(r) = int_0^r (s+k) u_L ds.
    Equals psi_bar_L(r) at k = 0.
    """
    if k < 0.0:
        raise ConfigurationError("axis regularization k must be non-negative")
    weights = np.asarray(trunc.weighted_integral(grid.r, k))
    total = float(trunc.weighted_integral(trunc.r_max, k))
    values = trunc.total_stream * weights / total
    values[0] = 0.0
    values[-1] = trunc.total_stream
    return values


def masked_area(grid: DomainGrid) -> float:
    """Cell-area estimate of the solid region."""
    return grid.masked_count * grid.dx * grid.dr


def write_grid_dump(grid: DomainGrid, path: Union[str, Path]) -> Path:
    """Header (X, L, nx, nr, J) and a node-class raster, top row first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"X={grid.X!r} L={grid.L!r} nx={grid.nx} nr={grid.nr} J={grid.J!r}"]
    for j in range(grid.nr, -1, -1):
        lines.append("".join(_RASTER_CHARS[NodeClass(c)] for c in grid.node_class[:, j]))
    path.write_text("\n".join(lines) + "\n")
    return path
