"""
Stream-function solver for the truncated quasilinear elliptic problem

    div( grad psi / ((r + k) H) ) = (r + k) F_L(psi) F_L'(psi) H

on the masked grid, with H the subsonic-truncated density. The outer loop is a
relaxed Picard iteration on the frozen-coefficient operator with the source
linearized about the current iterate; the inner solve is a conjugate gradient
preconditioned by a sparse LU factorization of the stage's operator. The Aitken
factor adapts the relaxation from consecutive increments. The axis
regularization k walks down a schedule ending at 0, each stage warm-started
from the previous one.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from app.config import get_settings
from app.errors import ConfigurationError, DivergedError, DomainError, NumericalError
from app.gas_model import GasModel, branch_density, sonic_data, subsonic_density
from app.geometry_grid import DomainGrid, side_boundary_values
from app.models import InitialGuess, NodeClass, Relaxation
from app.schemas import SolverConfig
from app.upstream_profile import (
    TruncatedProfile,
    bernoulli_convexity,
    bernoulli_extended,
    extend_F,
    extend_F_prime,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# ============= Subsonic truncation =============

def chi0(s: ArrayLike, eps0: float) -> ArrayLike:
    """
    Cutoff of the speed ratio: identity up to 1 - 2 eps0, plateau 1 - 3 eps0 / 2
    from 1 - eps0 on, joined by the C2 quintic a + eps0 (t - t^3 + t^4 / 2).
    """
    if not 0.0 < eps0 < 0.25:
        raise DomainError("eps0 must lie in (0, 0.25)")
    x = np.asarray(s, dtype=float)
    a = 1.0 - 2.0 * eps0
    t = np.clip((x - a) / eps0, 0.0, 1.0)
    blend = a + eps0 * (t - t ** 3 + 0.5 * t ** 4)
    value = np.where(x <= a, x, np.where(x >= 1.0 - eps0, 1.0 - 1.5 * eps0, blend))
    return float(value) if np.ndim(s) == 0 else value


def chi0_prime(s: ArrayLike, eps0: float) -> ArrayLike:
    """(1 - t)^2 (1 + 2t) on the blend, so 0 <= chi0' <= 1."""
    x = np.asarray(s, dtype=float)
    a = 1.0 - 2.0 * eps0
    t = np.clip((x - a) / eps0, 0.0, 1.0)
    value = np.where(x <= a, 1.0, (1.0 - t) ** 2 * (1.0 + 2.0 * t))
    return float(value) if np.ndim(s) == 0 else value


def truncated_density(M: ArrayLike, B: ArrayLike, gas: GasModel,
                      eps0: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (H_check, truncated ratio, untruncated ratio) for momentum-squared M and Bernoulli B.

    The untruncated ratio sqrt(M)/H^((gamma+1)/2) is continued past the sonic value
    as sqrt(M/Sigma). Where it exceeds 1 - 2 eps0 the density is the branch density
    whose Mach number equals chi0(ratio); elsewhere it is H(M, B) unchanged.
    """
    m = np.asarray(M, dtype=float)
    b = np.asarray(B, dtype=float)
    sigma = np.asarray(sonic_data(b, gas).sigma)
    H = np.asarray(subsonic_density(np.minimum(m, sigma), b, gas), dtype=float)
    s_ext = np.sqrt(m) / H ** (0.5 * (gas.gamma + 1.0))
    active = s_ext > 1.0 - 2.0 * eps0
    ratio = np.asarray(chi0(s_ext, eps0), dtype=float)
    capped = np.asarray(branch_density(ratio, b, gas), dtype=float)
    return np.where(active, capped, H), ratio, s_ext


def effective_density(grad_psi, r: ArrayLike, k: float, psi: ArrayLike,
                      trunc: TruncatedProfile, gas: GasModel, eps0: float):
    """Truncated density and truncated speed ratio at a point (or arrays of points)."""
    gx, gr = (np.asarray(g, dtype=float) for g in grad_psi)
    rk = np.asarray(r, dtype=float) + k
    if np.any(rk <= 0.0):
        raise DomainError("r + k must be positive")
    M = (gx * gx + gr * gr) / (rk * rk)
    B = bernoulli_extended(trunc, psi, gas)
    H, ratio, _ = truncated_density(M, B, gas, eps0)
    if np.ndim(H) == 0:
        return float(H), float(ratio)
    return H, ratio


# ============= Discrete derivatives =============

def psi_gradient(psi: np.ndarray, grid: DomainGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Centered second-order gradient; one-sided upward at snapped wall nodes and the
    three-point wall formula at cut cells (wall value 0 a distance `gap` below).
    """
    dr = grid.dr
    psi_x, psi_r = np.gradient(psi, grid.dx, dr, edge_order=2)

    ii, jj = np.nonzero(grid.node_class == NodeClass.OBSTACLE)
    if ii.size:
        j1 = np.minimum(jj + 1, grid.nr)
        j2 = np.minimum(jj + 2, grid.nr)
        psi_r[ii, jj] = (-3.0 * psi[ii, jj] + 4.0 * psi[ii, j1] - psi[ii, j2]) / (2.0 * dr)

    ii, jj = np.nonzero(np.isfinite(grid.cut_gap))
    if ii.size:
        g = grid.cut_gap[ii, jj]
        p_c, p_n = psi[ii, jj], psi[ii, jj + 1]
        psi_r[ii, jj] = (g * g * (p_n - p_c) + dr * dr * p_c) / (g * dr * (g + dr))
    return psi_x, psi_r


def axis_coefficient(psi: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Least-squares a in psi ~ a r^2 over the first three off-axis nodes of each column."""
    r2 = r[1:4] ** 2
    return psi[:, 1:4] @ r2 / float(r2 @ r2)


def momentum_squared(psi: np.ndarray, grid: DomainGrid, k: float) -> np.ndarray:
    """|grad psi|^2 / (r+k)^2; at k = 0 the axis row uses the limit (2a)^2 of psi ~ a r^2."""
    psi_x, psi_r = psi_gradient(psi, grid)
    rk = grid.r[None, :] + k
    with np.errstate(divide="ignore", invalid="ignore"):
        M = (psi_x ** 2 + psi_r ** 2) / rk ** 2
    if k == 0.0:
        M[:, 0] = (2.0 * axis_coefficient(psi, grid.r)) ** 2
    return M


def nodal_density(psi: np.ndarray, grid: DomainGrid, k: float, trunc: TruncatedProfile,
                  gas: GasModel, eps0: float) -> Tuple[np.ndarray, np.ndarray]:
    """Truncated density and untruncated speed ratio at fluid nodes (nan elsewhere)."""
    M = momentum_squared(psi, grid, k)
    fluid = grid.fluid
    H = np.full(grid.shape, np.nan)
    s_ext = np.full(grid.shape, np.nan)
    B = bernoulli_extended(trunc, psi[fluid], gas)
    H[fluid], _, s_ext[fluid] = truncated_density(M[fluid], B, gas, eps0)
    if not np.all(np.isfinite(H[fluid])):
        bad = np.argwhere(fluid & ~np.isfinite(H))[0]
        raise NumericalError(f"non-finite density at node (i={bad[0]}, j={bad[1]})",
                             context={"node": tuple(int(v) for v in bad)})
    return H, s_ext


# ============= Field and linear system =============

@dataclass
class StreamField:
    """Discrete psi on a grid plus iteration diagnostics."""
    grid: DomainGrid
    psi: np.ndarray
    eps0: float
    m_L: float
    k: float = 0.0
    residual_history: List[float] = field(default_factory=list)
    picard_counts: List[int] = field(default_factory=list)
    q_history: List[float] = field(default_factory=list)
    linear_iterations: int = 0
    q: Optional[float] = None
    H: Optional[np.ndarray] = None
    s_ext: Optional[np.ndarray] = None
    elapsed_seconds: float = 0.0

    @property
    def picard_iterations(self) -> int:
        return int(sum(self.picard_counts))

    @property
    def truncation_active(self) -> bool:
        """True when the cutoff binds anywhere at k = 0."""
        if self.s_ext is None:
            return False
        return bool(np.nanmax(self.s_ext) > 1.0 - 2.0 * self.eps0)

    @property
    def certified(self) -> bool:
        return self.q is not None and self.q < 1.0 - 2.0 * self.eps0


@dataclass
class LinearSystem:
    """Frozen-coefficient system on the interior unknowns."""
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    rows: np.ndarray  # i index of each unknown
    cols: np.ndarray  # j index of each unknown
    H: np.ndarray
    s_ext: np.ndarray

    def unknowns(self, psi: np.ndarray) -> np.ndarray:
        return psi[self.rows, self.cols]


def source_slope(trunc: TruncatedProfile, s: ArrayLike) -> np.ndarray:
    """d(F_L F_L')/dpsi: the Bernoulli convexity on (0, m_L), the quadratic's on [-1, 0), 0 outside."""
    x = np.atleast_1d(np.asarray(s, dtype=float))
    m = trunc.total_stream
    slope = np.zeros_like(x)
    inner = (x > 0.0) & (x < m)
    if np.any(inner):
        slope[inner] = bernoulli_convexity(trunc, x[inner])
    quad = (x >= -1.0) & (x <= 0.0)
    if np.any(quad):
        t0p = trunc.theta0_prime
        slope[quad] = np.asarray(extend_F(trunc, x[quad])) * t0p + (t0p * (1.0 + x[quad])) ** 2
    return slope


def _assemble(psi: np.ndarray, grid: DomainGrid, k: float, trunc: TruncatedProfile,
              gas: GasModel, eps0: float) -> LinearSystem:
    H, s_ext = nodal_density(psi, grid, k, trunc, gas, eps0)
    I, Jn = np.nonzero(grid.interior)
    n = I.size
    index = np.full(grid.shape, -1, dtype=np.int64)
    index[I, Jn] = np.arange(n)
    dx, dr, r = grid.dx, grid.dr, grid.r
    Hp = H[I, Jn]
    own = np.arange(n)

    diag = np.zeros(n)
    rhs = np.zeros(n)
    rows, cols, vals = [own], [own], []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        Iq, Jq = I + di, Jn + dj
        Hq = H[Iq, Jq]
        Hf = np.where(np.isfinite(Hq), 0.5 * (Hp + Hq), Hp)
        if dj == 0:
            w = (dr / dx) / ((r[Jn] + k) * Hf)
        else:
            dist = np.full(n, dr)
            r_face = 0.5 * (r[Jn] + r[Jq])
            if dj == -1:
                gap = grid.cut_gap[I, Jn]
                cut = np.isfinite(gap)
                dist = np.where(cut, gap, dist)
                r_face = np.where(cut, r[Jn] - 0.5 * np.where(cut, gap, 0.0), r_face)
            w = (dx / dist) / ((r_face + k) * Hf)
        diag += w
        q = index[Iq, Jq]
        link = q >= 0
        rows.append(own[link])
        cols.append(q[link])
        vals.append(-w[link])
        rhs[~link] += w[~link] * psi[Iq[~link], Jq[~link]]

    if not np.all(np.isfinite(diag)):
        bad = int(np.flatnonzero(~np.isfinite(diag))[0])
        raise NumericalError(f"non-finite coefficient at node (i={I[bad]}, j={Jn[bad]})",
                             context={"node": (int(I[bad]), int(Jn[bad]))})

    # source linearized about psi: S(s) + S'(s)(x - s) with S' >= 0 kept on the diagonal
    s = psi[I, Jn]
    weight = (r[Jn] + k) * Hp * dx * dr
    source = np.asarray(extend_F(trunc, s)) * np.asarray(extend_F_prime(trunc, s))
    slope = np.maximum(source_slope(trunc, s), 0.0)
    rhs -= weight * (source - slope * s)
    diag += weight * slope

    matrix = sparse.csr_matrix(
        (np.concatenate([diag] + vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return LinearSystem(matrix=matrix, rhs=rhs, rows=I, cols=Jn, H=H, s_ext=s_ext)


def assemble(psi_current: StreamField, k: float, trunc: TruncatedProfile, gas: GasModel,
             config: SolverConfig) -> LinearSystem:
    """Five-point flux-form system with coefficients frozen at psi_current."""
    return _assemble(psi_current.psi, psi_current.grid, k, trunc, gas, config.eps0)


# ============= Linear solver =============

class FactorizedPreconditioner:
    """Sparse LU of a frozen operator, applied as an SPD preconditioner."""

    def __init__(self, matrix: sparse.spmatrix):
        try:
            self._lu = splu(sparse.csc_matrix(matrix), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as e:
            raise NumericalError(f"preconditioner factorization failed: {e}")

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self._lu.solve(v)


def preconditioned_cg(A: sparse.spmatrix, b: np.ndarray, x0: np.ndarray,
                      precondition: Callable[[np.ndarray], np.ndarray],
                      tol: float, max_iters: int) -> Tuple[np.ndarray, int]:
    """
    Conjugate gradient on A x = b; stops when sqrt(r.z) <= tol * sqrt(b.M^-1 b).
    """
    x = np.array(x0, dtype=float)
    ref2 = float(b @ precondition(b))
    if ref2 <= 0.0:
        if np.all(b == 0.0):
            return np.zeros_like(x), 0
        raise NumericalError("preconditioner is not positive definite")
    ref = np.sqrt(ref2)

    r = b - A @ x
    z = precondition(r)
    rz = float(r @ z)
    if rz < 0.0:
        raise NumericalError("preconditioner is not positive definite")
    if np.sqrt(rz) <= tol * ref:
        return x, 0
    p = z.copy()
    for it in range(1, max_iters + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if not pAp > 0.0:
            raise NumericalError("conjugate gradient breakdown: operator not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = precondition(r)
        rz_new = float(r @ z)
        if rz_new < 0.0 or not np.isfinite(rz_new):
            raise NumericalError("conjugate gradient breakdown")
        if np.sqrt(rz_new) <= tol * ref:
            return x, it
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericalError(f"conjugate gradient did not converge in {max_iters} iterations")


# ============= Initial data and checkpoints =============

def impose_boundary(psi: np.ndarray, grid: DomainGrid, side: np.ndarray, m_L: float) -> np.ndarray:
    """Dirichlet data: 0 on the wall and axis, m_L on top, side profile on inflow/outflow."""
    psi[grid.wall] = 0.0
    psi[grid.node_class == NodeClass.AXIS] = 0.0
    psi[:, -1] = m_L
    psi[0, :] = side
    psi[-1, :] = side
    return psi


def initial_guess(grid: DomainGrid, trunc: TruncatedProfile, kind: InitialGuess,
                  k: float) -> np.ndarray:
    """Boundary-data extension, clipped upstream stream function, or their average."""
    kind = InitialGuess(kind)
    side = side_boundary_values(trunc, grid, k)
    extension = np.broadcast_to(side, grid.shape).copy()
    upstream = np.broadcast_to(np.clip(np.asarray(trunc.stream(grid.r)), 0.0, trunc.m_L),
                               grid.shape).copy()
    if kind == InitialGuess.BOUNDARY_EXTENSION:
        psi = extension
    elif kind == InitialGuess.UPSTREAM_CLIPPED:
        psi = upstream
    else:
        psi = 0.5 * (extension + upstream)
    return impose_boundary(psi, grid, side, trunc.m_L)


@dataclass
class Checkpoint:
    """Restart point inside the k continuation."""
    config_hash: str
    stage: int
    iteration: int
    psi: np.ndarray


def write_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, config_hash=np.array(checkpoint.config_hash), stage=np.array(checkpoint.stage),
                 iteration=np.array(checkpoint.iteration), psi=checkpoint.psi)
    return path


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        return Checkpoint(
            config_hash=str(data["config_hash"]),
            stage=int(data["stage"]),
            iteration=int(data["iteration"]),
            psi=np.array(data["psi"], dtype=float),
        )


# ============= Solve =============

def q_statistic(field: StreamField, trunc: TruncatedProfile, gas: GasModel) -> float:
    """max nodal |grad psi| / (r H^((gamma+1)/2)) at k = 0."""
    _, s_ext = nodal_density(field.psi, field.grid, 0.0, trunc, gas, field.eps0)
    return float(np.nanmax(s_ext))


def aitken_factor(theta: float, previous: np.ndarray, increment: np.ndarray,
                  floor: float) -> float:
    """
    Irons-Tuck update of the relaxation factor from two consecutive unrelaxed
    increments, clipped to [floor, 1]. A mode with Picard gain lambda is driven
    toward the factor 1 / (1 - lambda).
    """
    change = increment - previous
    denom = float(change @ change)
    if denom == 0.0:
        return theta
    value = -theta * float(previous @ change) / denom
    return float(np.clip(value, floor, 1.0))


def _picard_stage(psi: np.ndarray, grid: DomainGrid, k: float, trunc: TruncatedProfile,
                  gas: GasModel, config: SolverConfig, field: StreamField, stage: int,
                  start_iteration: int, checkpoint: Optional[Callable[[int, int, np.ndarray], None]]
                  ) -> np.ndarray:
    settings = get_settings()
    picard, linear = config.picard, config.linear
    theta = picard.damping
    m_L = trunc.m_L
    history: List[float] = []
    preconditioner: Optional[FactorizedPreconditioner] = None
    previous: Optional[np.ndarray] = None

    for it in range(start_iteration, picard.max_iters):
        system = _assemble(psi, grid, k, trunc, gas, config.eps0)
        x0 = system.unknowns(psi)
        fresh = preconditioner is None
        if fresh:
            preconditioner = FactorizedPreconditioner(system.matrix)
        try:
            x, lin_iters = preconditioned_cg(system.matrix, system.rhs, x0, preconditioner,
                                             linear.tol, linear.max_iters)
        except NumericalError:
            if fresh:
                raise
            logger.debug(f"Stale preconditioner at k={k}, iteration {it}; refactoring")
            preconditioner = FactorizedPreconditioner(system.matrix)
            x, lin_iters = preconditioned_cg(system.matrix, system.rhs, x0, preconditioner,
                                             linear.tol, linear.max_iters)
        field.linear_iterations += lin_iters
        if lin_iters > settings.linear_refactor_iters:
            preconditioner = None

        increment = x - x0
        update = float(np.max(np.abs(increment))) / m_L
        if picard.relaxation == Relaxation.AITKEN and previous is not None:
            theta = aitken_factor(theta, previous, increment, picard.min_damping)
            if update > history[-1]:
                theta = max(picard.min_damping, 0.5 * theta)
        previous = increment

        new = psi.copy()
        new[system.rows, system.cols] = x0 + theta * increment
        psi = new
        history.append(update)
        field.residual_history.append(update)
        logger.debug(f"k={k} iteration {it}: relative update {update:.3e}, factor {theta:.3f}, "
                     f"{lin_iters} CG iterations")

        if not np.isfinite(update) or float(np.max(np.abs(psi))) > 10.0 * m_L:
            raise DivergedError(f"Picard iteration blew up at k={k}, iteration {it}",
                                history=field.residual_history, context={"k": k, "stage": stage})
        if checkpoint is not None:
            checkpoint(stage, it + 1, psi)
        if update < picard.tol_rel:
            field.picard_counts.append(len(history))
            logger.info(f"Stage k={k} converged in {len(history)} Picard iterations")
            return psi

    raise DivergedError(
        f"Picard iteration did not converge at k={k} within {picard.max_iters} iterations "
        f"(last update {history[-1] if history else float('nan'):.3e})",
        history=field.residual_history, context={"k": k, "stage": stage},
    )


def solve(grid: DomainGrid, trunc: TruncatedProfile, gas: GasModel, config: SolverConfig,
          initial: Optional[np.ndarray] = None, resume: Optional[Checkpoint] = None,
          checkpoint_path: Optional[Union[str, Path]] = None, checkpoint_every: Optional[int] = None,
          config_hash: str = "") -> StreamField:
    """
    Relaxed Picard iteration with k continuation; returns the k = 0 field and its Q statistic.

    Raises DivergedError when a stage fails to converge and NumericalError on
    linear-solver breakdown.
    """
    started = time.perf_counter()
    schedule = list(config.k_schedule)
    start_stage, start_iteration = 0, 0

    if resume is not None:
        if config_hash and resume.config_hash and resume.config_hash != config_hash:
            raise ConfigurationError("checkpoint was written for a different configuration")
        if resume.psi.shape != grid.shape or not 0 <= resume.stage < len(schedule):
            raise ConfigurationError("checkpoint does not match the grid or k schedule")
        psi = resume.psi.copy()
        start_stage, start_iteration = resume.stage, resume.iteration
        logger.info(f"Resuming at stage {start_stage} (k={schedule[start_stage]}), iteration {start_iteration}")
    elif initial is not None:
        psi = np.array(initial, dtype=float)
        if psi.shape != grid.shape:
            raise ConfigurationError(f"initial field shape {psi.shape} does not match grid {grid.shape}")
    else:
        psi = initial_guess(grid, trunc, InitialGuess.BOUNDARY_EXTENSION, schedule[0])

    field = StreamField(grid=grid, psi=psi, eps0=config.eps0, m_L=trunc.m_L)

    checkpoint = None
    if checkpoint_path is not None:
        every = checkpoint_every or get_settings().checkpoint_every

        def checkpoint(stage: int, iteration: int, current: np.ndarray) -> None:
            if iteration % every == 0:
                write_checkpoint(checkpoint_path, Checkpoint(config_hash, stage, iteration, current))

    for stage in range(start_stage, len(schedule)):
        k = schedule[stage]
        side = side_boundary_values(trunc, grid, k)
        psi = impose_boundary(psi, grid, side, trunc.m_L)
        first = start_iteration if stage == start_stage else 0
        psi = _picard_stage(psi, grid, k, trunc, gas, config, field, stage, first, checkpoint)
        _, s_ext = nodal_density(psi, grid, k, trunc, gas, config.eps0)
        field.q_history.append(float(np.nanmax(s_ext)))
        if checkpoint_path is not None:
            next_stage = min(stage + 1, len(schedule) - 1)
            write_checkpoint(checkpoint_path, Checkpoint(config_hash, next_stage, 0, psi))

    field.psi = psi
    field.k = 0.0
    field.H, field.s_ext = nodal_density(psi, grid, 0.0, trunc, gas, config.eps0)
    field.q = float(np.nanmax(field.s_ext))
    field.elapsed_seconds = time.perf_counter() - started
    logger.info(
        f"Solve finished: Q={field.q:.6f}, {field.picard_iterations} Picard iterations, "
        f"{field.linear_iterations} CG iterations, {field.elapsed_seconds:.2f}s"
    )
    return field


def residual_norm(field: StreamField, k: float, trunc: TruncatedProfile, gas: GasModel) -> float:
    """r-weighted discrete L2 norm of the divergence-form residual at regularization k."""
    grid = field.grid
    system = _assemble(field.psi, grid, k, trunc, gas, field.eps0)
    x = system.unknowns(field.psi)
    cell = grid.dx * grid.dr
    pointwise = (system.matrix @ x - system.rhs) / cell
    r = grid.r[system.cols]
    return float(np.sqrt(np.sum(pointwise ** 2 * r) * cell))
