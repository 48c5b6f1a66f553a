"""
Flow reconstruction and the verification suite.

A converged stream function is turned back into (rho, u, v) through
d_x psi = -r rho v, d_r psi = r rho u and the untruncated subsonic density, then
checked against the properties a subsonic solution must have: bounds, radial
monotonicity, positive axial velocity, the Mach certificate, Bernoulli and
vorticity transport along streamlines, far-field decay and the Euler residuals.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator

from app.config import get_settings
from app.errors import (
    ConfigurationError,
    DivergedError,
    NumericalError,
    PreconditionError,
    TracingError,
)
from app.gas_model import GasModel, enthalpy, sonic_data, subsonic_density
from app.geometry_grid import DomainGrid
from app.models import InitialGuess
from app.schemas import (
    CheckResult,
    FarfieldReport,
    SolverConfig,
    UniquenessReport,
    VerificationReport,
)
from app.stream_solver import (
    StreamField,
    axis_coefficient,
    initial_guess,
    momentum_squared,
    psi_gradient,
    solve,
)
from app.upstream_profile import TruncatedProfile, bernoulli_extended

logger = logging.getLogger(__name__)


@dataclass
class FlowField:
    """Physical flow on the grid; nan at wall nodes, omega only where the full stencil is fluid."""
    grid: DomainGrid
    gas: GasModel
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    mach: np.ndarray
    omega: np.ndarray
    bernoulli: np.ndarray
    flagged: np.ndarray

    @property
    def flagged_count(self) -> int:
        return int(np.count_nonzero(self.flagged))


def _stencil_mask(grid: DomainGrid) -> np.ndarray:
    """Interior nodes whose four neighbours all carry a flow state."""
    fluid = grid.fluid
    mask = grid.interior.copy()
    mask[1:, :] &= fluid[:-1, :]
    mask[:-1, :] &= fluid[1:, :]
    mask[:, 1:] &= fluid[:, :-1]
    mask[:, :-1] &= fluid[:, 1:]
    return mask


# ============= Reconstruction =============

def reconstruct(field: StreamField, trunc: TruncatedProfile, gas: GasModel) -> FlowField:
    """
    (rho, u, v, Mach, omega) from psi at k = 0.

    rho = H(M, B_L(psi)) without the subsonic cutoff. Nodes whose momentum
    exceeds the sonic value are flagged and evaluated at the sonic density.
    On the axis u is the limit 2 a(x) / rho of the quadratic fit and v = 0.
    """
    grid = field.grid
    psi = field.psi
    shape = grid.shape
    fluid = grid.fluid
    tol = get_settings().near_sonic_tol

    psi_x, psi_r = psi_gradient(psi, grid)
    M = momentum_squared(psi, grid, 0.0)

    B = np.full(shape, np.nan)
    B[fluid] = bernoulli_extended(trunc, psi[fluid], gas)
    sigma = np.asarray(sonic_data(B[fluid], gas).sigma)
    flagged = np.zeros(shape, dtype=bool)
    flagged[fluid] = M[fluid] > sigma * (1.0 + tol)

    rho = np.full(shape, np.nan)
    rho[fluid] = subsonic_density(np.minimum(M[fluid], sigma), B[fluid], gas)

    R = np.broadcast_to(grid.r[None, :], shape)
    u = np.full(shape, np.nan)
    v = np.full(shape, np.nan)
    off_axis = fluid & (R > 0.0)
    u[off_axis] = psi_r[off_axis] / (R[off_axis] * rho[off_axis])
    v[off_axis] = -psi_x[off_axis] / (R[off_axis] * rho[off_axis])
    on_axis = fluid & (R == 0.0)
    a = np.broadcast_to(axis_coefficient(psi, grid.r)[:, None], shape)
    u[on_axis] = 2.0 * a[on_axis] / rho[on_axis]
    v[on_axis] = 0.0

    mach = np.full(shape, np.nan)
    mach[fluid] = np.sqrt(u[fluid] ** 2 + v[fluid] ** 2) / rho[fluid] ** (0.5 * (gas.gamma - 1.0))

    du_dx, du_dr = np.gradient(u, grid.dx, grid.dr)
    dv_dx, dv_dr = np.gradient(v, grid.dx, grid.dr)
    omega = np.full(shape, np.nan)
    stencil = _stencil_mask(grid)
    omega[stencil] = dv_dx[stencil] - du_dr[stencil]

    bern = np.full(shape, np.nan)
    bern[fluid] = 0.5 * (u[fluid] ** 2 + v[fluid] ** 2) + enthalpy(rho[fluid], gas)

    flow = FlowField(grid=grid, gas=gas, rho=rho, u=u, v=v, mach=mach, omega=omega,
                     bernoulli=bern, flagged=flagged)
    if flow.flagged_count:
        logger.warning(f"{flow.flagged_count} nodes beyond the sonic value during reconstruction")
    return flow


def recover_stream(flow: FlowField) -> np.ndarray:
    """
    psi recomputed as int_0^r s rho u ds per column (trapezoid rule).

    Only meaningful on columns without obstacle; obstacle columns are nan.
    """
    grid = flow.grid
    integrand = grid.r[None, :] * flow.rho * flow.u
    out = cumulative_trapezoid(integrand, grid.r, axis=1, initial=0.0)
    out[grid.f_nodes > 0.0, :] = np.nan
    return out


def euler_residual(flow: FlowField) -> Tuple[float, float, float]:
    """
    r-weighted discrete L2 norms of the conservative axisymmetric Euler equations:
    mass, axial momentum, radial momentum. Centered differences, P = rho^gamma / gamma.
    """
    grid = flow.grid
    gamma = flow.gas.gamma
    R = grid.r[None, :]
    rho, u, v = flow.rho, flow.u, flow.v
    P = rho ** gamma / gamma
    dx, dr = grid.dx, grid.dr

    def d_x(q: np.ndarray) -> np.ndarray:
        return np.gradient(q, dx, axis=0)

    def d_r(q: np.ndarray) -> np.ndarray:
        return np.gradient(q, dr, axis=1)

    mass = d_x(R * rho * u) + d_r(R * rho * v)
    axial = d_x(R * rho * u * u) + d_r(R * rho * u * v) + R * d_x(P)
    radial = d_x(R * rho * u * v) + d_r(R * rho * v * v) + R * d_r(P)

    mask = _stencil_mask(grid)
    weight = np.broadcast_to(R, grid.shape)[mask] * dx * dr
    return tuple(float(np.sqrt(np.sum(res[mask] ** 2 * weight))) for res in (mass, axial, radial))


# ============= Streamlines =============

def _fill_wall_from_above(values: np.ndarray, grid: DomainGrid) -> np.ndarray:
    """Copy each column's first flow value down into its wall nodes (for interpolation)."""
    out = np.array(values, dtype=float)
    for i in np.flatnonzero(grid.wall.any(axis=1)):
        wall = grid.wall[i]
        above = np.flatnonzero(~wall)
        if above.size:
            out[i, wall] = out[i, above[0]]
    return out


def _interpolator(values: np.ndarray, grid: DomainGrid) -> RegularGridInterpolator:
    return RegularGridInterpolator((grid.x, grid.r), values, method="linear",
                                   bounds_error=False, fill_value=None)


def streamline_invariants(flow: FlowField, field: StreamField, trunc: TruncatedProfile,
                          n_lines: Optional[int] = None) -> Tuple[float, float]:
    """
    Worst Bernoulli drift and worst vorticity-ratio drift along traced streamlines.

    Lines are seeded at the inflow at stream values m_L (i + 1/2) / n and advanced
    in x by RK4 on dr/dx = v/u with bilinear interpolation. Along each line the
    drifts are max |B - B_L(psi_seed)| and max |omega/(r rho) + u_L'(kappa)/(rho_inf kappa)|.
    """
    grid = flow.grid
    n_lines = n_lines or get_settings().streamline_count
    if n_lines < 1:
        raise ConfigurationError("need at least one streamline")

    psi_seed = trunc.m_L * (np.arange(n_lines) + 0.5) / n_lines
    y = np.interp(psi_seed, field.psi[0, :], grid.r)
    b_target = np.asarray(bernoulli_extended(trunc, psi_seed, flow.gas))
    w_target = -np.asarray(trunc.slope_over_r(trunc.kappa(psi_seed))) / trunc.rho_inf

    R = np.broadcast_to(grid.r[None, :], grid.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = flow.omega / (R * flow.rho)
    u_at = _interpolator(_fill_wall_from_above(flow.u, grid), grid)
    v_at = _interpolator(_fill_wall_from_above(flow.v, grid), grid)
    b_at = _interpolator(_fill_wall_from_above(flow.bernoulli, grid), grid)
    w_at = _interpolator(ratio, grid)

    def points(x: float, r: np.ndarray) -> np.ndarray:
        return np.column_stack([np.full_like(r, x), r])

    def slope(x: float, r: np.ndarray) -> np.ndarray:
        p = points(x, r)
        s = v_at(p) / u_at(p)
        if not np.all(np.isfinite(s)):
            raise TracingError(f"streamline stagnates near x={x:.6g}")
        return s

    h = grid.dx
    b_drift = w_drift = 0.0
    for step, x in enumerate(grid.x):
        wall = float(grid.obstacle.f(x))
        if np.any(y < wall) or np.any(y < 0.0) or np.any(y > grid.L):
            raise TracingError(f"streamline left the fluid region at x={x:.6g}",
                               context={"x": float(x)})
        p = points(x, y)
        b_gap = np.abs(b_at(p) - b_target)
        w_gap = np.abs(w_at(p) - w_target)
        if np.any(np.isfinite(b_gap)):
            b_drift = max(b_drift, float(np.nanmax(b_gap)))
        if np.any(np.isfinite(w_gap)):
            w_drift = max(w_drift, float(np.nanmax(w_gap)))
        if step == grid.nx:
            break
        k1 = slope(x, y)
        k2 = slope(x + 0.5 * h, y + 0.5 * h * k1)
        k3 = slope(x + 0.5 * h, y + 0.5 * h * k2)
        k4 = slope(x + h, y + h * k3)
        y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    logger.debug(f"Traced {n_lines} streamlines: Bernoulli drift {b_drift:.3e}, vorticity drift {w_drift:.3e}")
    return b_drift, w_drift


# ============= Far field, positivity, barrier =============

def farfield_check(field: StreamField, trunc: TruncatedProfile, gas: GasModel,
                   x_probe_fraction: float = 0.9, x_probe: Optional[float] = None,
                   flow: Optional[FlowField] = None) -> FarfieldReport:
    """
    Decay toward the upstream state on the probe columns |x| = x_probe and the
    r-weighted L2 norm of (rho u - rho_inf u_L, rho v) over the grid.
    """
    grid = field.grid
    target = x_probe if x_probe is not None else x_probe_fraction * grid.X
    if not 0.0 < target <= grid.X:
        raise ConfigurationError(f"probe position {target} outside (0, X={grid.X}]")
    cols = sorted({int(np.argmin(np.abs(grid.x - target))), int(np.argmin(np.abs(grid.x + target)))})

    r = grid.r
    psi_bar = np.asarray(trunc.stream(r))
    deviation = float(np.max(np.abs(field.psi[cols, :] - psi_bar[None, :])))

    psi_x, psi_r = psi_gradient(field.psi, grid)
    dpsi_bar = trunc.rho_inf * np.asarray(trunc.velocity(r)) * r
    gap = np.sqrt(psi_x[cols, :] ** 2 + (psi_r[cols, :] - dpsi_bar[None, :]) ** 2)
    gradient = float(np.max(gap[:, r > 0.0] / np.sqrt(r[r > 0.0])[None, :]))

    flow = flow or reconstruct(field, trunc, gas)
    fluid = grid.fluid
    R = np.broadcast_to(r[None, :], grid.shape)
    axial = flow.rho * flow.u - trunc.rho_inf * np.asarray(trunc.velocity(R))
    radial = flow.rho * flow.v
    density = (axial ** 2 + radial ** 2) * R
    weighted = float(np.sqrt(np.sum(density[fluid]) * grid.dx * grid.dr))

    return FarfieldReport(x_probe=float(abs(grid.x[cols[-1]])), probe_deviation=deviation,
                          probe_gradient=gradient, weighted_l2=weighted)


def farfield_sensitivity(reference: FarfieldReport, doubled: FarfieldReport,
                         floor: float = 1e-10) -> VerificationReport:
    """
    Compare a run with its X-doubled companion probed at the same physical column:
    probe deviation below 10x the companion's, weighted L2 within 20 percent.
    """
    probe_bound = 10.0 * doubled.probe_deviation + floor
    l2_gap = abs(doubled.weighted_l2 - reference.weighted_l2)
    l2_bound = 0.2 * reference.weighted_l2 + floor
    checks = [
        CheckResult(name="farfield_probe", passed=reference.probe_deviation <= probe_bound,
                    margin=probe_bound - reference.probe_deviation, tolerance=probe_bound),
        CheckResult(name="farfield_l2_stability", passed=l2_gap <= l2_bound,
                    margin=l2_bound - l2_gap, tolerance=l2_bound),
    ]
    return VerificationReport(checks=checks)


def positivity_check(flow: FlowField, field: StreamField) -> CheckResult:
    """
    u > 0 at every flow node with r > 0 and on the obstacle boundary 0 < x < 1.

    The wall value uses the one-sided normal slope of the quadratic through
    (0, 0), (d1, psi_1), (d2, psi_2) above the wall.
    """
    grid = flow.grid
    R = np.broadcast_to(grid.r[None, :], grid.shape)
    off_axis = grid.fluid & (R > 0.0)
    u_min = float(np.min(flow.u[off_axis]))

    wall_min = np.inf
    for i in np.flatnonzero(grid.f_nodes > 0.0):
        above = np.flatnonzero(~grid.wall[i])
        if above.size < 2:
            continue
        j1, j2 = above[0], above[1]
        f = grid.f_nodes[i]
        d1, d2 = grid.r[j1] - f, grid.r[j2] - f
        p1, p2 = field.psi[i, j1], field.psi[i, j2]
        slope = (p1 * d2 * d2 - p2 * d1 * d1) / (d1 * d2 * (d2 - d1))
        wall_min = min(wall_min, float(slope / (f * flow.rho[i, j1])))

    margin = min(u_min, wall_min)
    detail = f"min u off axis {u_min:.6g}"
    if np.isfinite(wall_min):
        detail += f", min wall u {wall_min:.6g}"
    return CheckResult(name="positivity", passed=margin > 0.0, margin=margin,
                       tolerance=0.0, detail=detail)


def barrier_check(field: StreamField, trunc: TruncatedProfile, k: float = 0.0,
                  delta0: Optional[float] = None) -> float:
    """max psi / (rho_inf (r + k)^2) over flow nodes with 0 < r < delta0 (default 0.2 L)."""
    grid = field.grid
    delta0 = 0.2 * grid.L if delta0 is None else float(delta0)
    R = np.broadcast_to(grid.r[None, :], grid.shape)
    window = grid.fluid & (R > 0.0) & (R < delta0)
    if not np.any(window):
        raise ConfigurationError(f"barrier window r < {delta0} holds no grid nodes")
    return float(np.max(field.psi[window] / (trunc.rho_inf * (R[window] + k) ** 2)))


# ============= Uniqueness =============

def uniqueness_probe(grid: DomainGrid, trunc: TruncatedProfile, gas: GasModel,
                     config: SolverConfig, n_inits: int = 3,
                     tolerance: float = 1e-6) -> UniquenessReport:
    """
    Solve from distinct admissible starts (boundary extension, clipped upstream
    stream function and blends between them) and report the largest pairwise
    relative L-infinity distance. Any failed run makes the probe inconclusive.
    """
    if n_inits < 2:
        raise PreconditionError("uniqueness probe needs at least two initializations")
    k0 = config.k_schedule[0]
    extension = initial_guess(grid, trunc, InitialGuess.BOUNDARY_EXTENSION, k0)
    upstream = initial_guess(grid, trunc, InitialGuess.UPSTREAM_CLIPPED, k0)

    fields: List[np.ndarray] = []
    for w in np.linspace(0.0, 1.0, n_inits):
        start = (1.0 - w) * extension + w * upstream
        try:
            fields.append(solve(grid, trunc, gas, config, initial=start).psi)
        except (DivergedError, NumericalError) as e:
            logger.warning(f"Uniqueness probe inconclusive: start weight {w:.3f} failed: {e}")
            return UniquenessReport(status="inconclusive", runs=len(fields) + 1, tolerance=tolerance)

    distance = max(float(np.max(np.abs(a - b))) for a, b in combinations(fields, 2)) / trunc.m_L
    status = "agree" if distance <= tolerance else "disagree"
    logger.info(f"Uniqueness probe over {n_inits} starts: {status}, distance {distance:.3e}")
    return UniquenessReport(status=status, distance=distance, runs=n_inits, tolerance=tolerance)


# ============= Suite =============

def _finite_check(name: str, values: Tuple[float, ...], tol: float) -> CheckResult:
    worst = max(values)
    if not all(np.isfinite(v) for v in values):
        return CheckResult(name=name, passed=False, margin=-np.inf, detail="non-finite value")
    detail = ", ".join(f"{v:.6g}" for v in values)
    return CheckResult(name=name, passed=worst <= tol, margin=tol - worst, tolerance=tol, detail=detail)


def grid_tolerances(grid: DomainGrid, trunc: TruncatedProfile,
                    gas: GasModel) -> Tuple[float, float, float]:
    """
    (Euler, Bernoulli drift, vorticity-ratio drift) tolerances, each h = max(dx, dr)
    times the scale of the quantity it bounds.
    """
    h = max(grid.dx, grid.dr)
    rho, u_max = trunc.rho_inf, trunc.sup_velocity
    flux = rho * u_max ** 2 + rho ** gas.gamma / gas.gamma
    euler = h * flux * np.sqrt(grid.X) * grid.L
    nodes, _ = trunc.quadrature()
    ratio = float(np.max(np.abs(trunc.slope_over_r(nodes)))) / rho
    return euler, h * u_max ** 2, h * (ratio + u_max / (rho * grid.L ** 2))


def run_verification_suite(field: StreamField, trunc: TruncatedProfile, gas: GasModel,
                           n_lines: Optional[int] = None, probe_fraction: float = 0.9,
                           delta0: Optional[float] = None,
                           doubled: Optional[FarfieldReport] = None,
                           euler_tol: Optional[float] = None,
                           streamline_tol: Optional[float] = None,
                           bound_tol: Optional[float] = None) -> VerificationReport:
    """
    Run every primary check once and collect them in a report.

    Euler residuals and streamline drifts are held to grid-scaled tolerances
    (see grid_tolerances) unless `euler_tol` / `streamline_tol` override them.
    The far-field check needs the X-doubled companion report `doubled`; without
    it the check fails.
    """
    grid = field.grid
    psi = field.psi
    m_L = trunc.m_L
    tol = 1e-8 * m_L if bound_tol is None else bound_tol
    R = np.broadcast_to(grid.r[None, :], grid.shape)
    flow = reconstruct(field, trunc, gas)
    checks: List[CheckResult] = []

    low, high = float(np.min(psi)), float(np.max(psi))
    bound_margin = min(low + tol, m_L + tol - high)
    checks.append(CheckResult(name="bounds", passed=bound_margin >= 0.0, margin=bound_margin,
                              tolerance=tol, detail=f"psi in [{low:.6g}, {high:.6g}]"))

    excess = float(np.max(psi - np.asarray(trunc.stream(grid.r))[None, :]))
    checks.append(CheckResult(name="upstream_comparison", passed=excess <= tol,
                              margin=tol - excess, tolerance=tol))

    pairs = grid.fluid[:, 1:] & ~grid.solid[:, :-1]
    rise = float(np.min((psi[:, 1:] - psi[:, :-1])[pairs])) / m_L
    checks.append(CheckResult(name="radial_monotonicity", passed=rise > 0.0, margin=rise))

    checks.append(positivity_check(flow, field))

    q = field.q if field.q is not None else float(np.nanmax(flow.mach))
    cap = 1.0 - 2.0 * field.eps0
    checks.append(CheckResult(name="subsonic_certificate", passed=q < cap, margin=cap - q,
                              tolerance=cap, detail=f"Q={q:.12g}"))

    identity_tol = 1e-12 * max(1.0, q)
    identity_gap = abs(float(np.nanmax(flow.mach)) - q)
    checks.append(CheckResult(name="mach_q_identity", passed=identity_gap <= identity_tol,
                              margin=identity_tol - identity_gap, tolerance=identity_tol))

    h_inf = enthalpy(trunc.rho_inf, gas)
    b_lo = h_inf + 0.5 * trunc.min_velocity ** 2
    b_hi = h_inf + 0.5 * trunc.sup_velocity ** 2
    b_tol = 1e-10 * b_hi
    B = np.asarray(bernoulli_extended(trunc, psi[grid.fluid], gas))
    b_margin = min(float(np.min(B)) - b_lo, b_hi - float(np.max(B))) + b_tol
    checks.append(CheckResult(name="bernoulli_range", passed=b_margin >= 0.0, margin=b_margin,
                              tolerance=b_tol))

    barrier = barrier_check(field, trunc, 0.0, delta0)
    barrier_cap = 0.5 * trunc.sup_velocity * (1.0 + 1e-6) + tol / (trunc.rho_inf * grid.dr ** 2)
    checks.append(CheckResult(name="barrier", passed=barrier <= barrier_cap,
                              margin=barrier_cap - barrier, tolerance=barrier_cap,
                              detail=f"constant {barrier:.6g}"))

    far = farfield_check(field, trunc, gas, probe_fraction, flow=flow)
    far_detail = (f"x={far.x_probe:.6g} deviation={far.probe_deviation:.3e} "
                  f"gradient={far.probe_gradient:.3e} l2={far.weighted_l2:.6g}")
    if doubled is not None:
        sensitivity = farfield_sensitivity(far, doubled, floor=100.0 * tol)
        margin = min(c.margin for c in sensitivity.checks)
        checks.append(CheckResult(name="farfield", passed=sensitivity.passed, margin=margin,
                                  detail=far_detail))
    else:
        checks.append(CheckResult(name="farfield", passed=False, margin=-np.inf,
                                  detail=f"no X-doubled companion run; {far_detail}"))

    euler_default, b_tol, w_tol = grid_tolerances(grid, trunc, gas)
    euler = euler_tol if euler_tol is not None else euler_default
    checks.append(_finite_check("euler_residuals", euler_residual(flow), euler))

    if streamline_tol is not None:
        b_tol = w_tol = streamline_tol
    try:
        b_drift, w_drift = streamline_invariants(flow, field, trunc, n_lines)
        detail = f"bernoulli {b_drift:.6g} (tol {b_tol:.3g}), vorticity {w_drift:.6g} (tol {w_tol:.3g})"
        if np.isfinite(b_drift) and np.isfinite(w_drift):
            margin = min(b_tol - b_drift, w_tol - w_drift)
        else:
            margin, detail = -np.inf, "non-finite value"
        checks.append(CheckResult(name="streamlines", passed=margin >= 0.0, margin=margin,
                                  tolerance=min(b_tol, w_tol), detail=detail))
    except TracingError as e:
        checks.append(CheckResult(name="streamlines", passed=False, margin=-np.inf, detail=str(e)))

    report = VerificationReport(checks=checks, flagged_nodes=flow.flagged_count)
    if report.passed:
        logger.info(f"Verification suite passed ({len(checks)} checks)")
    else:
        logger.warning(f"Verification suite failures: {report.failures()}")
    return report


# ============= Report I/O =============

def write_report(report: VerificationReport, path: Union[str, Path]) -> Path:
    """Key-value text: a header line, then one [check] record per check."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"flagged_nodes = {report.flagged_nodes}", f"passed = {str(report.passed).lower()}"]
    for c in report.checks:
        lines += ["", "[check]", f"name = {c.name}", f"passed = {str(c.passed).lower()}",
                  f"margin = {c.margin!r}", f"tolerance = {c.tolerance!r}"]
        if c.detail:
            lines.append(f"detail = {' '.join(c.detail.splitlines())}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_report(path: Union[str, Path]) -> VerificationReport:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"report not found: {path}")
    header, records = {}, []
    current = header
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == "[check]":
            current = {}
            records.append(current)
            continue
        key, _, value = line.partition(" = ")
        current[key] = value

    checks = [
        CheckResult(name=rec["name"], passed=rec["passed"] == "true", margin=float(rec["margin"]),
                    tolerance=float(rec["tolerance"]), detail=rec.get("detail"))
        for rec in records
    ]
    return VerificationReport(checks=checks, flagged_nodes=int(header.get("flagged_nodes", 0)))
