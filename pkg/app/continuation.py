"""
Continuation in the upstream density.

Sweeps rho_inf downward and records the subsonic certificate Q at each
density, brackets the critical density by bisection on certification, and
exports a certified solution sequence with a pointwise Cauchy diagnostic.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from app.cli_io import FIELD_COLUMNS, field_rows
from app.errors import (
    DivergedError,
    HypothesisError,
    InsufficientDataError,
    NumericalError,
    PreconditionError,
)
from app.flow_verify import farfield_check, reconstruct, run_verification_suite
from app.gas_model import GasModel
from app.geometry_grid import DomainGrid, Obstacle, build_grid
from app.models import SweepStatus
from app.schemas import FarfieldReport, LimitSequenceReport, SolverConfig, VerificationReport
from app.stream_solver import StreamField, solve
from app.upstream_profile import RadialProfile, TruncatedProfile, UpstreamProfile, truncate

logger = logging.getLogger(__name__)


@dataclass
class ProblemSetup:
    """Everything a solve needs except the upstream density."""
    gas: GasModel
    profile: UpstreamProfile
    obstacle: Obstacle
    X: float
    L: float
    nx: int
    nr: int
    solver: SolverConfig = field(default_factory=SolverConfig)
    _grid: Optional[DomainGrid] = field(default=None, init=False, repr=False)

    @property
    def grid(self) -> DomainGrid:
        if self._grid is None:
            self._grid = build_grid(self.obstacle, self.X, self.L, self.nx, self.nr)
        return self._grid

    def truncate(self, rho_inf: float) -> TruncatedProfile:
        return truncate(self.profile.with_density(rho_inf), self.L, self.obstacle.J)

    @property
    def sonic_threshold(self) -> float:
        return self.profile.sonic_threshold(self.gas)


@dataclass
class SweepRecord:
    """Outcome of one density in a sweep."""
    rho_inf: float
    status: SweepStatus
    q: Optional[float]
    q_lower_bound: float
    picard_iterations: int = 0
    field: Optional[StreamField] = None
    trunc: Optional[TruncatedProfile] = None
    gas: Optional[GasModel] = None
    message: str = ""

    @property
    def certified(self) -> bool:
        return self.status == SweepStatus.CERTIFIED


@dataclass
class BracketResult:
    """Critical-density bracket with the certified endpoint's full report."""
    lo: float
    hi: float
    hi_record: SweepRecord
    report: VerificationReport
    steps: int = 0

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def upstream_mach_bound(profile: RadialProfile, rho_inf: float, gas: GasModel) -> float:
    """sup u / rho_inf^((gamma-1)/2), a lower bound for Q."""
    return profile.sup_velocity / rho_inf ** (0.5 * (gas.gamma - 1.0))


def analytic_threshold(profile: RadialProfile, gas: GasModel, eps0: float) -> float:
    """Density at which the upstream Mach number equals 1 - 2 eps0."""
    return (profile.sup_velocity / (1.0 - 2.0 * eps0)) ** (2.0 / (gas.gamma - 1.0))


def solve_at(setup: ProblemSetup, rho_inf: float,
             initial: Optional[np.ndarray] = None) -> SweepRecord:
    """One solve at rho_inf; divergence and numerical failure are recorded, not raised."""
    trunc = setup.truncate(rho_inf)
    bound = upstream_mach_bound(setup.profile, rho_inf, setup.gas)
    try:
        result = solve(setup.grid, trunc, setup.gas, setup.solver, initial=initial)
    except (DivergedError, NumericalError) as e:
        logger.warning(f"rho_inf={rho_inf}: solve failed: {e}")
        return SweepRecord(rho_inf=rho_inf, status=SweepStatus.DIVERGED, q=None,
                           q_lower_bound=bound, trunc=trunc, gas=setup.gas, message=str(e))
    status = SweepStatus.CERTIFIED if result.certified else SweepStatus.TRUNCATION_ACTIVE
    logger.info(f"rho_inf={rho_inf}: {status.value}, Q={result.q:.9f}")
    return SweepRecord(rho_inf=rho_inf, status=status, q=result.q, q_lower_bound=bound,
                       picard_iterations=result.picard_iterations, field=result, trunc=trunc,
                       gas=setup.gas)


def _warm_start(previous: Optional[SweepRecord], trunc_m_L: float) -> Optional[np.ndarray]:
    if previous is None or previous.field is None:
        return None
    return previous.field.psi * (trunc_m_L / previous.field.m_L)


def sweep(rho_list: Sequence[float], setup: ProblemSetup, warm_start: bool = True,
          threads: int = 1) -> List[SweepRecord]:
    """
    Solve at each density of a strictly decreasing list.

    Warm starts rescale the previous field by the m_L ratio and run in order;
    cold starts may run on a thread pool. Failures below the critical density
    are recorded in the returned records.
    """
    rho_list = [float(r) for r in rho_list]
    if not rho_list:
        raise PreconditionError("sweep needs at least one density")
    if any(a <= b for a, b in zip(rho_list, rho_list[1:])):
        raise PreconditionError("sweep densities must be strictly decreasing")
    threshold = setup.sonic_threshold
    if rho_list[0] <= threshold:
        raise HypothesisError(
            f"upstream flow is not uniformly subsonic at rho_inf={rho_list[0]} (threshold {threshold:.6g})"
        )
    setup.grid  # shared by the worker threads, so build it up front

    if not warm_start and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda rho: solve_at(setup, rho), rho_list))
    else:
        records = []
        previous: Optional[SweepRecord] = None
        for rho in rho_list:
            initial = None
            if warm_start:
                initial = _warm_start(previous, setup.truncate(rho).m_L)
            record = solve_at(setup, rho, initial)
            records.append(record)
            if record.field is not None:
                previous = record

    certified = sum(r.certified for r in records)
    logger.info(f"Sweep finished: {certified}/{len(records)} certified")
    _report_trend(records)
    return records


def _report_trend(records: Sequence[SweepRecord]) -> None:
    # Q is not known to be monotone in rho_inf; deviations are logged, not raised
    last_q: Optional[float] = None
    failed = False
    for r in records:
        if r.certified:
            last_q = r.q
        else:
            failed = True
        if failed and last_q is not None and r.q is not None and r.q < last_q - 1e-9:
            logger.warning(f"Q trend: rho_inf={r.rho_inf} has Q={r.q:.9f} below the last certified {last_q:.9f}")


def farfield_companion(setup: ProblemSetup, trunc: TruncatedProfile,
                       probe_x: float) -> Optional[FarfieldReport]:
    """
    Solve on the X-doubled window at the same spacing (X and nx doubled, same
    truncation) and return its far-field report at the physical column probe_x.
    None when the companion solve fails.
    """
    companion = replace(setup, X=2.0 * setup.X, nx=2 * setup.nx)
    try:
        result = solve(companion.grid, trunc, setup.gas, setup.solver)
    except (DivergedError, NumericalError) as e:
        logger.warning(f"X-doubled companion at X={companion.X} failed: {e}")
        return None
    report = farfield_check(result, trunc, setup.gas, x_probe=probe_x)
    logger.info(f"X-doubled companion at x={report.x_probe:.6g}: deviation {report.probe_deviation:.3e}")
    return report


def verify_record(setup: ProblemSetup, record: SweepRecord, n_lines: Optional[int] = None,
                  probe_fraction: float = 0.9, delta0: Optional[float] = None) -> VerificationReport:
    """Full verification suite on a solved record, far field judged against the X-doubled companion."""
    doubled = farfield_companion(setup, record.trunc, probe_fraction * setup.X)
    return run_verification_suite(record.field, record.trunc, setup.gas, n_lines=n_lines,
                                  probe_fraction=probe_fraction, delta0=delta0, doubled=doubled)


def bracket_rho_cr(setup: ProblemSetup, rho_hi: float, rho_lo: float,
                   width_tol: float = 0.01, n_lines: Optional[int] = None) -> BracketResult:
    """
    Bisect on certification until hi - lo <= width_tol * rho_inf*.

    The stopping width is width_tol times the sonic threshold, which lies below
    rho_inf* and hi, so the exit bracket also satisfies hi - lo <= width_tol * hi.

    Densities at or below the sonic threshold count as uncertified without a
    solve. The final hi endpoint carries a full verification report.
    """
    if rho_hi <= rho_lo:
        raise PreconditionError("rho_hi must exceed rho_lo")
    threshold = setup.sonic_threshold
    if rho_hi <= threshold:
        raise PreconditionError(f"rho_hi={rho_hi} is not above the sonic threshold {threshold:.6g}")

    hi_record = solve_at(setup, rho_hi)
    if not hi_record.certified:
        raise PreconditionError(f"rho_hi={rho_hi} is not certified ({hi_record.status.value})")
    if rho_lo > threshold:
        lo_record = solve_at(setup, rho_lo, _warm_start(hi_record, setup.truncate(rho_lo).m_L))
        if lo_record.certified:
            raise PreconditionError(f"rho_lo={rho_lo} is certified; widen the bracket")

    lo, hi = float(rho_lo), float(rho_hi)
    width = width_tol * threshold
    steps = 0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        steps += 1
        if mid <= threshold:
            lo = mid
            logger.info(f"Bracket step {steps}: rho={mid:.6g} below sonic threshold")
            continue
        record = solve_at(setup, mid, _warm_start(hi_record, setup.truncate(mid).m_L))
        if record.certified:
            hi, hi_record = mid, record
        else:
            lo = mid
        logger.info(f"Bracket step {steps}: rho={mid:.6g} {record.status.value}, bracket [{lo:.6g}, {hi:.6g}]")

    report = verify_record(setup, hi_record, n_lines=n_lines)
    return BracketResult(lo=lo, hi=hi, hi_record=hi_record, report=report, steps=steps)


def export_limit_sequence(records: Sequence[SweepRecord], path: Union[str, Path],
                          selection: Optional[Sequence[int]] = None) -> LimitSequenceReport:
    """
    Stack the flow fields of certified records in one table and measure the
    max pointwise gap of (rho, u, v) between consecutive records.
    """
    chosen = [records[i] for i in selection] if selection is not None else list(records)
    chosen = [r for r in chosen if r.certified and r.field is not None]
    if len(chosen) < 3:
        raise InsufficientDataError(f"limit sequence needs at least 3 certified records, got {len(chosen)}")
    base = chosen[0].field.grid
    for rec in chosen[1:]:
        g = rec.field.grid
        if g.shape != base.shape or not (np.array_equal(g.x, base.x) and np.array_equal(g.r, base.r)):
            raise PreconditionError("limit sequence records are on different grids")

    flows = [reconstruct(r.field, r.trunc, r.gas) for r in chosen]
    gaps = []
    for a, b in zip(flows, flows[1:]):
        diff = np.stack([np.abs(a.rho - b.rho), np.abs(a.u - b.u), np.abs(a.v - b.v)])
        gaps.append(float(np.nanmax(diff)))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    row_count = 0
    with open(path, "w") as fh:
        fh.write(",".join(("rho_inf",) + FIELD_COLUMNS) + "\n")
        for rec, flow in zip(chosen, flows):
            rows = field_rows(flow, rec.field)
            stacked = np.column_stack([np.full(rows.shape[0], rec.rho_inf), rows])
            np.savetxt(fh, stacked, fmt="%.17g", delimiter=",")
            row_count += rows.shape[0]

    decreasing = all(b <= a for a, b in zip(gaps, gaps[1:]))
    logger.info(f"Limit sequence over {len(chosen)} records: gaps {gaps}")
    return LimitSequenceReport(densities=[r.rho_inf for r in chosen], gaps=gaps,
                               decreasing=decreasing, rows=row_count)


def write_sweep_summary(records: Sequence[SweepRecord], path: Union[str, Path]) -> Path:
    """One line per record: rho_inf, status, Q, upstream bound, Picard iterations."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["rho_inf,status,Q,q_lower_bound,picard_iterations"]
    for r in records:
        q = "nan" if r.q is None else f"{r.q:.17g}"
        lines.append(f"{r.rho_inf:.17g},{r.status.value},{q},{r.q_lower_bound:.17g},{r.picard_iterations}")
    path.write_text("\n".join(lines) + "\n")
    return path
