"""Sweep and bracket tasks over the upstream density."""
import logging

from app.continuation import bracket_rho_cr, export_limit_sequence, sweep, write_sweep_summary
from app.errors import ConfigurationError, InsufficientDataError
from app.flow_verify import write_report
from app.runner import RunContext

logger = logging.getLogger(__name__)


def run_sweep(ctx: RunContext) -> bool:
    """Exploratory: always True once the sweep has run, statuses are in sweep.csv."""
    tasks = ctx.config.tasks
    if not tasks.sweep_densities:
        raise ConfigurationError("tasks.sweep_densities: required for the sweep task")
    records = sweep(tasks.sweep_densities, ctx.setup, warm_start=tasks.warm_start, threads=ctx.threads)
    write_sweep_summary(records, ctx.out_dir / "sweep.csv")
    ctx.metrics.observe_sweep(records)

    if tasks.export_limit:
        try:
            limit = export_limit_sequence(records, ctx.out_dir / "limit_sequence.csv")
            logger.info(f"Limit sequence gaps {limit.gaps} (decreasing: {limit.decreasing})")
        except InsufficientDataError as e:
            logger.warning(f"Limit sequence skipped: {e}")
    return True


def run_bracket(ctx: RunContext) -> bool:
    tasks = ctx.config.tasks
    if tasks.bracket_rho_hi is None or tasks.bracket_rho_lo is None:
        raise ConfigurationError("tasks.bracket_rho_hi and tasks.bracket_rho_lo are required for bracket")
    result = bracket_rho_cr(ctx.setup, tasks.bracket_rho_hi, tasks.bracket_rho_lo,
                            width_tol=tasks.bracket_width_tol, n_lines=tasks.streamlines)
    (ctx.out_dir / "bracket.txt").write_text(
        f"lo = {result.lo!r}\nhi = {result.hi!r}\nmidpoint = {result.midpoint!r}\nsteps = {result.steps}\n"
    )
    write_report(result.report, ctx.out_dir / "bracket_report.txt")
    ctx.metrics.observe_solve(result.hi_record.field, result.hi_record.status.value)
    ctx.metrics.observe_report(result.report)
    return result.report.passed
