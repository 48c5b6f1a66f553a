"""Solve task: one stream-function solve at the configured density."""
import logging

from app.cli_io import write_field
from app.flow_verify import reconstruct
from app.geometry_grid import write_grid_dump
from app.models import SweepStatus
from app.runner import RunContext
from app.stream_solver import read_checkpoint, solve

logger = logging.getLogger(__name__)


def run(ctx: RunContext) -> bool:
    """Solve, reconstruct and write field.csv, field.summary and grid.txt; True when certified."""
    output = ctx.config.output
    grid = ctx.setup.grid
    checkpoint_path = ctx.out_dir / "checkpoint.npz" if (output.checkpoint or ctx.resume) else None
    resume = read_checkpoint(ctx.resume) if ctx.resume else None

    field = solve(grid, ctx.trunc, ctx.gas, ctx.config.solver, resume=resume,
                  checkpoint_path=checkpoint_path, checkpoint_every=output.checkpoint_every,
                  config_hash=ctx.config_digest)
    ctx.field = field
    ctx.flow = reconstruct(field, ctx.trunc, ctx.gas)

    write_grid_dump(grid, ctx.out_dir / "grid.txt")
    write_field(ctx.flow, field, ctx.out_dir / "field.csv", ctx.config_digest)
    status = SweepStatus.CERTIFIED if field.certified else SweepStatus.TRUNCATION_ACTIVE
    ctx.metrics.observe_solve(field, status.value)
    if not field.certified:
        logger.warning(f"Solution not certified: Q={field.q:.6f} >= {1.0 - 2.0 * field.eps0}")
    return field.certified
