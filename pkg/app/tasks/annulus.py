"""Annulus task: matched downstream state and the comparison with the solved field."""
import logging

from app.annulus_matcher import build_state, check_state, compare_with_solution, solve_rho1, write_annulus
from app.flow_verify import write_report
from app.runner import RunContext
from app.schemas import VerificationReport

logger = logging.getLogger(__name__)


def run(ctx: RunContext) -> bool:
    J = ctx.setup.obstacle.J
    rho1 = solve_rho1(ctx.trunc, ctx.gas, ctx.setup.L, J)
    state = build_state(rho1, ctx.trunc, ctx.gas, ctx.setup.L, J, n_steps=ctx.config.tasks.annulus_steps)
    internal = check_state(state, ctx.trunc, ctx.gas)
    comparison = compare_with_solution(state, ctx.field, ctx.trunc)
    report = VerificationReport(checks=internal.checks + comparison.checks)

    write_annulus(state, ctx.out_dir / "annulus.csv")
    write_report(report, ctx.out_dir / "annulus_report.txt")
    ctx.metrics.observe_report(report)
    logger.info(f"Annulus rho1={rho1:.10g}, checks passed: {report.passed}")
    return report.passed
