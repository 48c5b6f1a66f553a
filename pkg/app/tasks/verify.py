"""Verify task: the full verification suite on the solved field."""
import logging

from app.continuation import farfield_companion
from app.flow_verify import run_verification_suite, uniqueness_probe, write_report
from app.runner import RunContext
from app.schemas import CheckResult, VerificationReport

logger = logging.getLogger(__name__)


def run(ctx: RunContext) -> bool:
    tasks = ctx.config.tasks
    doubled = farfield_companion(ctx.setup, ctx.trunc, tasks.probe_fraction * ctx.setup.X)
    report = run_verification_suite(ctx.field, ctx.trunc, ctx.gas, n_lines=tasks.streamlines,
                                    probe_fraction=tasks.probe_fraction, delta0=tasks.barrier_delta0,
                                    doubled=doubled)

    if tasks.uniqueness_inits >= 2:
        probe = uniqueness_probe(ctx.setup.grid, ctx.trunc, ctx.gas, ctx.config.solver,
                                 n_inits=tasks.uniqueness_inits)
        distance = probe.distance if probe.distance is not None else float("nan")
        check = CheckResult(name="uniqueness", passed=probe.status == "agree",
                            margin=probe.tolerance - distance if probe.distance is not None else float("-inf"),
                            tolerance=probe.tolerance, detail=f"{probe.status} over {probe.runs} runs")
        report = VerificationReport(checks=report.checks + [check], flagged_nodes=report.flagged_nodes)

    write_report(report, ctx.out_dir / "verification.txt")
    ctx.metrics.observe_report(report)
    return report.passed
