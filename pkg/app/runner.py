"""Run engine: resolves task dependencies, executes task handlers, maps outcomes to exit codes."""
import logging
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from app.cli_io import config_echo, config_hash
from app.continuation import ProblemSetup
from app.errors import ConfigurationError, FlowError, classify_error, exit_code_for
from app.flow_verify import FlowField
from app.gas_model import GasModel
from app.geometry_grid import Obstacle
from app.metrics import SolverMetrics
from app.models import ErrorType, ObstacleKind, ProfileKind, TaskName
from app.schemas import RunConfig
from app.stream_solver import StreamField
from app.upstream_profile import TruncatedProfile, UpstreamProfile, load_profile_table

logger = logging.getLogger(__name__)

TASK_DEPENDENCIES: Dict[TaskName, List[TaskName]] = {
    TaskName.SOLVE: [],
    TaskName.VERIFY: [TaskName.SOLVE],
    TaskName.ANNULUS: [TaskName.SOLVE],
    TaskName.SWEEP: [],
    TaskName.BRACKET: [],
}

PARTIAL_MARKER = "PARTIAL"


@dataclass
class RunContext:
    """State shared by the task handlers of one run."""
    config: RunConfig
    setup: ProblemSetup
    trunc: TruncatedProfile
    out_dir: Path
    config_digest: str
    metrics: SolverMetrics
    threads: int = 1
    resume: Optional[Path] = None
    field: Optional[StreamField] = None
    flow: Optional[FlowField] = None
    outcomes: Dict[TaskName, bool] = dataclass_field(default_factory=dict)

    @property
    def gas(self) -> GasModel:
        return self.setup.gas


def build_setup(config: RunConfig) -> ProblemSetup:
    """Profile, obstacle, gas and grid parameters from a validated config."""
    gas = GasModel(config.gas.gamma)
    p = config.profile
    if p.kind == ProfileKind.TABULATED:
        r, u = load_profile_table(p.table)
        profile = UpstreamProfile.tabulated(r, u, p.rho_inf)
    elif p.kind == ProfileKind.EXP_VORTICAL:
        profile = UpstreamProfile.exp_vortical(p.u_bar, p.amplitude, p.rho_inf)
    else:
        profile = UpstreamProfile.uniform(p.u_bar, p.rho_inf)

    o = config.obstacle
    if o.kind == ObstacleKind.TABULATED:
        xs, fs = load_profile_table(o.table)
        obstacle = Obstacle.tabulated(xs, fs)
    elif o.kind == ObstacleKind.SMOOTH_BUMP:
        obstacle = Obstacle.smooth_bump(o.height)
    else:
        obstacle = Obstacle.none()

    d = config.domain
    return ProblemSetup(gas=gas, profile=profile, obstacle=obstacle, X=d.X, L=d.L,
                        nx=d.nx, nr=d.nr, solver=config.solver)


def plan_tasks(tasks: Sequence[TaskName]) -> List[TaskName]:
    """Requested tasks with their dependencies, each once, dependencies first."""
    ordered: List[TaskName] = []

    def visit(task: TaskName) -> None:
        for dep in TASK_DEPENDENCIES[task]:
            visit(dep)
        if task not in ordered:
            ordered.append(task)

    for task in tasks:
        visit(TaskName(task))
    return ordered


class RunEngine:
    """
    Executes a run.

    Features:
    - Validates every precondition before any file is written
    - Runs tasks in dependency order (solve before verify/annulus)
    - Classifies failures and writes a PARTIAL marker next to partial outputs
    - Writes the config echo, its hash and the metrics file for provenance
    """

    def __init__(self):
        self._handlers: Dict[TaskName, Callable[[RunContext], bool]] = {}

    def register(self, task: TaskName, handler: Callable[[RunContext], bool]) -> None:
        self._handlers[task] = handler

    def _default_handlers(self) -> None:
        if self._handlers:
            return
        from app.tasks import annulus, solve, sweep, verify

        self.register(TaskName.SOLVE, solve.run)
        self.register(TaskName.VERIFY, verify.run)
        self.register(TaskName.ANNULUS, annulus.run)
        self.register(TaskName.SWEEP, sweep.run_sweep)
        self.register(TaskName.BRACKET, sweep.run_bracket)

    def prepare(self, config: RunConfig, out_dir: Path, threads: int = 1,
                resume: Optional[Path] = None) -> RunContext:
        """Build the problem; raises ConfigurationError before anything touches disk."""
        setup = build_setup(config)
        setup.grid  # geometry errors surface here
        trunc = setup.truncate(config.profile.rho_inf)
        if resume is not None and not Path(resume).is_file():
            raise ConfigurationError(f"checkpoint not found: {resume}")
        if threads < 1:
            raise ConfigurationError("threads must be at least 1")
        return RunContext(config=config, setup=setup, trunc=trunc, out_dir=Path(out_dir),
                          config_digest=config_hash(config), metrics=SolverMetrics(),
                          threads=threads, resume=Path(resume) if resume else None)

    def run(self, config: RunConfig, tasks: Sequence[TaskName], out_dir: Path,
            threads: int = 1, resume: Optional[Path] = None) -> int:
        """Exit status: 0 when every task certifies, 2 otherwise, 1 for configuration errors."""
        self._default_handlers()
        try:
            ctx = self.prepare(config, out_dir, threads, resume)
        except FlowError as e:
            error_type, message = classify_error(e)
            logger.error(message)
            return exit_code_for(error_type)

        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        (ctx.out_dir / "config.echo").write_text(config_echo(config))
        (ctx.out_dir / "config.sha256").write_text(ctx.config_digest + "\n")
        logger.info(f"Run {ctx.config_digest[:12]} -> {ctx.out_dir}")

        exit_code = 0
        for task in plan_tasks(tasks):
            logger.info(f"Task {task.value} started")
            try:
                ok = self._handlers[task](ctx)
            except FlowError as e:
                exit_code = self._fail(ctx, task, e)
                break
            except Exception as e:
                logger.exception(f"Task {task.value} crashed")
                exit_code = self._fail(ctx, task, e)
                break
            ctx.outcomes[task] = ok
            logger.info(f"Task {task.value} finished: {'certified' if ok else 'not certified'}")
            if not ok:
                exit_code = 2

        ctx.metrics.write(ctx.out_dir / "metrics.prom")
        return exit_code

    def _fail(self, ctx: RunContext, task: TaskName, error: Exception) -> int:
        error_type, message = classify_error(error)
        logger.error(f"Task {task.value} failed: {message}")
        ctx.metrics.observe_error(error_type)
        (ctx.out_dir / PARTIAL_MARKER).write_text(f"task = {task.value}\nerror = {message}\n")
        if error_type == ErrorType.UNKNOWN:
            return 2
        return exit_code_for(error_type)


# Global engine instance
run_engine = RunEngine()


def run(config: RunConfig, tasks: Sequence[TaskName], out_dir: Path, threads: int = 1,
        resume: Optional[Path] = None) -> int:
    """Execute the requested tasks for a validated config."""
    return run_engine.run(config, tasks, out_dir, threads, resume)
