"""Prometheus metrics for a single CLI run, written as a text-format file."""
import logging
from pathlib import Path
from typing import Iterable, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, write_to_textfile

from app.models import ErrorType
from app.schemas import VerificationReport

logger = logging.getLogger(__name__)

PREFIX = "subsonic_solver"


class SolverMetrics:
    """
    Per-run registry exposing:
    - subsonic_solver_solves_total (by status)
    - subsonic_solver_picard_iterations_total
    - subsonic_solver_linear_iterations_total
    - subsonic_solver_q_statistic
    - subsonic_solver_picard_update (final relative Picard update)
    - subsonic_solver_solve_seconds
    - subsonic_solver_sweep_records_total (by status)
    - subsonic_solver_checks_total (by outcome)
    - subsonic_solver_errors_total (by error type)
    """

    def __init__(self):
        self.registry = CollectorRegistry()
        self.solves = Counter(f"{PREFIX}_solves", "Stream-function solves by status",
                              ["status"], registry=self.registry)
        self.picard_iterations = Counter(f"{PREFIX}_picard_iterations", "Picard iterations",
                                         registry=self.registry)
        self.linear_iterations = Counter(f"{PREFIX}_linear_iterations", "Conjugate gradient iterations",
                                         registry=self.registry)
        self.q_statistic = Gauge(f"{PREFIX}_q_statistic", "Q statistic of the last solve",
                                 registry=self.registry)
        self.picard_update = Gauge(f"{PREFIX}_picard_update", "Final relative Picard update of the last solve",
                                   registry=self.registry)
        self.solve_seconds = Gauge(f"{PREFIX}_solve_seconds", "Wall time of the last solve",
                                   registry=self.registry)
        self.sweep_records = Counter(f"{PREFIX}_sweep_records", "Sweep records by status",
                                     ["status"], registry=self.registry)
        self.checks = Counter(f"{PREFIX}_checks", "Verification checks by outcome",
                              ["outcome"], registry=self.registry)
        self.errors = Counter(f"{PREFIX}_errors", "Classified errors", ["type"],
                              registry=self.registry)

    def observe_solve(self, field, status: str) -> None:
        self.solves.labels(status=status).inc()
        self.picard_iterations.inc(field.picard_iterations)
        self.linear_iterations.inc(field.linear_iterations)
        if field.q is not None:
            self.q_statistic.set(field.q)
        if field.residual_history:
            self.picard_update.set(field.residual_history[-1])
        self.solve_seconds.set(field.elapsed_seconds)

    def observe_sweep(self, records: Iterable) -> None:
        for record in records:
            self.sweep_records.labels(status=record.status.value).inc()
            if record.field is not None:
                self.observe_solve(record.field, record.status.value)

    def observe_report(self, report: VerificationReport) -> None:
        for check in report.checks:
            self.checks.labels(outcome="passed" if check.passed else "failed").inc()

    def observe_error(self, error_type: ErrorType) -> None:
        self.errors.labels(type=error_type.value).inc()

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        logger.debug(f"Wrote metrics to {path}")
        return path
