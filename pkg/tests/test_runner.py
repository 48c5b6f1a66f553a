"""Tests for the run engine and the command-line entry point."""
import pytest

from app.cli_io import parse_config_text, read_summary
from app.flow_verify import read_report
from app.main import main
from app.models import TaskName
from app.runner import PARTIAL_MARKER, RunEngine, plan_tasks

BASE_CONFIG = """
gas.gamma = 2
profile.kind = uniform
profile.rho_inf = {rho}
domain.X = 2
domain.L = 3
domain.nx = 16
domain.nr = 16
solver.k_schedule = [0.1, 0.0]
tasks.streamlines = 4
"""


def write_config(tmp_path, rho=4.0, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(BASE_CONFIG.format(rho=rho) + extra)
    return path


# ============= Planning Tests =============

def test_plan_adds_solve_dependency():
    """Test that verify and annulus pull in a single solve first."""
    assert plan_tasks([TaskName.VERIFY]) == [TaskName.SOLVE, TaskName.VERIFY]
    assert plan_tasks([TaskName.VERIFY, TaskName.ANNULUS]) == [TaskName.SOLVE, TaskName.VERIFY, TaskName.ANNULUS]
    assert plan_tasks([TaskName.SWEEP]) == [TaskName.SWEEP]


# ============= Engine Tests =============

def test_engine_runs_registered_handlers(tmp_path):
    """Test that a certified handler gives exit 0 and provenance files."""
    engine = RunEngine()
    engine.register(TaskName.SOLVE, lambda ctx: True)
    config = parse_config_text(BASE_CONFIG.format(rho=4.0))
    assert engine.run(config, [TaskName.SOLVE], tmp_path / "out") == 0
    assert (tmp_path / "out" / "config.echo").exists()
    assert (tmp_path / "out" / "config.sha256").read_text().strip()
    assert (tmp_path / "out" / "metrics.prom").exists()


def test_engine_marks_crash_as_partial(tmp_path):
    """Test that an unexpected exception writes the PARTIAL marker and exits 2."""
    def crash(ctx):
        raise RuntimeError("boom")

    engine = RunEngine()
    engine.register(TaskName.SOLVE, crash)
    config = parse_config_text(BASE_CONFIG.format(rho=4.0))
    assert engine.run(config, [TaskName.SOLVE], tmp_path / "out") == 2
    assert "boom" in (tmp_path / "out" / PARTIAL_MARKER).read_text()


def test_engine_rejects_missing_resume_before_writing(tmp_path):
    """Test that a missing checkpoint fails with exit 1 and touches nothing."""
    engine = RunEngine()
    engine.register(TaskName.SOLVE, lambda ctx: True)
    config = parse_config_text(BASE_CONFIG.format(rho=4.0))
    assert engine.run(config, [TaskName.SOLVE], tmp_path / "out", resume=tmp_path / "none.npz") == 1
    assert not (tmp_path / "out").exists()


# ============= CLI Tests =============

def test_cli_solve(tmp_path):
    """Test the solve command writes the field, summary, grid dump and metrics."""
    out = tmp_path / "out"
    assert main(["solve", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    for name in ("field.csv", "field.summary", "grid.txt", "config.echo", "metrics.prom"):
        assert (out / name).exists(), name
    summary = read_summary(out / "field.summary")
    assert summary["config_hash"] == (out / "config.sha256").read_text().strip()
    assert "subsonic_solver_solves_total" in (out / "metrics.prom").read_text()


def test_cli_verify(tmp_path):
    """Test the verify command on uniform flow passes every check."""
    out = tmp_path / "out"
    assert main(["verify", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    assert read_report(out / "verification.txt").passed


def test_cli_annulus(tmp_path):
    """Test the annulus command without obstacle."""
    out = tmp_path / "out"
    assert main(["annulus", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    assert (out / "annulus.csv").read_text().startswith("rho1 = 4.0")
    assert read_report(out / "annulus_report.txt").passed


def test_cli_sweep(tmp_path):
    """Test the sweep command writes one summary line per density."""
    out = tmp_path / "out"
    cfg = write_config(tmp_path, extra="tasks.sweep_densities = [4, 2]\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert len((out / "sweep.csv").read_text().splitlines()) == 3


def test_cli_not_certified_exit(tmp_path):
    """Test exit 2 when the cutoff is active at the requested density."""
    out = tmp_path / "out"
    assert main(["solve", "--config", str(write_config(tmp_path, rho=1.1)), "--out", str(out)]) == 2
    assert (out / "field.csv").exists()


def test_cli_config_error(tmp_path, capsys):
    """Test exit 1 and a stderr message for an invalid config."""
    cfg = write_config(tmp_path, extra="gas.eps = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 1
    assert "gas.eps" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_cli_task_configuration_error_is_partial(tmp_path):
    """Test that a sweep without densities stops with exit 1 and a PARTIAL marker."""
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 1
    assert (out / PARTIAL_MARKER).exists()


def test_cli_checkpoint_and_resume(tmp_path):
    """Test that a checkpointed solve can be resumed from its checkpoint."""
    out = tmp_path / "out"
    cfg = write_config(tmp_path, extra="output.checkpoint = true\noutput.checkpoint_every = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    checkpoint = out / "checkpoint.npz"
    assert checkpoint.exists()
    again = tmp_path / "again"
    assert main(["solve", "--config", str(cfg), "--out", str(again), "--resume", str(checkpoint)]) == 0


def test_cli_requires_config():
    """Test that argparse refuses a command without --config."""
    with pytest.raises(SystemExit):
        main(["solve"])
