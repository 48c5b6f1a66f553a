"""Tests for density continuation, critical-density bracketing and the limit sequence."""
import numpy as np
import pytest

from app.continuation import (
    ProblemSetup,
    analytic_threshold,
    bracket_rho_cr,
    export_limit_sequence,
    sweep,
    upstream_mach_bound,
    write_sweep_summary,
)
from app.errors import HypothesisError, InsufficientDataError, PreconditionError
from app.geometry_grid import Obstacle
from app.models import SweepStatus


@pytest.fixture
def setup(gas2, uniform4, small_config):
    """Uniform flow, no obstacle, on the small grid."""
    return ProblemSetup(gas=gas2, profile=uniform4, obstacle=Obstacle.none(), X=2.0, L=3.0,
                        nx=16, nr=16, solver=small_config)


# ============= Threshold Tests =============

def test_upstream_mach_bound(uniform4, gas2):
    """Test sup u / rho^((gamma-1)/2) = 1/2 at rho = 4."""
    assert upstream_mach_bound(uniform4, 4.0, gas2) == pytest.approx(0.5)


def test_analytic_threshold(uniform4, gas2):
    """Test the density where the upstream Mach number equals 1 - 2 eps0."""
    assert analytic_threshold(uniform4, gas2, 0.05) == pytest.approx(1.2345679, rel=1e-7)


# ============= Sweep Tests =============

def test_sweep_tracks_upstream_mach(setup):
    """Test Q = 1/sqrt(rho) along a warm-started sweep of uniform flow."""
    records = sweep([4.0, 2.0], setup)
    assert [r.status for r in records] == [SweepStatus.CERTIFIED, SweepStatus.CERTIFIED]
    for record in records:
        assert record.q == pytest.approx(1.0 / np.sqrt(record.rho_inf), rel=1e-6)
        assert record.q == pytest.approx(record.q_lower_bound, rel=1e-6)


def test_sweep_marks_truncation_active(setup):
    """Test that a density with upstream Mach above 1 - 2 eps0 is not certified."""
    records = sweep([2.0, 1.1], setup)
    assert records[0].certified
    assert records[1].status == SweepStatus.TRUNCATION_ACTIVE
    assert records[1].q == pytest.approx(1.0 / np.sqrt(1.1), rel=1e-6)


def test_cold_sweep_on_threads(setup):
    """Test that cold starts on a thread pool give the same certificates in order."""
    records = sweep([4.0, 3.0], setup, warm_start=False, threads=2)
    assert [r.rho_inf for r in records] == [4.0, 3.0]
    assert records[1].q == pytest.approx(1.0 / np.sqrt(3.0), rel=1e-6)


def test_sweep_preconditions(setup):
    """Test the ordering and hypothesis preconditions of a sweep."""
    with pytest.raises(PreconditionError):
        sweep([2.0, 4.0], setup)
    with pytest.raises(HypothesisError):
        sweep([0.9], setup)


def test_sweep_summary_file(tmp_path, setup):
    """Test one summary line per record below the header."""
    records = sweep([4.0, 2.0], setup)
    lines = write_sweep_summary(records, tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "rho_inf,status,Q,q_lower_bound,picard_iterations"
    assert lines[1].startswith("4,certified,")
    assert len(lines) == 3


# ============= Bracket Tests =============

def test_bracket_contains_threshold(setup):
    """Test that bisection on certification brackets the analytic critical density."""
    result = bracket_rho_cr(setup, 4.0, 1.1, width_tol=0.01)
    assert result.lo <= 1.2345679 <= result.hi
    assert result.hi - result.lo <= 0.01
    assert result.hi_record.certified
    assert result.report.check("subsonic_certificate").passed


def test_bracket_width_relative_to_upper_end(setup):
    """Test that the exit bracket is narrower than width_tol times both the sonic threshold and hi."""
    result = bracket_rho_cr(setup, 4.0, 1.1, width_tol=0.05)
    assert setup.sonic_threshold < result.lo < result.hi
    assert result.hi - result.lo <= 0.05 * setup.sonic_threshold
    assert result.hi - result.lo <= 0.05 * result.hi


def test_bracket_preconditions(setup):
    """Test that inverted or uncertified brackets are refused."""
    with pytest.raises(PreconditionError):
        bracket_rho_cr(setup, 1.1, 4.0)
    with pytest.raises(PreconditionError):
        bracket_rho_cr(setup, 1.15, 1.05)


@pytest.mark.slow
def test_obstacle_bracket_certifies_upper_end(bump_setup):
    """Test a 1 percent bracket for flow past a bump whose certified end passes the full suite."""
    result = bracket_rho_cr(bump_setup, 4.0, 1.1, width_tol=0.01)
    assert result.hi - result.lo <= 0.01 * result.hi
    assert result.hi_record.certified
    assert result.hi > analytic_threshold(bump_setup.profile, bump_setup.gas, 0.05)
    assert result.report.passed, result.report.failures()


# ============= Limit Sequence Tests =============

def test_limit_sequence_export(tmp_path, setup):
    """Test the stacked table and the consecutive gaps of three certified fields."""
    records = sweep([4.0, 3.0, 2.0], setup)
    report = export_limit_sequence(records, tmp_path / "limit.csv")
    assert report.densities == [4.0, 3.0, 2.0]
    assert report.gaps == pytest.approx([1.0, 1.0], rel=1e-6)
    assert report.rows == 3 * 289
    lines = (tmp_path / "limit.csv").read_text().splitlines()
    assert lines[0] == "rho_inf,x,r,psi,rho,u,v,mach"
    assert len(lines) == 1 + 3 * 289


def test_limit_sequence_needs_three_certified(tmp_path, setup):
    """Test that fewer than three certified records is insufficient."""
    records = sweep([2.0, 1.1], setup)
    with pytest.raises(InsufficientDataError):
        export_limit_sequence(records, tmp_path / "limit.csv")
