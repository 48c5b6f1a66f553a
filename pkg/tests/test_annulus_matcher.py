"""Tests for the matched annulus state."""
import numpy as np
import pytest

from app.annulus_matcher import (
    bracket,
    build_state,
    check_state,
    compare_with_solution,
    hat_psi,
    mass_flux_G,
    solve_rho1,
    write_annulus,
)
from app.continuation import ProblemSetup, solve_at
from app.errors import ConfigurationError, DomainError, HypothesisError
from app.geometry_grid import Obstacle
from app.schemas import SolverConfig
from app.upstream_profile import UpstreamProfile, truncate


@pytest.fixture
def trunc10(uniform4):
    """Uniform unit flow at rho = 4 truncated at L = 10."""
    return truncate(uniform4, 10.0)


# ============= Bracket Tests =============

def test_bracket_uniform(trunc10, gas2):
    """Test (rho_lower, rho_upper) = (3, 4.5) for uniform flow, rho = 4, gamma = 2."""
    lo, hi = bracket(trunc10, gas2)
    assert lo == pytest.approx(3.0)
    assert hi == pytest.approx(4.5)


def test_bracket_vortical(vortical, gas2):
    """Test the bracket for u = 1 + 2(r+1)e^-r at rho = 16."""
    lo, hi = bracket(truncate(vortical, 10.0), gas2)
    assert lo == pytest.approx(41.0 / 3.0, rel=1e-10)
    assert hi == pytest.approx(16.5, abs=0.01)


def test_bracket_rejects_supersonic_upstream(gas2):
    """Test that rho_inf below the sonic threshold violates the hypotheses."""
    trunc = truncate(UpstreamProfile.uniform(1.0, 0.9), 10.0)
    with pytest.raises(HypothesisError):
        bracket(trunc, gas2)


# ============= Mass Flux Tests =============

def test_mass_flux_closed_form(trunc10, gas2):
    """Test G(rho) = 200 / (rho sqrt(9 - 2 rho)) for the uniform case."""
    for rho in (3.2, 3.9864, 4.0):
        assert mass_flux_G(rho, trunc10, gas2) == pytest.approx(200.0 / (rho * np.sqrt(9.0 - 2.0 * rho)), rel=1e-12)


def test_mass_flux_at_upstream_density(trunc10, gas2):
    """Test G(rho_inf) = L^2 / 2."""
    assert mass_flux_G(4.0, trunc10, gas2) == pytest.approx(50.0, rel=1e-12)


def test_mass_flux_outside_bracket(trunc10, gas2):
    """Test that D <= 0 is a domain error."""
    with pytest.raises(DomainError):
        mass_flux_G(5.0, trunc10, gas2)


def test_mass_flux_radius_mismatch(trunc10, gas2):
    """Test that L must match the truncation radius."""
    with pytest.raises(ConfigurationError):
        mass_flux_G(4.0, trunc10, gas2, L=5.0)


# ============= Matched Density Tests =============

def test_rho1_without_obstacle_is_upstream(trunc10, gas2):
    """Test rho1 = rho_inf when J = 0."""
    assert solve_rho1(trunc10, gas2, 10.0, 0.0) == 4.0


def test_rho1_with_obstacle(trunc10, gas2):
    """Test the matched density for J = 1, L = 10."""
    rho1 = solve_rho1(trunc10, gas2, 10.0, 1.0)
    assert rho1 == pytest.approx(3.9864, rel=1e-4)
    assert mass_flux_G(rho1, trunc10, gas2) == pytest.approx(49.5, rel=1e-10)


def test_rho1_radius_too_small(trunc10, gas2):
    """Test that an obstacle too tall for the mass flux is reported."""
    with pytest.raises(ConfigurationError, match="L too small"):
        solve_rho1(trunc10, gas2, 10.0, 5.0)


# ============= State Tests =============

def test_streamline_map(trunc10, gas2):
    """Test chi(0) = J, chi(5) = sqrt(25.75) and chi(L) = L for J = 1."""
    rho1 = solve_rho1(trunc10, gas2, 10.0, 1.0)
    state = build_state(rho1, trunc10, gas2, 10.0, 1.0, n_steps=1000)
    assert state.chi[0] == pytest.approx(1.0)
    assert state.chi[500] == pytest.approx(np.sqrt(25.75), rel=1e-8)
    assert state.chi[-1] == pytest.approx(10.0, rel=1e-8)
    assert np.all(np.diff(state.xi) <= 1e-9)


def test_state_checks_pass(trunc10, gas2):
    """Test that the matched state passes its internal checks."""
    rho1 = solve_rho1(trunc10, gas2, 10.0, 1.0)
    state = build_state(rho1, trunc10, gas2, 10.0, 1.0)
    report = check_state(state, trunc10, gas2)
    assert report.passed, report.failures()
    assert state.subsonic_margin(gas2) > 0.0


def test_hat_psi_domain(trunc10, gas2):
    """Test hat_psi(J) = 0, hat_psi(L) = m_L and refusal outside [J, L]."""
    state = build_state(solve_rho1(trunc10, gas2, 10.0, 1.0), trunc10, gas2, 10.0, 1.0)
    assert hat_psi(state, 1.0) == pytest.approx(0.0, abs=1e-10)
    assert hat_psi(state, 10.0) == pytest.approx(200.0, rel=1e-8)
    with pytest.raises(DomainError):
        hat_psi(state, 0.5)


def test_compare_with_uniform_solution(uniform_field, uniform_trunc, gas2):
    """Test that the exact uniform field lies between hat_psi and psi_bar_L."""
    state = build_state(solve_rho1(uniform_trunc, gas2), uniform_trunc, gas2)
    report = compare_with_solution(state, uniform_field, uniform_trunc)
    assert report.passed, report.failures()


@pytest.mark.slow
def test_bump_solution_above_annulus_state(gas2, uniform4):
    """Test hat_psi <= psi <= psi_bar_L for flow past a bump of height 0.3 with L = 10."""
    setup = ProblemSetup(gas=gas2, profile=uniform4, obstacle=Obstacle.smooth_bump(0.3),
                         X=8.0, L=10.0, nx=128, nr=96, solver=SolverConfig())
    record = solve_at(setup, 4.0)
    assert record.certified
    state = build_state(solve_rho1(record.trunc, gas2, 10.0, 0.3), record.trunc, gas2, 10.0, 0.3)
    report = compare_with_solution(state, record.field, record.trunc)
    assert report.passed, report.failures()


def test_annulus_table(tmp_path, trunc10, gas2):
    """Test the annulus file layout."""
    state = build_state(4.0, trunc10, gas2, n_steps=16)
    lines = write_annulus(state, tmp_path / "annulus.csv").read_text().splitlines()
    assert lines[0] == "rho1 = 4.0"
    assert lines[1] == "s,chi,u1"
    assert len(lines) == 2 + 17
