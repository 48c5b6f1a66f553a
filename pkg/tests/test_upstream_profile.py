"""Tests for upstream profiles, stream values and the truncation."""
import numpy as np
import pytest

from app.errors import ConfigurationError, DomainError
from app.gas_model import enthalpy
from app.upstream_profile import (
    UpstreamProfile,
    bernoulli,
    bernoulli_convexity,
    extend_F,
    extend_F_prime,
    theta_and_prime,
    truncate,
    upstream_stream,
    validate,
)


# ============= Stream Function Tests =============

def test_uniform_stream_is_quadratic(uniform4):
    """Test psi_bar(r) = rho u r^2 / 2 for uniform flow."""
    assert upstream_stream(uniform4, 3.0) == pytest.approx(18.0, rel=1e-12)


def test_vortical_stream_closed_form():
    """Test psi_bar(1) = 6.5 - 14/e for u = 1 + 2(r+1)e^-r at rho = 1."""
    profile = UpstreamProfile.exp_vortical(1.0, 2.0, 1.0)
    assert upstream_stream(profile, 1.0) == pytest.approx(6.5 - 14.0 / np.e, rel=1e-10)


def test_kappa_inverts_stream(vortical):
    """Test that kappa recovers the radius from its stream value."""
    r = np.array([0.0, 0.3, 1.0, 4.0, 12.0])
    assert vortical.kappa(vortical.stream(r)) == pytest.approx(r, abs=1e-10)


def test_kappa_rejects_negative_stream(uniform4):
    """Test that negative stream values are outside kappa's domain."""
    with pytest.raises(DomainError):
        uniform4.kappa(-1.0)


def test_with_density_scales_stream(uniform4):
    """Test that doubling the density doubles psi_bar."""
    assert uniform4.with_density(8.0).stream(2.0) == pytest.approx(2.0 * uniform4.stream(2.0))


# ============= Theta and Bernoulli Tests =============

def test_theta_and_prime_at_unit_radius():
    """Test Theta and Theta' at the stream value of r = 1."""
    profile = UpstreamProfile.exp_vortical(1.0, 2.0, 1.0)
    psi = profile.stream(1.0)
    theta, prime = theta_and_prime(profile, psi)
    u1 = 1.0 + 4.0 / np.e
    assert theta == pytest.approx(u1, rel=1e-10)
    assert prime == pytest.approx((-2.0 / np.e) / u1, rel=1e-8)


def test_theta_prime_axis_limit():
    """Test Theta'(0) = u''(0) / (rho_inf u(0))."""
    profile = UpstreamProfile.exp_vortical(1.0, 2.0, 1.0)
    assert profile.theta0_prime == pytest.approx(-2.0 / 3.0)
    assert profile.theta_prime(0.0) == pytest.approx(-2.0 / 3.0)


def test_bernoulli_value(vortical, gas2):
    """Test B(psi) = Theta^2/2 + h(rho_inf) on the axis."""
    assert bernoulli(vortical, 0.0, gas2) == pytest.approx(4.5 + enthalpy(16.0, gas2))


def test_convexity_non_negative_for_vortical(vortical):
    """Test that the structural condition gives a non-negative convexity proxy."""
    psi = vortical.stream(np.linspace(0.1, 20.0, 50))
    assert np.all(bernoulli_convexity(vortical, psi) >= 0.0)


# ============= Truncation Tests =============

def test_truncated_mass_flux(uniform4):
    """Test m_L = 200 for uniform flow, L = 10, rho = 4."""
    assert truncate(uniform4, 10.0).m_L == pytest.approx(200.0, rel=1e-12)


def test_truncated_slope_ramp():
    """Test g_L(r) = (L - r) u'(L-1) on the last unit of the truncation."""
    trunc = truncate(UpstreamProfile.exp_vortical(1.0, 2.0, 4.0), 10.0)
    assert trunc.g_L(9.5) == pytest.approx(-9.0 * np.exp(-9.0), rel=1e-10)
    assert trunc.g_L(10.0) == pytest.approx(0.0)
    assert trunc.g_L(8.0) == pytest.approx(-16.0 * np.exp(-8.0), rel=1e-10)


def test_truncated_velocity_continuous(vortical):
    """Test that u_L joins the base profile continuously at L - 1."""
    trunc = truncate(vortical, 10.0)
    assert trunc.velocity(9.0 + 1e-9) == pytest.approx(vortical.velocity(9.0), abs=1e-8)


def test_truncated_mass_flux_closed_form(vortical):
    """Test m_L by quadrature against the closed form of u = 1 + 2(r+1)e^-r cut at L = 4, rho = 16."""
    L, rc = 4.0, 3.0
    u_cut = 1.0 + 2.0 * (rc + 1.0) * np.exp(-rc)
    s_cut = -2.0 * rc * np.exp(-rc)
    inner = 0.5 * rc * rc + 2.0 * (3.0 - (rc * rc + 3.0 * rc + 3.0) * np.exp(-rc))
    ramp = u_cut * (L - 0.5) + 0.5 * s_cut * (2.0 * L / 3.0 - 0.25)
    trunc = truncate(vortical, L)
    assert trunc.m_L == pytest.approx(16.0 * (inner + ramp), rel=1e-10)
    assert trunc.stream(L) == pytest.approx(trunc.m_L, rel=1e-12)


def test_truncated_profile_keeps_structural_condition(vortical):
    """Test u_L'' r >= u_L' (non-negative convexity proxy) across the cut and the ramp."""
    trunc = truncate(vortical, 4.0)
    psi = trunc.stream(np.linspace(0.05, 4.0, 200))
    assert np.all(bernoulli_convexity(trunc, psi) >= 0.0)
    r = np.linspace(3.0, 4.0, 11)
    assert np.all(trunc.curvature(r) * r - trunc.slope(r) > 0.0)


def test_truncation_radius_too_small(uniform4):
    """Test that L must exceed max(1, J) + 1."""
    with pytest.raises(ConfigurationError):
        truncate(uniform4, 2.0)
    with pytest.raises(ConfigurationError):
        truncate(uniform4, 3.0, J=2.5)


# ============= Extension Tests =============

def test_extension_continuous_at_joins(vortical):
    """Test that F_L and F_L' are continuous at psi = -1 and psi = 0."""
    trunc = truncate(vortical, 10.0)
    for s in (-1.0, 0.0):
        assert extend_F(trunc, s - 1e-9) == pytest.approx(extend_F(trunc, s + 1e-9), abs=1e-7)
        assert extend_F_prime(trunc, s - 1e-9) == pytest.approx(extend_F_prime(trunc, s + 1e-9), abs=1e-5)


def test_extension_constant_outside(vortical):
    """Test that F_L is constant below -1 and above m_L."""
    trunc = truncate(vortical, 10.0)
    assert extend_F(trunc, -5.0) == pytest.approx(extend_F(trunc, -2.0))
    assert extend_F(trunc, trunc.m_L + 10.0) == pytest.approx(float(trunc.velocity(10.0)))
    assert extend_F_prime(trunc, trunc.m_L + 10.0) == 0.0


# ============= Validation Tests =============

def test_validate_admissible_profiles(uniform4, vortical):
    """Test that uniform and exponential vortical profiles satisfy the hypotheses."""
    assert validate(uniform4).passed
    assert validate(vortical).passed


def test_validate_increasing_profile_fails():
    """Test that an increasing tabulated profile fails the monotonicity and structural checks."""
    r = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    u = np.array([1.0, 1.2, 1.4, 1.6, 1.8])
    report = validate(UpstreamProfile.tabulated(r, u, 1.0), r_max=4.0)
    assert not report.passed
    assert "decreasing" in report.failures()
    assert "structural" in report.failures()


def test_tabulated_radii_must_start_at_axis():
    """Test that a profile table not starting at r = 0 is rejected."""
    with pytest.raises(ConfigurationError):
        UpstreamProfile.tabulated(np.array([0.5, 1.0, 2.0, 3.0]), np.ones(4), 1.0)
