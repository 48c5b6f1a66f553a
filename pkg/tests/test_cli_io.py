"""Tests for config parsing and the output tables."""
import numpy as np
import pytest

from app.cli_io import (
    config_echo,
    config_hash,
    parse_config,
    parse_config_text,
    read_field,
    read_summary,
    write_field,
)
from app.config import Settings
from app.errors import ConfigurationError
from app.flow_verify import reconstruct
from app.geometry_grid import Obstacle, build_grid
from app.models import ObstacleKind, ProfileKind, Relaxation
from app.stream_solver import solve

SMALL_CONFIG = """
# uniform flow, small grid
gas.gamma = 2
profile.kind = uniform
profile.rho_inf = 4
domain.X = 2
domain.L = 3
domain.nx = 16
domain.nr = 16
solver.k_schedule = [0.1, 0.0]
"""


# ============= Config Parsing Tests =============

def test_parse_minimal_config():
    """Test that a single required key yields a config with defaults."""
    config = parse_config_text("profile.rho_inf = 4")
    assert config.profile.rho_inf == 4.0
    assert config.profile.kind == ProfileKind.UNIFORM
    assert config.gas.gamma == 1.4
    assert config.solver.k_schedule[-1] == 0.0


def test_parse_values():
    """Test list, boolean, string and numeric values with comments."""
    text = SMALL_CONFIG + "tasks.warm_start = false  # cold\nobstacle.kind = smooth_bump\nobstacle.height = 0.3\n"
    config = parse_config_text(text)
    assert config.solver.k_schedule == [0.1, 0.0]
    assert config.tasks.warm_start is False
    assert config.obstacle.kind == ObstacleKind.SMOOTH_BUMP
    assert config.domain.nx == 16


def test_gamma_error_message():
    """Test the error path and message for gamma <= 1."""
    with pytest.raises(ConfigurationError, match="gas.gamma: gamma must exceed 1"):
        parse_config_text("profile.rho_inf = 4\ngas.gamma = 0.9")


def test_eps0_error_message():
    """Test the error message for eps0 outside (0, 1/4)."""
    with pytest.raises(ConfigurationError, match=r"solver.eps0: eps0 must lie in \(0, 0.25\)"):
        parse_config_text("profile.rho_inf = 4\nsolver.eps0 = 0.3")


def test_relaxation_keys():
    """Test the Picard relaxation keys and the floor-above-start error."""
    config = parse_config_text("profile.rho_inf = 4\nsolver.picard.relaxation = fixed\nsolver.picard.damping = 0.5")
    assert config.solver.picard.relaxation == Relaxation.FIXED
    assert config.solver.picard.damping == 0.5
    assert parse_config_text("profile.rho_inf = 4").solver.picard.relaxation == Relaxation.AITKEN
    with pytest.raises(ConfigurationError, match="solver.picard: min_damping must not exceed damping"):
        parse_config_text("profile.rho_inf = 4\nsolver.picard.min_damping = 0.9")


def test_settings_from_environment(monkeypatch):
    """Test that SUBSONIC_ variables reach the process settings and no output directory is kept there."""
    monkeypatch.setenv("SUBSONIC_LINEAR_REFACTOR_ITERS", "7")
    settings = Settings()
    assert settings.linear_refactor_iters == 7
    assert settings.checkpoint_every == 25
    assert "output_dir" not in Settings.model_fields


@pytest.mark.parametrize("text", [
    "profile.rho_inf = 4\ndomain.colour = red",
    "profile.rho_inf = 4\nprofile.rho_inf = 5",
    "profile.rho_inf = 4\njust some words",
    "profile.rho_inf = 4\ndomain.L = 2",
    "profile.rho_inf = 4\ntasks.sweep_densities = [2, 3]",
    "profile.rho_inf = 4\nsolver.k_schedule = [0.1, 0.01]",
    "profile.kind = tabulated\nprofile.rho_inf = 4",
    "gas.gamma = 2",
])
def test_invalid_configs(text):
    """Test that malformed or inconsistent configs are configuration errors."""
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_missing_config_file(tmp_path):
    """Test that a missing file is a configuration error."""
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "absent.cfg")


def test_config_echo_parses_back():
    """Test that the canonical echo reproduces the same config and hash."""
    config = parse_config_text(SMALL_CONFIG)
    echoed = parse_config_text(config_echo(config))
    assert echoed == config
    assert config_hash(echoed) == config_hash(config)


def test_config_hash_tracks_values():
    """Test that changing a value changes the hash."""
    a = parse_config_text(SMALL_CONFIG)
    b = parse_config_text(SMALL_CONFIG.replace("profile.rho_inf = 4", "profile.rho_inf = 5"))
    assert config_hash(a) != config_hash(b)
    assert len(config_hash(a)) == 64


# ============= Field Table Tests =============

def test_field_table(tmp_path, uniform_field, uniform_trunc, gas2):
    """Test the field table rows, ordering and summary for a 16 x 16 grid."""
    flow = reconstruct(uniform_field, uniform_trunc, gas2)
    path = write_field(flow, uniform_field, tmp_path / "field.csv", config_digest="abc")
    assert path.read_text().splitlines()[0] == "x,r,psi,rho,u,v,mach"

    columns = read_field(path)
    assert columns["x"].size == 289
    assert columns["x"][1] > columns["x"][0]
    assert columns["r"][1] == columns["r"][0]
    assert np.allclose(columns["rho"], 4.0, atol=1e-6)

    summary = read_summary(tmp_path / "field.summary")
    assert summary["config_hash"] == "abc"
    assert float(summary["Q"]) == pytest.approx(0.5, rel=1e-6)
    assert int(summary["flagged_nodes"]) == 0


def test_read_missing_field(tmp_path):
    """Test that reading an absent field table is a configuration error."""
    with pytest.raises(ConfigurationError):
        read_field(tmp_path / "none.csv")


@pytest.mark.slow
def test_field_table_reproducible(tmp_path, uniform_trunc, gas2, small_config):
    """Test that two 128 x 128 solves of the same config write byte-identical field tables."""
    grid = build_grid(Obstacle.none(), 2.0, 3.0, 128, 128)
    paths = []
    for name in ("first.csv", "second.csv"):
        field = solve(grid, uniform_trunc, gas2, small_config)
        flow = reconstruct(field, uniform_trunc, gas2)
        paths.append(write_field(flow, field, tmp_path / name, config_digest="abc"))
    assert paths[0].read_bytes() == paths[1].read_bytes()
    psi_bar = np.asarray(uniform_trunc.stream(grid.r))
    assert np.max(np.abs(field.psi - psi_bar[None, :])) <= 1e-8 * uniform_trunc.m_L
