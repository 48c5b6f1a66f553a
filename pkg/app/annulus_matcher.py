"""
Matched one-dimensional downstream state over the annulus J < r < L.

Given the truncated upstream profile, find the density rho1 for which the
annulus carries the same mass flux and Bernoulli data as the upstream layer
[0, L], the streamline map chi: [0, L] -> [J, L], the velocity u1 and the
comparison stream function hat_psi used as a lower bound for the solution.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from app.errors import ConfigurationError, DomainError, HypothesisError, NumericalError
from app.gas_model import GasModel, enthalpy, sonic_data
from app.schemas import CheckResult, VerificationReport
from app.stream_solver import StreamField
from app.upstream_profile import TruncatedProfile

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 4096


@dataclass
class AnnulusState:
    """Tabulated matched state on the s-grid of [0, L]."""
    rho1: float
    J: float
    L: float
    s: np.ndarray
    chi: np.ndarray
    u1: np.ndarray  # u1(chi(s))
    hat_psi: np.ndarray  # hat_psi(chi(s))

    @property
    def xi(self) -> np.ndarray:
        return self.chi ** 2 - self.s ** 2

    def subsonic_margin(self, gas: GasModel) -> float:
        """rho1^((gamma-1)/2) - max u1; positive for a subsonic matched state."""
        return float(self.rho1 ** (0.5 * (gas.gamma - 1.0)) - np.max(self.u1))


def _check_length(trunc: TruncatedProfile, L: Optional[float]) -> float:
    if L is None:
        return trunc.L
    if abs(L - trunc.L) > 1e-12 * trunc.L:
        raise ConfigurationError(f"annulus radius L={L} differs from the truncation radius {trunc.L}")
    return trunc.L


def _discriminant(rho: float, u: np.ndarray, trunc: TruncatedProfile, gas: GasModel) -> np.ndarray:
    """D(s; rho) = 2 (h(rho_inf) - h(rho)) + u_L(s)^2."""
    return 2.0 * (enthalpy(trunc.rho_inf, gas) - enthalpy(rho, gas)) + u * u


def bracket(trunc: TruncatedProfile, gas: GasModel) -> Tuple[float, float]:
    """
    (rho_lower, rho_upper) enclosing the matched density.

    rho_lower is the sonic density for the Bernoulli value of the fastest upstream
    layer, rho_upper the stagnation density for the slowest one.
    """
    threshold = trunc.sonic_threshold(gas)
    if trunc.rho_inf <= threshold:
        raise HypothesisError(
            f"upstream flow is not uniformly subsonic: rho_inf={trunc.rho_inf} <= {threshold:.6g}"
        )
    h_inf = enthalpy(trunc.rho_inf, gas)
    rho_lower = float(sonic_data(0.5 * trunc.sup_velocity ** 2 + h_inf, gas).rho_star)
    rho_upper = float(sonic_data(0.5 * trunc.min_velocity ** 2 + h_inf, gas).rho_upper)
    return rho_lower, rho_upper


def mass_flux_G(rho: float, trunc: TruncatedProfile, gas: GasModel,
                L: Optional[float] = None) -> float:
    """G(rho) = int_0^L rho_inf u_L(s) s / (rho sqrt(D(s; rho))) ds."""
    _check_length(trunc, L)
    s, w = trunc.quadrature()
    u = trunc.velocity(s)
    D = _discriminant(rho, u, trunc, gas)
    if np.any(D <= 0.0):
        raise DomainError(f"rho={rho} outside the matching bracket (D <= 0)")
    return float(np.sum(w * trunc.rho_inf * u * s / (rho * np.sqrt(D))))


def solve_rho1(trunc: TruncatedProfile, gas: GasModel, L: Optional[float] = None,
               J: float = 0.0) -> float:
    """Root of G(rho) = (L^2 - J^2)/2 in [rho_lower, rho_inf]."""
    L = _check_length(trunc, L)
    if not 0.0 <= J < L:
        raise ConfigurationError(f"obstacle height J={J} must lie in [0, L)")
    rho_lower, _ = bracket(trunc, gas)
    if J == 0.0:
        return trunc.rho_inf
    target = 0.5 * (L * L - J * J)

    def gap(rho: float) -> float:
        return mass_flux_G(rho, trunc, gas) - target

    low_gap = gap(rho_lower)
    if low_gap >= 0.0:
        raise ConfigurationError(
            f"L too small: no matched density for L={L}, J={J} (G(rho_lower) - target = {low_gap:.6g})"
        )
    rho1 = brentq(gap, rho_lower, trunc.rho_inf, xtol=1e-14, rtol=4.0 * np.finfo(float).eps,
                  maxiter=200)
    logger.info(f"Matched annulus density rho1={rho1:.12g} (L={L}, J={J})")
    return float(rho1)


def build_state(rho1: float, trunc: TruncatedProfile, gas: GasModel,
                L: Optional[float] = None, J: float = 0.0,
                n_steps: int = DEFAULT_STEPS) -> AnnulusState:
    """
    Integrate d(chi^2)/ds = 2 rho_inf u_L s / (rho1 sqrt(D)) from chi(0)^2 = J^2
    by fixed-step RK4, set u1(chi(s)) = sqrt(D(s; rho1)) and tabulate
    hat_psi(r) = rho1 int_J^r u1(t) t dt.
    """
    L = _check_length(trunc, L)
    if n_steps < 16:
        raise ConfigurationError("annulus integration needs at least 16 steps")
    s = np.linspace(0.0, L, n_steps + 1)
    h = s[1] - s[0]

    def rate(x: np.ndarray) -> np.ndarray:
        u = trunc.velocity(x)
        D = _discriminant(rho1, u, trunc, gas)
        if np.any(D <= 0.0):
            raise DomainError(f"rho1={rho1} outside the matching bracket (D <= 0)")
        return 2.0 * trunc.rho_inf * u * x / (rho1 * np.sqrt(D))

    left = s[:-1]
    k1 = rate(left)
    k2 = rate(left + 0.5 * h)
    k3 = k2
    k4 = rate(s[1:])
    Y = J * J + np.concatenate([[0.0], np.cumsum(h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)])
    chi = np.sqrt(Y)
    if np.any(np.diff(chi) <= 0.0):
        raise NumericalError("streamline map is not strictly increasing; refine the annulus steps",
                             context={"n_steps": n_steps})

    u1 = np.sqrt(_discriminant(rho1, trunc.velocity(s), trunc, gas))
    hat = rho1 * cumulative_simpson(u1 * chi, x=chi, initial=0.0)
    return AnnulusState(rho1=float(rho1), J=float(J), L=float(L), s=s, chi=chi, u1=u1, hat_psi=hat)


def hat_psi(state: AnnulusState, r) -> np.ndarray:
    """Comparison stream function at radii in [J, L]."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr < state.J - 1e-12) or np.any(rr > state.L + 1e-12):
        raise DomainError(f"hat_psi is defined on [{state.J}, {state.L}]")
    value = PchipInterpolator(state.chi, state.hat_psi)(np.clip(rr, state.chi[0], state.chi[-1]))
    return float(value) if np.ndim(r) == 0 else value


def check_state(state: AnnulusState, trunc: TruncatedProfile, gas: GasModel) -> VerificationReport:
    """Endpoint, monotonicity, xi range, subsonic, Bernoulli and mass-matching checks."""
    L, J = state.L, state.J
    end_tol = 1e-6 * L
    end_gap = max(abs(state.chi[0] - J), abs(state.chi[-1] - L))
    xi = state.xi
    xi_tol = 1e-9 * L * L
    xi_margin = min(float(np.min(xi)), J * J - float(np.max(xi))) + xi_tol
    xi_rise = float(np.max(np.diff(xi)))

    u = trunc.velocity(state.s)
    h_inf = enthalpy(trunc.rho_inf, gas)
    bern_gap = float(np.max(np.abs(0.5 * u * u + h_inf - 0.5 * state.u1 ** 2 - enthalpy(state.rho1, gas))))
    bern_tol = 1e-10 * (h_inf + 0.5 * trunc.sup_velocity ** 2)
    mass_gap = float(np.max(np.abs(state.hat_psi - np.asarray(trunc.stream(state.s)))))
    mass_tol = 1e-6 * trunc.m_L
    subsonic = state.subsonic_margin(gas)

    checks = [
        CheckResult(name="chi_endpoints", passed=end_gap <= end_tol, margin=end_tol - end_gap,
                    tolerance=end_tol),
        CheckResult(name="chi_monotone", passed=bool(np.all(np.diff(state.chi) > 0.0)),
                    margin=float(np.min(np.diff(state.chi)))),
        CheckResult(name="xi_range", passed=xi_margin >= 0.0, margin=xi_margin, tolerance=xi_tol),
        CheckResult(name="xi_nonincreasing", passed=xi_rise <= xi_tol, margin=xi_tol - xi_rise,
                    tolerance=xi_tol),
        CheckResult(name="subsonic", passed=subsonic > 0.0, margin=subsonic),
        CheckResult(name="bernoulli_matching", passed=bern_gap <= bern_tol,
                    margin=bern_tol - bern_gap, tolerance=bern_tol),
        CheckResult(name="mass_matching", passed=mass_gap <= mass_tol,
                    margin=mass_tol - mass_gap, tolerance=mass_tol),
    ]
    return VerificationReport(checks=checks)


def compare_with_solution(state: AnnulusState, field: StreamField, trunc: TruncatedProfile,
                          tol: Optional[float] = None) -> VerificationReport:
    """psi >= hat_psi(r) - tol at flow nodes with r > J, and psi <= psi_bar_L(r) + tol everywhere."""
    grid = field.grid
    if abs(grid.L - state.L) > 1e-12 * state.L:
        raise ConfigurationError(f"field radius L={grid.L} differs from the annulus radius {state.L}")
    tol = 1e-6 * trunc.m_L if tol is None else tol
    psi = field.psi

    band = grid.r > state.J
    if not np.any(band):
        raise ConfigurationError("annulus region holds no grid rows")
    lower = np.asarray(hat_psi(state, grid.r[band]))
    fluid = grid.fluid[:, band]
    shortfall = float(np.max((lower[None, :] - psi[:, band])[fluid]))
    excess = float(np.max(psi - np.asarray(trunc.stream(grid.r))[None, :]))

    checks = [
        CheckResult(name="annulus_lower_bound", passed=shortfall <= tol, margin=tol - shortfall,
                    tolerance=tol),
        CheckResult(name="upstream_upper_bound", passed=excess <= tol, margin=tol - excess,
                    tolerance=tol),
    ]
    report = VerificationReport(checks=checks)
    if not report.passed:
        logger.warning(f"Annulus comparison failures: {report.failures()}")
    return report


def write_annulus(state: AnnulusState, path: Union[str, Path]) -> Path:
    """rho1 line, then the table s,chi,u1 at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"rho1 = {state.rho1!r}\n")
        fh.write("s,chi,u1\n")
        np.savetxt(fh, np.column_stack([state.s, state.chi, state.u1]), fmt="%.17g", delimiter=",")
    return path
