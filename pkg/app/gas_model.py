"""
Gamma-law thermodynamics and the subsonic-branch density inversion.

Everything is nondimensional: P = rho^gamma / gamma, c = rho^((gamma-1)/2),
h = rho^(gamma-1) / (gamma-1). All functions accept scalars or numpy arrays
and return the same kind.
"""
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from app.config import get_settings
from app.errors import DomainError, OutOfBranchError, SingularityError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_MAX_NEWTON = 100


@dataclass(frozen=True)
class GasModel:
    """Isentropic gamma-law gas."""
    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class SonicData:
    """Sonic density, stagnation density and sonic momentum-squared for a Bernoulli value."""
    rho_star: ArrayLike
    rho_upper: ArrayLike
    sigma: ArrayLike


def _result(value: np.ndarray, *inputs) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


def enthalpy(rho: ArrayLike, gas: GasModel) -> ArrayLike:
    """h(rho) = rho^(gamma-1) / (gamma-1)."""
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("enthalpy needs a positive density")
    return _result(r ** (gas.gamma - 1.0) / (gas.gamma - 1.0), rho)


def pressure(rho: ArrayLike, gas: GasModel) -> ArrayLike:
    """P(rho) = rho^gamma / gamma."""
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("pressure needs a positive density")
    return _result(r ** gas.gamma / gas.gamma, rho)


def sound_speed(rho: ArrayLike, gas: GasModel) -> ArrayLike:
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("sound speed needs a positive density")
    return _result(r ** (0.5 * (gas.gamma - 1.0)), rho)


def sonic_data(B: ArrayLike, gas: GasModel) -> SonicData:
    """Closed-form sonic and stagnation densities for Bernoulli value B."""
    b = np.asarray(B, dtype=float)
    if np.any(b <= 0.0):
        raise DomainError("Bernoulli value must be positive")
    g = gas.gamma
    expo = 1.0 / (g - 1.0)
    rho_star = (2.0 * (g - 1.0) * b / (g + 1.0)) ** expo
    rho_upper = ((g - 1.0) * b) ** expo
    sigma = rho_star ** (g + 1.0)
    return SonicData(
        rho_star=_result(rho_star, B),
        rho_upper=_result(rho_upper, B),
        sigma=_result(sigma, B),
    )


def subsonic_density(M: ArrayLike, B: ArrayLike, gas: GasModel,
                     tol: float = None) -> ArrayLike:
    """
    Density H on the subsonic branch solving M/(2H^2) + h(H) = B.

    Safeguarded Newton bracketed by [rho_star, rho_upper], bisecting whenever
    the Newton candidate leaves the bracket. Momentum within `tol` (relative)
    above the sonic value clamps to rho_star.
    """
    if tol is None:
        tol = get_settings().near_sonic_tol
    m, b = np.broadcast_arrays(np.asarray(M, dtype=float), np.asarray(B, dtype=float))
    m = np.array(m, dtype=float)
    b = np.array(b, dtype=float)
    sonic = sonic_data(b, gas)
    sigma = np.asarray(sonic.sigma)
    if np.any(m < 0.0):
        raise OutOfBranchError("negative momentum density")
    if np.any(m > sigma * (1.0 + tol)):
        worst = float(np.max(m / sigma))
        raise OutOfBranchError(
            f"momentum above sonic value (M/Sigma = {worst:.6g}); apply the subsonic truncation first"
        )

    g = gas.gamma
    lo = np.array(sonic.rho_star, dtype=float)
    hi = np.array(sonic.rho_upper, dtype=float)
    rho = hi.copy()
    at_sonic = m >= sigma

    for _ in range(_MAX_NEWTON):
        f = m / (2.0 * rho * rho) + rho ** (g - 1.0) / (g - 1.0) - b
        hi = np.where(f > 0.0, rho, hi)
        lo = np.where(f <= 0.0, rho, lo)
        df = (rho ** (g + 1.0) - m) / rho ** 3
        with np.errstate(divide="ignore", invalid="ignore"):
            candidate = rho - f / df
        bad = ~np.isfinite(candidate) | (candidate < lo) | (candidate > hi)
        new = np.where(bad, 0.5 * (lo + hi), candidate)
        done = np.abs(new - rho) <= 4.0 * np.finfo(float).eps * rho
        rho = new
        if np.all(done | at_sonic):
            break

    rho = np.where(at_sonic, np.asarray(sonic.rho_star), rho)
    return _result(rho, M, B)


def density_partials(M: ArrayLike, B: ArrayLike, dB_dpsi: ArrayLike,
                     gas: GasModel) -> Tuple[ArrayLike, ArrayLike]:
    """(dH/dM, dH/dpsi) by implicit differentiation of the Bernoulli relation."""
    m = np.asarray(M, dtype=float)
    sonic = sonic_data(B, gas)
    if np.any(m >= np.asarray(sonic.sigma)):
        raise SingularityError("density partials degenerate at the sonic state")
    H = np.asarray(subsonic_density(M, B, gas), dtype=float)
    denom = H ** (gas.gamma + 1.0) - m
    if np.any(denom <= 0.0):
        raise SingularityError("density partials degenerate at the sonic state")
    H1 = -H / (2.0 * denom)
    H2 = np.asarray(dB_dpsi, dtype=float) * H ** 3 / denom
    return _result(H1, M, B, dB_dpsi), _result(H2, M, B, dB_dpsi)


def mach(q: ArrayLike, rho: ArrayLike, gas: GasModel) -> ArrayLike:
    """Mach number q / rho^((gamma-1)/2)."""
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("mach needs a positive density")
    return _result(np.asarray(q, dtype=float) / r ** (0.5 * (gas.gamma - 1.0)), q, rho)


def branch_density(t: ArrayLike, B: ArrayLike, gas: GasModel) -> ArrayLike:
    """Subsonic-branch density whose Mach number equals t (0 <= t <= 1)."""
    tt = np.asarray(t, dtype=float)
    b = np.asarray(B, dtype=float)
    if np.any(tt < 0.0) or np.any(tt > 1.0 + 1e-12):
        raise DomainError("Mach ratio must lie in [0, 1]")
    if np.any(b <= 0.0):
        raise DomainError("Bernoulli value must be positive")
    g = gas.gamma
    rho = (b / (0.5 * tt * tt + 1.0 / (g - 1.0))) ** (1.0 / (g - 1.0))
    return _result(rho, t, B)


def mach_ratio(M: ArrayLike, B: ArrayLike, gas: GasModel) -> ArrayLike:
    """
    sqrt(M) / H^((gamma+1)/2), continued past the sonic value as sqrt(M / Sigma).
    """
    m = np.asarray(M, dtype=float)
    sigma = np.asarray(sonic_data(B, gas).sigma)
    H = np.asarray(subsonic_density(np.minimum(m, sigma), B, gas), dtype=float)
    return _result(np.sqrt(m) / H ** (0.5 * (gas.gamma + 1.0)), M, B)
