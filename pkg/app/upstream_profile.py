"""
Upstream axial-velocity profiles and the stream-value machinery built on them.

A profile u(r) at upstream density rho_inf fixes the upstream stream function
psi_bar(r) = rho_inf * int_0^r u(s) s ds, its inverse kappa(psi), the transported
velocity Theta(psi) = u(kappa(psi)) and the Bernoulli function
B(psi) = Theta^2/2 + h(rho_inf). Integrals come from a Gauss-Legendre panel
table built eagerly at construction, so profile objects are read-only afterwards.
"""
import logging
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from app.config import get_settings
from app.errors import ConfigurationError, DomainError
from app.gas_model import GasModel, enthalpy
from app.models import ProfileKind
from app.schemas import CheckResult, VerificationReport

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_R_MAX = 64.0
_GAUSS_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
_SMALL_R = 1e-4
_NEWTON_STEPS = 4


def _result(value: np.ndarray, like) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


class RadialProfile:
    """
    Base class: a positive radial velocity profile with cached stream integrals.

    Subclasses provide velocity, slope (u'), curvature (u''), third (u''') and
    slope_over_r (u'/r with its limit u''(0) at the axis), set their own
    parameters and then call RadialProfile.__init__.
    """

    def __init__(self, rho_inf: float, r_max: float, n_nodes: Optional[int] = None,
                 breakpoints: Iterable[float] = ()):
        if not rho_inf > 0.0:
            raise DomainError(f"upstream density must be positive, got {rho_inf}")
        self.rho_inf = float(rho_inf)
        self.r_max = float(r_max)
        n_nodes = n_nodes or get_settings().quadrature_nodes
        self.n_nodes = int(n_nodes)
        extra = [b for b in breakpoints if 0.0 < b < r_max]
        knots = np.union1d(np.linspace(0.0, r_max, n_nodes + 1), extra)

        a, b = knots[:-1], knots[1:]
        half = 0.5 * (b - a)
        s = 0.5 * (a + b)[:, None] + half[:, None] * _GL_NODES[None, :]
        w = half[:, None] * _GL_WEIGHTS[None, :]
        u = self.velocity(s)
        if np.any(u <= 0.0):
            raise ConfigurationError("upstream velocity must stay positive")

        self._knots = knots
        self._cum_us = np.concatenate([[0.0], np.cumsum((w * u * s).sum(axis=1))])
        self._cum_u = np.concatenate([[0.0], np.cumsum((w * u).sum(axis=1))])
        self._psi_knots = self.rho_inf * self._cum_us
        self._nodes = s.ravel()
        self._weights = w.ravel()

    # ----- velocity family (overridden) -----

    def velocity(self, r: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def slope(self, r: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def curvature(self, r: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def third(self, r: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def slope_over_r(self, r: ArrayLike) -> np.ndarray:
        """u'(r)/r, with a Taylor fallback u''(0) + u'''(0) r/2 near the axis."""
        r = np.asarray(r, dtype=float)
        safe = np.where(r < _SMALL_R, 1.0, r)
        taylor = self.curvature(0.0) + 0.5 * self.third(0.0) * r
        return np.where(r < _SMALL_R, taylor, self.slope(safe) / safe)

    @property
    def far_field_velocity(self) -> float:
        raise NotImplementedError

    @property
    def sup_velocity(self) -> float:
        """Largest sampled velocity (the axis value for decreasing profiles)."""
        return float(max(np.max(self.velocity(self._knots)), np.max(self.velocity(self._nodes))))

    @property
    def min_velocity(self) -> float:
        return float(min(np.min(self.velocity(self._knots)), np.min(self.velocity(self._nodes))))

    # ----- stream-value machinery -----

    def quadrature(self) -> Tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights covering [0, r_max]."""
        return self._nodes, self._weights

    def _partial_integrals(self, r: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """(int_0^r u s ds, int_0^r u ds) from the panel table."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise DomainError("radius must be non-negative")
        if np.any(r > self.r_max * (1.0 + 1e-12)):
            raise DomainError(f"radius beyond tabulated range r_max={self.r_max}")
        r = np.minimum(r, self.r_max)
        knots = self._knots
        p = np.clip(np.searchsorted(knots, r, side="right") - 1, 0, len(knots) - 2)
        a = knots[p]
        half = 0.5 * (r - a)
        s = a[..., None] + half[..., None] * (_GL_NODES + 1.0)
        w = half[..., None] * _GL_WEIGHTS
        u = self.velocity(s)
        i_us = self._cum_us[p] + (w * u * s).sum(axis=-1)
        i_u = self._cum_u[p] + (w * u).sum(axis=-1)
        return i_us, i_u

    def stream(self, r: ArrayLike) -> ArrayLike:
        """psi_bar(r) = rho_inf int_0^r u(s) s ds."""
        i_us, _ = self._partial_integrals(r)
        return _result(self.rho_inf * i_us, r)

    def weighted_integral(self, r: ArrayLike, k: float) -> ArrayLike:
        """int_0^r (s + k) u(s) ds."""
        i_us, i_u = self._partial_integrals(r)
        return _result(i_us + k * i_u, r)

    @property
    def total_stream(self) -> float:
        return float(self._psi_knots[-1])

    def kappa(self, psi: ArrayLike) -> ArrayLike:
        """Upstream radius carrying stream value psi (inverse of psi_bar)."""
        q = np.asarray(psi, dtype=float)
        if np.any(q < 0.0):
            raise DomainError("stream value must be non-negative")
        top = self._psi_knots[-1]
        if np.any(q > top * (1.0 + 1e-12)):
            raise DomainError("stream value beyond tabulated range")
        q = np.minimum(q, top)

        knots, pk = self._knots, self._psi_knots
        p = np.clip(np.searchsorted(pk, q, side="right") - 1, 0, len(knots) - 2)
        a, b = knots[p], knots[p + 1]
        sa, sb = np.sqrt(pk[p]), np.sqrt(pk[p + 1])
        r = a + (b - a) * (np.sqrt(q) - sa) / (sb - sa)

        for _ in range(_NEWTON_STEPS):
            f = np.asarray(self.stream(r)) - q
            d = self.rho_inf * self.velocity(r) * r
            step = np.where(d > 0.0, f / np.where(d > 0.0, d, 1.0), 0.0)
            r = np.clip(r - step, a, b)
        r = np.where(q == 0.0, 0.0, r)
        return _result(r, psi)

    def theta(self, psi: ArrayLike) -> ArrayLike:
        """Theta(psi) = u(kappa(psi))."""
        return _result(self.velocity(self.kappa(psi)), psi)

    def theta_prime(self, psi: ArrayLike) -> ArrayLike:
        """Theta'(psi) = u'(kappa) / (rho_inf kappa u(kappa)); u''(0)/(rho_inf u(0)) at psi = 0."""
        k = np.asarray(self.kappa(psi), dtype=float)
        return _result(self.slope_over_r(k) / (self.rho_inf * self.velocity(k)), psi)

    @property
    def theta0(self) -> float:
        return float(self.velocity(0.0))

    @property
    def theta0_prime(self) -> float:
        return float(self.curvature(0.0) / (self.rho_inf * self.velocity(0.0)))

    def sonic_threshold(self, gas: GasModel) -> float:
        """Density below which the upstream flow stops being uniformly subsonic."""
        return self.sup_velocity ** (2.0 / (gas.gamma - 1.0))


class UpstreamProfile(RadialProfile):
    """uniform(u_bar), exp_vortical(u_bar, K) or tabulated(r, u) at density rho_inf."""

    def __init__(self, kind: ProfileKind, rho_inf: float, u_bar: float = 1.0,
                 amplitude: float = 0.0, table: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                 r_max: float = DEFAULT_R_MAX, n_nodes: Optional[int] = None):
        self.kind = ProfileKind(kind)
        self.u_bar = float(u_bar)
        self.amplitude = float(amplitude)
        self._table = None
        self._spline = None
        breakpoints = ()
        if self.kind == ProfileKind.TABULATED:
            if table is None:
                raise ConfigurationError("tabulated profile needs an (r, u) table")
            r_tab, u_tab = (np.asarray(t, dtype=float) for t in table)
            if r_tab.ndim != 1 or r_tab.shape != u_tab.shape or r_tab.size < 4:
                raise ConfigurationError("profile table needs at least four (r, u) rows")
            if r_tab[0] != 0.0 or np.any(np.diff(r_tab) <= 0.0):
                raise ConfigurationError("profile table radii must start at 0 and increase strictly")
            self._table = (r_tab, u_tab)
            self._spline = CubicSpline(r_tab, u_tab, bc_type="natural")
            self.u_bar = float(u_tab[-1])
            r_max = max(r_max, float(r_tab[-1]))
            breakpoints = tuple(r_tab[1:-1])
        elif self.u_bar <= 0.0:
            raise ConfigurationError("u_bar must be positive")
        super().__init__(rho_inf, r_max, n_nodes, breakpoints)

    @classmethod
    def uniform(cls, u_bar: float, rho_inf: float, **kwargs) -> "UpstreamProfile":
        return cls(ProfileKind.UNIFORM, rho_inf, u_bar=u_bar, **kwargs)

    @classmethod
    def exp_vortical(cls, u_bar: float, amplitude: float, rho_inf: float, **kwargs) -> "UpstreamProfile":
        return cls(ProfileKind.EXP_VORTICAL, rho_inf, u_bar=u_bar, amplitude=amplitude, **kwargs)

    @classmethod
    def tabulated(cls, r: np.ndarray, u: np.ndarray, rho_inf: float, **kwargs) -> "UpstreamProfile":
        return cls(ProfileKind.TABULATED, rho_inf, table=(r, u), **kwargs)

    def with_density(self, rho_inf: float) -> "UpstreamProfile":
        """Same profile at another upstream density."""
        return UpstreamProfile(self.kind, rho_inf, u_bar=self.u_bar, amplitude=self.amplitude,
                               table=self._table, r_max=self.r_max, n_nodes=self.n_nodes)

    def _spline_eval(self, r: np.ndarray, nu: int) -> np.ndarray:
        r_end = self._table[0][-1]
        inside = self._spline(np.minimum(r, r_end), nu)
        if nu == 0:
            return np.where(r > r_end, self._table[1][-1], inside)
        return np.where(r > r_end, 0.0, inside)

    def velocity(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == ProfileKind.UNIFORM:
            return np.full_like(r, self.u_bar)
        if self.kind == ProfileKind.EXP_VORTICAL:
            return self.u_bar + self.amplitude * (r + 1.0) * np.exp(-r)
        return self._spline_eval(r, 0)

    def slope(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == ProfileKind.UNIFORM:
            return np.zeros_like(r)
        if self.kind == ProfileKind.EXP_VORTICAL:
            return -self.amplitude * r * np.exp(-r)
        return self._spline_eval(r, 1)

    def curvature(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == ProfileKind.UNIFORM:
            return np.zeros_like(r)
        if self.kind == ProfileKind.EXP_VORTICAL:
            return self.amplitude * (r - 1.0) * np.exp(-r)
        return self._spline_eval(r, 2)

    def third(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == ProfileKind.UNIFORM:
            return np.zeros_like(r)
        if self.kind == ProfileKind.EXP_VORTICAL:
            return self.amplitude * (2.0 - r) * np.exp(-r)
        return self._spline_eval(r, 3)

    def slope_over_r(self, r: ArrayLike) -> np.ndarray:
        if self.kind == ProfileKind.EXP_VORTICAL:
            r = np.asarray(r, dtype=float)
            return -self.amplitude * np.exp(-r)
        return super().slope_over_r(r)

    @property
    def far_field_velocity(self) -> float:
        return self.u_bar


class TruncatedProfile(RadialProfile):
    """
    Velocity truncated at radius L: u_L = u on [0, L-1], then the slope is
    ramped linearly to zero, g_L(r) = (L - r) u'(L-1) on (L-1, L].
    """

    def __init__(self, base: UpstreamProfile, L: float, n_nodes: Optional[int] = None):
        self.base = base
        self.L = float(L)
        self._r_cut = self.L - 1.0
        self._u_cut = float(base.velocity(self._r_cut))
        self._slope_cut = float(base.slope(self._r_cut))
        super().__init__(base.rho_inf, self.L, n_nodes, breakpoints=(self._r_cut,))
        self.m_L = float(self._psi_knots[-1])

    def velocity(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        rr = np.minimum(r, self.L)
        ramp = self._u_cut + 0.5 * self._slope_cut * (1.0 - (self.L - rr) ** 2)
        return np.where(r <= self._r_cut, self.base.velocity(np.minimum(r, self._r_cut)), ramp)

    def slope(self, r: ArrayLike) -> np.ndarray:
        """g_L(r)."""
        r = np.asarray(r, dtype=float)
        ramp = np.where(r < self.L, (self.L - r) * self._slope_cut, 0.0)
        return np.where(r <= self._r_cut, self.base.slope(np.minimum(r, self._r_cut)), ramp)

    g_L = slope

    def curvature(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ramp = np.where(r <= self.L, -self._slope_cut, 0.0)
        return np.where(r <= self._r_cut, self.base.curvature(np.minimum(r, self._r_cut)), ramp)

    def third(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self._r_cut, self.base.third(np.minimum(r, self._r_cut)), 0.0)

    def slope_over_r(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        safe = np.where(r <= self._r_cut, 1.0, r)
        return np.where(r <= self._r_cut, self.base.slope_over_r(np.minimum(r, self._r_cut)),
                        self.slope(safe) / safe)

    @property
    def far_field_velocity(self) -> float:
        return self.base.far_field_velocity


# ============= Module-level operations =============

def upstream_stream(profile: RadialProfile, r: ArrayLike) -> ArrayLike:
    """psi_bar(r)."""
    return profile.stream(r)


def kappa(profile: RadialProfile, psi: ArrayLike) -> ArrayLike:
    return profile.kappa(psi)


def theta_and_prime(profile: RadialProfile, psi: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """(Theta, Theta') at stream value psi."""
    return profile.theta(psi), profile.theta_prime(psi)


def bernoulli(profile: RadialProfile, psi: ArrayLike, gas: GasModel) -> ArrayLike:
    """B(psi) = Theta(psi)^2/2 + h(rho_inf)."""
    th = np.asarray(profile.theta(psi))
    return _result(0.5 * th * th + enthalpy(profile.rho_inf, gas), psi)


def bernoulli_convexity(profile: RadialProfile, psi: ArrayLike) -> ArrayLike:
    """
    Theta Theta'' + Theta'^2 through (u'' k - u') / (rho_inf^2 u k^3), k = kappa(psi).

    Non-negative exactly where the structural condition u'' r >= u' holds.
    """
    q = np.asarray(psi, dtype=float)
    if np.any(q <= 0.0):
        raise DomainError("convexity proxy needs psi > 0")
    k = np.asarray(profile.kappa(q), dtype=float)
    margin = profile.curvature(k) * k - profile.slope(k)
    value = margin / (profile.rho_inf ** 2 * profile.velocity(k) * k ** 3)
    return _result(value, psi)


def truncate(profile: UpstreamProfile, L: float, J: float = 0.0,
             n_nodes: Optional[int] = None) -> TruncatedProfile:
    """Velocity truncation at radius L (needs L > max(1, J) + 1)."""
    if not L > max(1.0, J) + 1.0:
        raise ConfigurationError(f"truncation radius L={L} must exceed max(1, J) + 1 with J={J}")
    trunc = TruncatedProfile(profile, L, n_nodes)
    floor = 0.5 * profile.far_field_velocity
    if trunc.min_velocity < floor:
        raise ConfigurationError(
            f"truncated velocity drops below u_bar/2 (min {trunc.min_velocity:.6g}); increase L"
        )
    logger.debug(f"Truncated profile at L={L}: m_L={trunc.m_L:.12g}")
    return trunc


def extend_F(trunc: RadialProfile, s: ArrayLike) -> ArrayLike:
    """
    Total extension of Theta_L: quadratic on [-1, 0), constant below -1 and above m_L.
    Continuous with a continuous first derivative.
    """
    x = np.asarray(s, dtype=float)
    m = trunc.total_stream
    t0, t0p = trunc.theta0, trunc.theta0_prime
    inner = np.asarray(trunc.theta(np.clip(x, 0.0, m)), dtype=float)
    value = np.where(x < -1.0, t0 - 0.5 * t0p,
                     np.where(x < 0.0, t0 + t0p * (x + 0.5 * x * x), inner))
    return _result(value, s)


def extend_F_prime(trunc: RadialProfile, s: ArrayLike) -> ArrayLike:
    """Derivative of extend_F."""
    x = np.asarray(s, dtype=float)
    m = trunc.total_stream
    t0p = trunc.theta0_prime
    inner = np.asarray(trunc.theta_prime(np.clip(x, 0.0, m)), dtype=float)
    value = np.where(x < -1.0, 0.0,
                     np.where(x < 0.0, t0p * (1.0 + x), np.where(x > m, 0.0, inner)))
    return _result(value, s)


def bernoulli_extended(trunc: RadialProfile, psi: ArrayLike, gas: GasModel) -> ArrayLike:
    """B_L(psi) = F_L(psi)^2/2 + h(rho_inf), defined for every real psi."""
    F = np.asarray(extend_F(trunc, psi))
    return _result(0.5 * F * F + enthalpy(trunc.rho_inf, gas), psi)


def load_profile_table(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read a two-column (r, u) text table."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"profile table not found: {path}")
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ConfigurationError(f"profile table must have two columns: {path}")
    return data[:, 0], data[:, 1]


def validate(profile: UpstreamProfile, r_max: Optional[float] = None,
             n_samples: int = 1000) -> VerificationReport:
    """
    Sample-based check of the admissibility hypotheses.

    Checks positivity, zero axis slope, monotone decrease, far-field approach to
    u_bar and the structural condition u'' r >= u'.
    """
    if n_samples < 2:
        raise DomainError("validation needs at least two samples")
    r_max = profile.r_max if r_max is None else float(r_max)
    r = np.linspace(0.0, r_max, n_samples)
    u = profile.velocity(r)
    du = profile.slope(r)
    scale = max(float(np.max(np.abs(u))), 1.0)
    tol = 1e-10 * scale
    far_tol = 1e-6 * scale

    structural = profile.curvature(r) * r - du
    far_gap = abs(float(profile.velocity(r_max)) - profile.far_field_velocity)
    axis_slope = abs(float(profile.slope(0.0)))

    checks = [
        CheckResult(name="positivity", passed=bool(np.min(u) > 0.0),
                    margin=float(np.min(u)), tolerance=0.0),
        CheckResult(name="axis_slope", passed=axis_slope <= max(tol, 1e-8 * scale),
                    margin=-axis_slope, tolerance=max(tol, 1e-8 * scale)),
        CheckResult(name="decreasing", passed=bool(np.max(du) <= tol),
                    margin=-float(np.max(du)), tolerance=tol),
        CheckResult(name="far_field", passed=far_gap <= far_tol,
                    margin=far_tol - far_gap, tolerance=far_tol),
        CheckResult(name="structural", passed=bool(np.min(structural) >= -tol),
                    margin=float(np.min(structural)), tolerance=tol),
    ]
    report = VerificationReport(checks=checks)
    if not report.passed:
        logger.warning(f"Upstream profile {profile.kind.value} fails: {report.failures()}")
    return report
