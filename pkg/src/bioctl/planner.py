"""Damage-time planning through the scalar comparison model.

Both changes of variables used in the analysis (logarithmic for the local
problem, consumption-integral for the global bound) collapse the pest
equation onto the same scalar form

    dz/dt = sigma - m * y_p(t)

with y_p the pest-free predator orbit and sigma one of the two budget
thresholds from :mod:`bioctl.kernels`.  z is a transformed pest excess
over the economic injury level x_ref: z = 0 means x = x_ref, and an
invasion of transformed size z0 > 0 at time t0 is cleared at the first
root of z(t).  The damage time is Pi = t_f - t0.

What the module provides:

* ``max_decay_period``: the period ceiling below which z strictly
  decreases, whatever the invasion instant;
* ``z_trajectory`` / ``damage_time``: exact piecewise-analytic evaluation
  of z and of Pi for a given invasion instant;
* ``worst_invasion``: the invasion instant in [0, T) maximizing Pi, with
  its resonant/interior case split;
* ``optimal_periods``: the periods T1/n whose worst case collapses to the
  theoretical floor T1 = z0/(mu - sigma);
* ``deviation_envelope`` / ``robust_envelope``: the closed-form worst
  deviation Pi_max - T1 over invasion sizes and over rectangular
  parameter uncertainty.

Every damage-time routine assumes the release budget clears the relevant
threshold (mu > sigma) and, where marked, that the period stays below
``max_decay_period``; violations raise :class:`PeriodTooLargeError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .kernels import DomainError, HollingI, HollingII, HollingIV

__all__ = [
    "PeriodTooLargeError",
    "ZParams",
    "WorstCaseReport",
    "OptimalPeriods",
    "UncertaintyBox",
    "z_from_x_local",
    "x_from_z_local",
    "z_from_x_global",
    "max_decay_period",
    "z_trajectory",
    "damage_time",
    "worst_invasion",
    "deviation_closed_form",
    "optimal_periods",
    "envelope_argmax",
    "deviation_envelope",
    "t_limits",
    "envelope_bound_curve",
    "robust_envelope",
]

#: relative slack under which z0 counts as an exact multiple of the
#: per-period drop; exact resonance has measure zero in floating point and
#: near-misses fall through to the interior case continuously
RESONANCE_RTOL = 1e-12


class PeriodTooLargeError(ValueError):
    """Release period is at or above the ceiling guaranteeing decrease."""


@dataclass(frozen=True)
class ZParams:
    """Parameters of the comparison model dz/dt = sigma - m*y_p(t)."""

    sigma: float
    m: float
    mu: float
    T: float

    def __post_init__(self):
        if self.m <= 0:
            raise DomainError(f"m must be positive, got {self.m}")
        if self.T <= 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if self.mu <= self.sigma:
            raise DomainError(
                f"budget rate must exceed sigma, got mu={self.mu} <= sigma={self.sigma}")

    @property
    def pulse_peak(self) -> float:
        # post-release level of the pest-free orbit
        return self.mu * self.T / -math.expm1(-self.m * self.T)

    @property
    def net_drop(self) -> float:
        # z loses exactly this much over any full release period
        return (self.mu - self.sigma) * self.T


# --------------------------------------------------------------------------
# changes of variables


def z_from_x_local(x: float, x_ref: float, m: float, response_slope0: float) -> float:
    """Logarithmic pest coordinate (m / g'(0)) * ln(x / x_ref)."""
    if x <= 0 or x_ref <= 0:
        raise DomainError("densities must be positive")
    return m / response_slope0 * math.log(x / x_ref)


def x_from_z_local(z: float, x_ref: float, m: float, response_slope0: float) -> float:
    """Inverse of :func:`z_from_x_local`."""
    if x_ref <= 0:
        raise DomainError("reference density must be positive")
    return x_ref * math.exp(z * response_slope0 / m)


def z_from_x_global(x: float, x_ref: float, m: float, response) -> float:
    """Consumption-integral coordinate m * int_{x_ref}^{x} ds / g(s).

    Closed forms for the Holling families; adaptive quadrature for
    anything else exposing ``rate``.
    """
    if x <= 0 or x_ref <= 0:
        raise DomainError("densities must be positive")
    if isinstance(response, HollingI):
        return m / response.lam * math.log(x / x_ref)
    if isinstance(response, HollingII):
        return m / response.lam * (math.log(x / x_ref) + response.a * (x - x_ref))
    if isinstance(response, HollingIV):
        return m / response.lam * (math.log(x / x_ref)
                                   + response.a * (x - x_ref)
                                   + response.b * (x * x - x_ref * x_ref) / 2.0)
    val, _ = quad(lambda s: 1.0 / response.rate(s), x_ref, x, epsrel=1e-10)
    return m * val


# --------------------------------------------------------------------------
# the decrease ceiling


def max_decay_period(mu: float, sigma: float, m: float, tol: float = 1e-12) -> float:
    """Largest period below which z(t) is strictly decreasing.

    Unique root of mu*T / (e^{mT} - 1) = sigma/m: there the orbit floor
    touches sigma/m.  For sigma <= 0 the pest declines under any period;
    returns inf.
    """
    if m <= 0:
        raise DomainError("m must be positive")
    if sigma <= 0:
        return math.inf
    if mu <= sigma:
        raise DomainError("mu must exceed sigma")

    def residual(T):
        return mu * T / math.expm1(m * T) - sigma / m

    lo, hi = 1e-12, 1.0  # residual(0+) = (mu - sigma)/m > 0
    for _ in range(200):
        if residual(hi) < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise DomainError("failed to bracket the decay-period root")
    mid = 0.5 * (lo + hi)
    for _ in range(256):
        mid = 0.5 * (lo + hi)
        res = residual(mid)
        if abs(res) < tol:
            break
        if res > 0.0:
            lo = mid
        else:
            hi = mid
    return mid


# --------------------------------------------------------------------------
# trajectories and damage times


def _cum_orbit(p: ZParams, t):
    """int_0^t y_p(s) ds, vectorized; continuous across release instants."""
    k = np.floor(np.asarray(t, dtype=float) / p.T)
    phase = t - k * p.T
    return (k * p.mu * p.T - p.pulse_peak * np.expm1(-p.m * phase)) / p.m


def z_trajectory(p: ZParams, z0: float, t0: float, t):
    """Exact piecewise-analytic z(t) for scalar or array t >= t0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < t0):
        raise DomainError("t must not precede t0")
    out = z0 + p.sigma * (t - t0) - p.m * (_cum_orbit(p, t) - _cum_orbit(p, t0))
    return out if out.shape else float(out)


def damage_time(p: ZParams, z0: float, t0: float = 0.0,
                check_period: bool = True) -> float:
    """Time for z to reach zero after an invasion of size z0 at t0 in [0, T).

    z drops by exactly ``net_drop`` over every full period, so the
    crossing segment is located arithmetically and the root bisected
    there to 1e-12 relative width.
    """
    if z0 <= 0:
        raise DomainError("z0 must be positive")
    if not 0.0 <= t0 < p.T:
        raise DomainError("t0 must lie in [0, T)")
    if check_period and p.T >= max_decay_period(p.mu, p.sigma, p.m):
        raise PeriodTooLargeError(
            "period at or above max_decay_period: z need not decrease")
    z_b1 = float(z_trajectory(p, z0, t0, p.T))
    if z_b1 <= 0.0:
        lo, hi = t0, p.T
    else:
        n = math.ceil(z_b1 / p.net_drop)
        while n > 1 and z_b1 - (n - 1) * p.net_drop <= 0.0:
            n -= 1
        while z_b1 - (n - 1) * p.net_drop > p.net_drop:
            n += 1
        lo, hi = n * p.T, (n + 1) * p.T
        if float(z_trajectory(p, z0, t0, lo)) <= 0.0:
            return lo - t0  # crossing exactly at the segment start
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(z_trajectory(p, z0, t0, mid)) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi) - t0


# --------------------------------------------------------------------------
# worst invasion instant


@dataclass(frozen=True)
class WorstCaseReport:
    """Worst invasion instant and the resulting damage time.

    ``case`` is "resonant" when z0 is an integer multiple of the
    per-period drop (every t0 is equally bad and Pi = t1 exactly) and
    "interior" otherwise (unique worst t0 strictly inside [0, T)).
    """

    case: str
    k: int
    t0_star: float
    pi_max: float
    t1: float
    deviation: float


def worst_invasion(p: ZParams, z0: float) -> WorstCaseReport:
    """Maximize the damage time over the invasion instant t0 in [0, T).

    In the interior case the worst instant is the unique root of the
    strictly increasing crossing condition phi(t0) below, bisected to
    1e-12 * T; phi(0) and phi(T) bracket zero by construction.
    """
    if z0 <= 0:
        raise DomainError("z0 must be positive")
    if p.T >= max_decay_period(p.mu, p.sigma, p.m):
        raise PeriodTooLargeError(
            "period at or above max_decay_period: worst case undefined")
    t1 = z0 / (p.mu - p.sigma)
    rho = z0 / p.net_drop
    k_near = round(rho)
    if k_near >= 1 and abs(rho - k_near) <= RESONANCE_RTOL * max(1.0, rho):
        pi = k_near * p.T
        return WorstCaseReport("resonant", int(k_near), 0.0, pi, t1, pi - t1)
    k = math.ceil(rho) - 1
    denom = -math.expm1(-p.m * p.T)
    horizon = (k + 1) * p.T

    def phi(t0):
        # z hits zero exactly at (k+1)*T when the invasion happens at the
        # root of this function; phi(0) = (rho-k-1)*net_drop < 0 and
        # phi(T) = (rho-k)*net_drop > 0
        return (z0 + p.sigma * (horizon - t0) - (k + 1) * p.mu * p.T
                + p.mu * p.T * -math.expm1(-p.m * t0) / denom)

    lo, hi = 0.0, p.T
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * p.T:
            break
    t0_star = 0.5 * (lo + hi)
    pi = horizon - t0_star
    return WorstCaseReport("interior", int(k), t0_star, pi, t1, pi - t1)


def deviation_closed_form(p: ZParams, t0_star: float) -> float:
    """Closed-form pi_max - t1 at the interior worst instant t0_star."""
    denom = -math.expm1(-p.m * p.T)
    gain = p.mu / (p.mu - p.sigma)
    return gain * (-math.expm1(-p.m * t0_star) / denom * p.T - t0_star)


# --------------------------------------------------------------------------
# optimal periods


@dataclass(frozen=True)
class OptimalPeriods:
    """Periods T1/n achieving the worst-case floor t1 = z0/(mu - sigma).

    Subdivisions up to n0 are at or above the decay ceiling and invalid;
    ``periods`` lists T1/n for n = n0+1 .. n_max.
    """

    t1: float
    n0: int
    periods: tuple
    decay_ceiling: float


def optimal_periods(z0: float, mu: float, sigma: float, m: float,
                    n_max: int = 10) -> OptimalPeriods:
    if z0 <= 0:
        raise DomainError("z0 must be positive")
    if mu <= sigma:
        raise DomainError("mu must exceed sigma")
    t1 = z0 / (mu - sigma)
    ceiling = max_decay_period(mu, sigma, m)
    if math.isinf(ceiling):
        n0 = 0
    else:
        n0 = int(t1 / ceiling)
        # guard the integer against float drift at exact quotients
        while n0 >= 1 and t1 / n0 < ceiling:
            n0 -= 1
        while t1 / (n0 + 1) >= ceiling:
            n0 += 1
    periods = tuple(t1 / n for n in range(n0 + 1, n_max + 1))
    return OptimalPeriods(t1, n0, periods, ceiling)


# --------------------------------------------------------------------------
# worst-deviation envelope over uncertainty


def envelope_argmax(T, m):
    """Invasion instant at which the worst deviation over invasion sizes
    is reached; always strictly inside (0, T)."""
    u = m * np.asarray(T, dtype=float) / -np.expm1(-m * np.asarray(T, dtype=float))
    out = np.log(u) / m
    return out if out.shape else float(out)


def deviation_envelope(T, m):
    """Worst deviation over all invasion sizes, per unit of budget gain.

    The worst pi_max - t1 over z0 equals mu/(mu - sigma) times this
    factor.  Strictly increasing in T and vanishing as T -> 0+.
    """
    T = np.asarray(T, dtype=float)
    u = m * T / -np.expm1(-m * T)
    out = (u - 1.0 - np.log(u)) / m
    return out if out.shape else float(out)


@dataclass(frozen=True)
class UncertaintyBox:
    """Rectangular uncertainty on invasion size (z0) and parameters (sigma, m)."""

    z0_lo: float
    z0_hi: float
    sigma_lo: float
    sigma_hi: float
    m_lo: float
    m_hi: float

    def __post_init__(self):
        if not 0.0 < self.z0_lo <= self.z0_hi:
            raise DomainError("need 0 < z0_lo <= z0_hi")
        if self.sigma_lo > self.sigma_hi:
            raise DomainError("need sigma_lo <= sigma_hi")
        if not 0.0 < self.m_lo <= self.m_hi:
            raise DomainError("need 0 < m_lo <= m_hi")

    @property
    def singleton_params(self) -> bool:
        return self.sigma_lo == self.sigma_hi and self.m_lo == self.m_hi

    def param_grid(self, n: int = 33):
        """(sigma, m) pairs on a dense grid containing all box corners."""
        sig = np.linspace(self.sigma_lo, self.sigma_hi,
                          1 if self.sigma_lo == self.sigma_hi else n)
        ms = np.linspace(self.m_lo, self.m_hi,
                         1 if self.m_lo == self.m_hi else n)
        return [(float(s), float(mm)) for s in sig for mm in ms]


def t_limits(box: UncertaintyBox, mu: float, n_param: int = 33):
    """(T_L, T_hat_min) over the box.

    T_L is the ceiling below which the closed-form envelope is the exact
    worst deviation over the whole box: per parameter point it is the
    smaller of the decay ceiling and the half-width of the z0 box scaled
    by the per-time drop (the invasion-size sweep must span a full
    resonance gap).  T_hat_min is the plain decrease ceiling minimized
    over the box.
    """
    if mu <= box.sigma_hi:
        raise DomainError("mu must exceed sigma over the whole box")
    half_gap = 0.5 * (box.z0_hi - box.z0_lo)
    t_big = math.inf
    t_hat_min = math.inf
    for sig, mm in box.param_grid(n_param):
        t_hat = max_decay_period(mu, sig, mm)
        t_hat_min = min(t_hat_min, t_hat)
        t_big = min(t_big, min(t_hat, half_gap / (mu - sig)))
    return t_big, t_hat_min


def envelope_bound_curve(Ts, box: UncertaintyBox, mu: float, n_param: int = 33):
    """Closed-form deviation bound maxed over the parameter box, per period.

    Exact worst deviation only below T_L; callers gate the validity range.
    """
    Ts = np.asarray(Ts, dtype=float)
    best = np.full(Ts.shape, -np.inf)
    for sig, mm in box.param_grid(n_param):
        np.maximum(best, mu / (mu - sig) * deviation_envelope(Ts, mm), out=best)
    return best


def _worst_deviation_grid(z0s, p: ZParams):
    """Vectorized worst-case deviation for an array of invasion sizes."""
    z0s = np.asarray(z0s, dtype=float)
    rho = z0s / p.net_drop
    k_near = np.round(rho)
    resonant = (k_near >= 1) & (np.abs(rho - k_near) <= RESONANCE_RTOL * np.maximum(1.0, rho))
    k = np.ceil(rho) - 1.0
    denom = -math.expm1(-p.m * p.T)
    horizon = (k + 1.0) * p.T
    lo = np.zeros_like(z0s)
    hi = np.full_like(z0s, p.T)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        phi = (z0s + p.sigma * (horizon - mid) - (k + 1.0) * p.mu * p.T
               + p.mu * p.T * -np.expm1(-p.m * mid) / denom)
        neg = phi < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    pi = horizon - 0.5 * (lo + hi)
    t1 = z0s / (p.mu - p.sigma)
    return np.where(resonant, 0.0, pi - t1)


def robust_envelope(T: float, box: UncertaintyBox, mu: float,
                    n_param: int = 33, n_z0: int = 201) -> float:
    """Worst deviation pi_max - t1 over the whole uncertainty box at period T.

    Below T_L the closed form is exact; between T_L and the box-wide
    decrease ceiling the maximum is taken on a dense (z0, parameter)
    grid; at or beyond the ceiling the worst case is undefined.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    t_big, t_hat_min = t_limits(box, mu, n_param)
    if T >= t_hat_min:
        raise PeriodTooLargeError(
            "period at or above the box-wide decrease ceiling")
    if T < t_big:
        return float(envelope_bound_curve(np.asarray([T]), box, mu, n_param)[0])
    z0s = np.linspace(box.z0_lo, box.z0_hi, n_z0)
    best = 0.0
    for sig, mm in box.param_grid(n_param):
        p = ZParams(sig, mm, mu, T)
        best = max(best, float(_worst_deviation_grid(z0s, p).max()))
    return best
