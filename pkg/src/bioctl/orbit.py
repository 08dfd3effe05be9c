"""Pest-free periodic orbit of a release schedule, and its stability.

With no pests present the predator pool decays exponentially between
releases and jumps by mu*T at every release instant nT.  That sawtooth has
a single globally attracting T-periodic profile with closed-form peak and
floor.  Stability of the full model around (0, y_p) is decided by the two
budget thresholds from :mod:`bioctl.kernels`: mu > s_limit is equivalent
to local asymptotic stability, mu > s_sup is sufficient for global
asymptotic stability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .kernels import DomainError, KernelReport

__all__ = [
    "ReleaseProgram",
    "PestFreeOrbit",
    "Verdict",
    "StabilityAssessment",
    "floquet_multipliers",
    "stability_verdict",
]


@dataclass(frozen=True)
class ReleaseProgram:
    """Periodic impulsive releases: mu*T predators every T time units."""

    mu: float
    T: float

    def __post_init__(self):
        if self.mu <= 0:
            raise DomainError(f"budget rate must be positive, got mu={self.mu}")
        if self.T <= 0:
            raise DomainError(f"release period must be positive, got T={self.T}")

    @property
    def per_release(self) -> float:
        return self.mu * self.T


@dataclass(frozen=True)
class PestFreeOrbit:
    """The T-periodic predator profile when the pest is extinct.

    ``peak`` is the post-release level, ``floor`` the pre-release level one
    period later; peak - floor = mu*T exactly.
    """

    mu: float
    T: float
    m: float

    def __post_init__(self):
        if self.mu <= 0 or self.T <= 0 or self.m <= 0:
            raise DomainError("orbit needs mu > 0, T > 0, m > 0")

    @property
    def peak(self) -> float:
        return self.mu * self.T / -math.expm1(-self.m * self.T)

    @property
    def floor(self) -> float:
        return self.mu * self.T / math.expm1(self.m * self.T)

    @property
    def integral_over_period(self) -> float:
        # int_0^T y_p = mu*T/m: releases balance mortality over a cycle
        return self.mu * self.T / self.m

    def _snap_tol(self, t):
        # n*T computed in floats can sit a few ulps off the exact
        # multiple; treat phases that close to 0 or T as the release
        # instant itself so timestamps coming out of the simulator
        # evaluate consistently
        return 8.0 * np.finfo(float).eps * (np.abs(t) + self.T)

    def eval(self, t: float, post: bool = False) -> float:
        """Orbit value at t >= 0.  At a release instant the pre-release
        value is returned unless post=True asks for the level just after
        the jump."""
        if t < 0:
            raise DomainError("orbit is defined for t >= 0")
        phase = math.fmod(t, self.T)
        tol = self._snap_tol(t)
        if phase < tol or self.T - phase < tol:
            return self.peak if post else self.floor
        return self.peak * math.exp(-self.m * phase)

    def sample(self, ts) -> np.ndarray:
        """Vectorized ``eval`` with the pre-release convention."""
        ts = np.asarray(ts, dtype=float)
        phase = np.mod(ts, self.T)
        tol = self._snap_tol(ts)
        at_release = (phase < tol) | (self.T - phase < tol)
        vals = self.peak * np.exp(-self.m * phase)
        return np.where(at_release, self.floor, vals)


def floquet_multipliers(growth_slope0: float, response_slope0: float, m: float,
                        program: ReleaseProgram):
    """One-period multipliers of the model linearized around (0, y_p).

    Returns (pest multiplier, predator multiplier).  The pest direction
    carries exp(T*(f'(0) - g'(0)*mu/m)) because the orbit integrates to
    mu*T/m over a period; the predator direction always contracts by
    exp(-m*T).
    """
    if m <= 0:
        raise DomainError("m must be positive")
    pest = math.exp(program.T * (growth_slope0 - response_slope0 * program.mu / m))
    predator = math.exp(-m * program.T)
    return pest, predator


class Verdict(enum.Enum):
    GAS = "GAS"
    LAS_ONLY = "LAS_only"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityAssessment:
    verdict: Verdict
    boundary: bool
    pest_multiplier: float
    s_limit: float
    s_sup: float
    note: str


def stability_verdict(report: KernelReport, program: ReleaseProgram) -> StabilityAssessment:
    """Classify the pest-free orbit for a validated kernel set.

    GAS needs mu strictly above s_sup; budgets in (s_limit, s_sup] are
    locally stable but the global question stays open there, so they are
    labeled LAS_only.  A budget sitting exactly on a threshold sets the
    ``boundary`` flag.  Refuses to judge a kernel set whose checks failed.
    """
    if not report.all_ok:
        bad = ", ".join(name for name, ok in report.checks.items() if not ok)
        raise DomainError(f"cannot judge stability, kernel checks failed: {bad}")
    mu = program.mu
    pest_mult, _ = floquet_multipliers(
        report.growth_slope0, report.response_slope0, report.m, program)
    on_limit = math.isclose(mu, report.s_limit, rel_tol=1e-12)
    on_sup = math.isclose(mu, report.s_sup, rel_tol=1e-12)
    boundary = on_limit or on_sup
    if mu > report.s_sup and not on_sup:
        verdict = Verdict.GAS
        note = "pest-free orbit globally asymptotically stable"
    elif mu > report.s_limit and not on_limit:
        verdict = Verdict.LAS_ONLY
        note = "locally asymptotically stable; global stability unknown"
    else:
        verdict = Verdict.UNSTABLE
        note = ("budget exactly on the local threshold: unit multiplier"
                if on_limit else
                "pest-free orbit unstable: budget below the local threshold")
    return StabilityAssessment(verdict, boundary, pest_mult,
                               report.s_limit, report.s_sup, note)
