import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

import helpers
from bioctl import planner
from bioctl.kernels import DomainError, HollingI, HollingII, HollingIV
from bioctl.planner import (
    PeriodTooLargeError,
    UncertaintyBox,
    ZParams,
    damage_time,
    deviation_closed_form,
    deviation_envelope,
    envelope_argmax,
    envelope_bound_curve,
    max_decay_period,
    optimal_periods,
    robust_envelope,
    t_limits,
    worst_invasion,
    x_from_z_local,
    z_from_x_global,
    z_from_x_local,
    z_trajectory,
)

REF = ZParams(sigma=1.0, m=1.0, mu=2.0, T=0.8)


def draw_params(rng):
    """One random comparison-model configuration below its decay ceiling."""
    sigma = rng.uniform(0.5, 1.5)
    m = rng.uniform(0.6, 1.6)
    mu = sigma * rng.uniform(1.5, 2.5)
    T = rng.uniform(0.2, 0.8) * max_decay_period(mu, sigma, m)
    return ZParams(sigma=sigma, m=m, mu=mu, T=T)


# --------------------------------------------------------------------------
# changes of variables


@given(x=st.floats(1e-3, 1e3), x_ref=st.floats(1e-3, 10.0),
       m=st.floats(0.1, 4.0), gp0=st.floats(0.1, 4.0))
def test_local_transform_roundtrip(x, x_ref, m, gp0):
    z = z_from_x_local(x, x_ref, m, gp0)
    assert math.isclose(x_from_z_local(z, x_ref, m, gp0), x, rel_tol=1e-12)
    assert (z > 0.0) == (x > x_ref)


def test_global_transform_closed_forms():
    # plain proportional response reduces to the logarithmic coordinate
    assert math.isclose(z_from_x_global(1.0, 0.1, 1.0, HollingI(1.0)),
                        math.log(10.0), rel_tol=1e-12)
    # saturating response adds the linear handling term
    assert math.isclose(z_from_x_global(1.0, 0.1, 1.0, HollingII(1.0, 0.5)),
                        math.log(10.0) + 0.45, rel_tol=1e-12)
    got = z_from_x_global(2.0, 0.5, 1.3, HollingIV(0.8, 0.3, 0.1))
    want, _ = quad(lambda s: 1.3 / (0.8 * s / (1 + 0.3 * s + 0.1 * s * s)),
                   0.5, 2.0, epsrel=1e-12)
    assert math.isclose(got, want, rel_tol=1e-9)


def test_transform_domain_checks():
    with pytest.raises(DomainError):
        z_from_x_local(-1.0, 0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        z_from_x_global(1.0, 0.0, 1.0, HollingI(1.0))


# --------------------------------------------------------------------------
# decay ceiling


def test_decay_ceiling_reference():
    t_hat = max_decay_period(2.0, 1.0, 1.0)
    assert abs(2.0 * t_hat / math.expm1(t_hat) - 1.0) < 1e-12
    lo, hi = helpers.scan_decay_ceiling(2.0, 1.0, 1.0, n=100_000)
    assert lo <= t_hat <= hi


def test_decay_ceiling_edge_cases():
    assert max_decay_period(2.0, 0.0, 1.0) == math.inf
    assert max_decay_period(2.0, -3.0, 1.0) == math.inf
    with pytest.raises(DomainError):
        max_decay_period(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        max_decay_period(2.0, 1.0, 0.0)


@given(sigma=st.floats(0.2, 2.0), ratio=st.floats(1.05, 6.0),
       m=st.floats(0.2, 3.0))
def test_decay_ceiling_separates_floor(sigma, ratio, m):
    mu = sigma * ratio
    t_hat = max_decay_period(mu, sigma, m)
    for eps in (1e-6, 1e-3):
        below, above = t_hat * (1 - eps), t_hat * (1 + eps)
        assert mu * below / math.expm1(m * below) >= sigma / m
        assert mu * above / math.expm1(m * above) < sigma / m


# --------------------------------------------------------------------------
# trajectories and damage times


@given(z0=st.floats(0.2, 6.0), t0_frac=st.floats(0.0, 1.0, exclude_max=True),
       horizon=st.floats(0.01, 4.0), seed=st.integers(0, 10_000))
def test_z_trajectory_matches_quadrature(z0, t0_frac, horizon, seed):
    p = draw_params(np.random.default_rng(seed))
    t0 = t0_frac * p.T
    t = t0 + horizon
    direct = helpers.midpoint_z_value(p.sigma, p.m, p.mu, p.T, z0, t0, t)
    assert math.isclose(z_trajectory(p, z0, t0, t), direct,
                        rel_tol=1e-7, abs_tol=1e-7)


def test_z_trajectory_vector_and_drop():
    ts = np.linspace(0.3, 8.0, 50)
    zs = z_trajectory(REF, 3.0, 0.3, ts)
    assert zs.shape == ts.shape
    assert zs[0] == 3.0
    # one full period later the path has lost exactly the net drop
    one_period = z_trajectory(REF, 3.0, 0.3, 0.3 + REF.T)
    assert math.isclose(3.0 - one_period, REF.net_drop, rel_tol=1e-12)
    with pytest.raises(DomainError):
        z_trajectory(REF, 3.0, 0.5, 0.2)


@given(z0=st.floats(0.05, 8.0), t0_frac=st.floats(0.0, 1.0, exclude_max=True),
       seed=st.integers(0, 10_000))
def test_damage_time_matches_oracle(z0, t0_frac, seed):
    p = draw_params(np.random.default_rng(seed))
    t0 = t0_frac * p.T
    pi = damage_time(p, z0, t0)
    oracle = helpers.oracle_damage_time(p.sigma, p.m, p.mu, p.T, z0, t0,
                                        n_grid=1 << 16)
    assert math.isclose(pi, oracle, rel_tol=5e-6, abs_tol=5e-7)
    # the path is positive up to the crossing and below zero just after
    assert z_trajectory(p, z0, t0, t0 + pi * (1 - 1e-6)) > 0.0
    assert z_trajectory(p, z0, t0, t0 + pi * (1 + 1e-6)) < 0.0


def test_damage_time_validation():
    with pytest.raises(DomainError):
        damage_time(REF, -1.0)
    with pytest.raises(DomainError):
        damage_time(REF, 3.0, t0=0.81)
    big = ZParams(sigma=1.0, m=1.0, mu=2.0, T=1.3)
    with pytest.raises(PeriodTooLargeError):
        damage_time(big, 3.0)


# --------------------------------------------------------------------------
# worst invasion instant


def test_worked_worst_case():
    w = worst_invasion(REF, 3.0)
    assert w.case == "interior"
    assert abs(w.t0_star - 0.1146) < 1e-3
    assert abs(w.pi_max - 3.0854) < 1e-3
    assert abs(damage_time(REF, 3.0, 0.0) - 2.8467) < 1e-3
    assert math.isclose(w.deviation, w.pi_max - w.t1, rel_tol=1e-12)
    assert math.isclose(deviation_closed_form(REF, w.t0_star), w.deviation,
                        rel_tol=1e-9)


def test_resonant_invasions_have_no_deviation():
    for n in range(3, 9):
        T = 3.0 / n
        w = worst_invasion(ZParams(sigma=1.0, m=1.0, mu=2.0, T=T), 3.0)
        assert w.case == "resonant"
        assert w.t0_star == 0.0
        assert abs(w.deviation) < 1e-9
        assert math.isclose(w.pi_max, w.t1, rel_tol=1e-12)


@given(z0=st.floats(0.05, 8.0), seed=st.integers(0, 10_000))
def test_worst_case_dominates_sampled_instants(z0, seed):
    p = draw_params(np.random.default_rng(seed))
    w = worst_invasion(p, z0)
    for frac in (0.0, 0.17, 0.5, 0.83):
        assert damage_time(p, z0, frac * p.T) <= w.pi_max * (1 + 1e-9)
    assert w.pi_max >= w.t1 * (1 - 1e-12)


@given(z0=st.floats(0.05, 8.0), seed=st.integers(0, 10_000))
def test_deviation_below_envelope(z0, seed):
    p = draw_params(np.random.default_rng(seed))
    w = worst_invasion(p, z0)
    bound = p.mu / (p.mu - p.sigma) * deviation_envelope(p.T, p.m)
    assert w.deviation <= bound + 1e-9


def test_worst_invasion_grid_cross_check():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = draw_params(rng)
        z0 = rng.uniform(0.3, 4.5) * p.net_drop
        w = worst_invasion(p, z0)
        grid = helpers.grid_pi_max(p.sigma, p.m, p.mu, p.T, z0,
                                   n_t0=500, n_grid=1 << 16)
        assert grid <= w.pi_max + 1e-6
        assert math.isclose(w.pi_max, grid, rel_tol=5e-4)


# --------------------------------------------------------------------------
# optimal periods


def test_optimal_periods_reference():
    result = optimal_periods(3.0, 2.0, 1.0, 1.0)
    assert result.t1 == 3.0
    assert result.n0 == 2
    assert result.periods[:3] == (1.0, 0.75, 0.6)
    assert len(result.periods) == 8


@given(z0=st.floats(0.1, 20.0), sigma=st.floats(0.2, 2.0),
       ratio=st.floats(1.05, 6.0), m=st.floats(0.2, 3.0))
def test_optimal_periods_straddle_ceiling(z0, sigma, ratio, m):
    mu = sigma * ratio
    result = optimal_periods(z0, mu, sigma, m)
    assert result.t1 / (result.n0 + 1) < result.decay_ceiling
    if result.n0 >= 1:
        assert result.t1 / result.n0 >= result.decay_ceiling
    assert all(T < result.decay_ceiling for T in result.periods)


@given(z0=st.floats(0.1, 20.0), mu=st.floats(0.1, 5.0))
def test_optimal_periods_without_ceiling(z0, mu):
    # nonpositive sigma: any period works, so subdivisions start at 1
    result = optimal_periods(z0, mu, 0.0, 1.0)
    assert result.n0 == 0 and math.isinf(result.decay_ceiling)
    assert result.periods[0] == result.t1


def test_optimal_periods_yield_floor_damage():
    result = optimal_periods(3.0, 2.0, 1.0, 1.0)
    for T in result.periods[:4]:
        w = worst_invasion(ZParams(1.0, 1.0, 2.0, T), 3.0)
        assert abs(w.pi_max - result.t1) < 1e-9


# --------------------------------------------------------------------------
# envelope and robustness


def test_envelope_reference_values():
    assert math.isclose(deviation_envelope(1.0, 1.0), 0.12330156148224453,
                        rel_tol=1e-12)
    assert math.isclose(envelope_argmax(1.0, 1.0), 0.45867514538708193,
                        rel_tol=1e-12)
    assert math.isclose(deviation_envelope(0.8, 1.0), 0.07929884885810967,
                        rel_tol=1e-12)


@given(T=st.floats(1e-4, 4.0), m=st.floats(0.2, 3.0))
def test_envelope_argmax_interior(T, m):
    t_hat0 = envelope_argmax(T, m)
    assert 0.0 < t_hat0 < T


@given(T=st.floats(1e-4, 3.0), m=st.floats(0.2, 3.0),
       bump=st.floats(1e-3, 0.5))
def test_envelope_strictly_increasing(T, m, bump):
    assert deviation_envelope(T + bump, m) > deviation_envelope(T, m)


def test_envelope_vanishes_at_zero():
    assert deviation_envelope(1e-6, 1.0) < 1e-6
    assert deviation_envelope(1e-9, 0.3) < 1e-9


@given(z0_frac=st.floats(0.0, 1.0), seed=st.integers(0, 10_000))
def test_envelope_is_attained_supremum(z0_frac, seed):
    # the worst deviation over a full resonance gap of invasion sizes gets
    # within a grid step of the closed form, never above it
    p = draw_params(np.random.default_rng(seed))
    bound = p.mu / (p.mu - p.sigma) * deviation_envelope(p.T, p.m)
    z0s = (1.0 + np.linspace(0.0, 1.0, 401)) * p.net_drop
    devs = planner._worst_deviation_grid(z0s, p)
    assert devs.max() <= bound + 1e-9
    assert devs.max() >= bound * (1 - 1e-3)


def test_uncertainty_box_validation():
    with pytest.raises(DomainError):
        UncertaintyBox(0.0, 5.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        UncertaintyBox(1.0, 5.0, 2.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        UncertaintyBox(1.0, 5.0, 1.0, 1.0, 1.0, 0.5)
    box = UncertaintyBox(1.0, 5.0, 0.9, 1.1, 0.8, 1.2)
    assert not box.singleton_params
    grid = box.param_grid(5)
    assert len(grid) == 25
    assert (0.9, 0.8) in grid and (1.1, 1.2) in grid


def test_t_limits_reference(reference_box):
    t_lower, t_hat_min = t_limits(reference_box, 2.0)
    t_hat = max_decay_period(2.0, 1.0, 1.0)
    assert math.isclose(t_lower, t_hat, rel_tol=1e-12)
    assert math.isclose(t_hat_min, t_hat, rel_tol=1e-12)


def test_t_limits_narrow_invasion_range():
    # a narrow z0 range cannot span a resonance gap at large periods, so
    # the closed-form region shrinks below the decay ceiling
    box = UncertaintyBox(1.0, 1.5, 1.0, 1.0, 1.0, 1.0)
    t_lower, t_hat_min = t_limits(box, 2.0)
    assert math.isclose(t_lower, 0.25, rel_tol=1e-12)
    assert t_hat_min > t_lower
    with pytest.raises(DomainError):
        t_limits(UncertaintyBox(1.0, 5.0, 1.0, 2.5, 1.0, 1.0), 2.0)


def test_robust_envelope_branches(reference_box):
    # closed-form branch
    direct = robust_envelope(0.8, reference_box, 2.0)
    assert math.isclose(direct, 2.0 * deviation_envelope(0.8, 1.0),
                        rel_tol=1e-12)
    # grid branch just below the ceiling, continuous across the switch
    box = UncertaintyBox(1.0, 1.5, 1.0, 1.0, 1.0, 1.0)
    t_lower, t_hat_min = t_limits(box, 2.0)
    below = robust_envelope(t_lower * 0.999, box, 2.0)
    above = robust_envelope(t_lower * 1.001, box, 2.0)
    assert math.isclose(below, above, rel_tol=5e-2)
    assert above <= 2.0 * deviation_envelope(t_lower * 1.001, 1.0) + 1e-12
    with pytest.raises(PeriodTooLargeError):
        robust_envelope(t_hat_min, box, 2.0)
    with pytest.raises(DomainError):
        robust_envelope(-0.1, box, 2.0)


def test_envelope_bound_curve_monotone(reference_box):
    Ts = np.linspace(0.01, 1.2, 120)
    bounds = envelope_bound_curve(Ts, reference_box, 2.0)
    assert np.all(np.diff(bounds) > 0.0)
    wide = UncertaintyBox(1.0, 5.0, 0.8, 1.2, 0.7, 1.3)
    assert np.all(envelope_bound_curve(Ts, wide, 2.0) >= bounds - 1e-15)
