import numpy as np
import pytest

from backlashcert.convex_sets import Ball, Ellipsoid, sphere_directions
from backlashcert.errors import DomainError, HypothesisError
from backlashcert.linear_subsystem import PeriodicInput, PlantModel, forced_response, linearised_response, phi_matrix
from backlashcert.localization import (TubeCrossSection, deviation_decay, stationary_emptiness,
                                       stationary_membership, tube_check, tube_support)
from backlashcert.sweeping_sim import SimConfig, simulate
from conftest import TWO_PI, desk_model

# scalar loop: F = A + EC = -0.5, Theta = [-0.3, 0.3]
SCALAR = PlantModel([[-1.0]], [[1.0]], [[0.5]], [[1.0]])
RHO = 0.3


def test_scalar_limit_tube_closed_form():
    tube = TubeCrossSection(SCALAR, Ball([0.0], RHO))
    assert tube.support([1.0]) == pytest.approx(RHO / 0.5, rel=1e-8)
    assert tube.support([-2.0]) == pytest.approx(2 * RHO / 0.5, rel=1e-8)
    assert tube.tail_bound <= 1e-8 * (1 + 1e-12)


def test_scalar_finite_time_tube():
    tube = TubeCrossSection(SCALAR, Ball([0.0], RHO))
    t = np.array([0.0, 0.37, 1.0, 4.2])
    vals = tube.support_many([[1.0]], t)[:, 0]
    assert np.allclose(vals, RHO * (1 - np.exp(-0.5 * t)) / 0.5, rtol=1e-12, atol=1e-15)


def test_tube_support_one_off():
    assert tube_support(SCALAR, Ball([0.0], RHO), np.inf, [1.0]) == pytest.approx(0.6, rel=1e-8)
    assert tube_support(SCALAR, Ball([0.0], RHO), 0.0, [1.0]) == 0.0


def test_limit_tube_requires_hurwitz():
    unstable = PlantModel([[1.0]], [[1.0]], [[1.0]], [[0.5]])
    with pytest.raises(DomainError):
        tube_support(unstable, Ball([0.0], RHO), np.inf, [1.0])
    # finite horizons stay available
    assert tube_support(unstable, Ball([0.0], RHO), 1.0, [1.0]) > 0


def test_tube_needs_origin_in_theta():
    with pytest.raises(HypothesisError):
        TubeCrossSection(SCALAR, Ball([1.0], RHO))


def test_zero_coupling_gives_trivial_tube():
    m = PlantModel([[-1.0, 0.0], [0.0, -2.0]], np.eye(2), np.eye(2), np.zeros((2, 2)))
    tube = TubeCrossSection(m, Ball([0.0, 0.0], 0.5))
    assert np.all(tube.support_many(sphere_directions(2, 16), [0.0, 1.0, np.inf]) == 0.0)


def test_tube_monotone_and_nonnegative():
    m = PlantModel([[-1.0, 0.5], [0.0, -2.0]], np.eye(2), np.eye(2), -0.3 * np.eye(2))
    tube = TubeCrossSection(m, Ellipsoid([0.05, 0.0], [[0.04, 0.01], [0.01, 0.02]]))
    U = sphere_directions(2, 128)
    vals = tube.support_many(U, [0.0, 0.1, 0.5, 1.0, 3.0, np.inf])
    assert np.all(vals >= 0.0)
    assert np.all(np.diff(vals, axis=0) >= -1e-14)


def test_output_spread_and_velocity_deviation_scalar():
    tube = TubeCrossSection(SCALAR, Ball([0.0], RHO))
    # C Xi_inf + Theta = 0.5 [-0.6, 0.6] + [-0.3, 0.3]
    assert tube.output_spread() == pytest.approx(1.2, rel=1e-8)
    # C (F Xi_inf + E Theta) = 0.5 (0.5 [-0.6, 0.6] + [-0.3, 0.3])
    assert tube.velocity_deviation() == pytest.approx(0.3, rel=1e-8)


def test_deviation_decay_scalar_slope():
    tube = TubeCrossSection(SCALAR, Ball([0.0], RHO))
    t = np.linspace(0.5, 10.0, 20)
    report = deviation_decay(tube, t)
    assert np.allclose(report.gaps, 0.6 * np.exp(-0.5 * t), rtol=1e-6, atol=2e-8)
    assert report.slope == pytest.approx(-0.5, abs=1e-3)
    assert report.passed


def test_tube_check_trivial_without_coupling():
    m = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    inp = PeriodicInput.sine(1.0, 1.0)
    tr = simulate(m, Ball([0.0], 0.2), inp, SimConfig(x0=[0.5], steps_per_period=256, periods=2))
    xi = linearised_response(m, inp, tr.x[0], tr.t)
    report = tube_check(TubeCrossSection(m, Ball([0.0], 0.2), horizon=2.0), tr, xi, np.arange(0, tr.steps + 1, 16))
    assert report.passed and report.max_violation <= 1e-9


def test_tube_violation_shrinks_with_step(desk):
    m, theta, inp = desk
    tube = TubeCrossSection(m, theta)
    worst = []
    for n in (1024, 4096):
        tr = simulate(m, theta, inp, SimConfig(x0=[0.0, 0.0], steps_per_period=n, periods=3))
        idx = np.linspace(0, tr.steps, 128).astype(int)
        xi = linearised_response(m, inp, tr.x[0], tr.t[idx])
        worst.append(tube_check(tube, tr, xi, idx, sphere_directions(2, 512)).max_violation)
    assert worst[1] <= worst[0] / 3.0


# stationary backlash states ---------------------------------------------------


def interval_oracle(model, inp, x0, T, r, steps=4096):
    """R(T) for p = 1 as an explicit interval intersection."""
    grid = np.linspace(0.0, T, steps + 1)
    cx = (forced_response(model, inp, x0, grid) @ model.C.T)[:, 0]
    phi = np.array([phi_matrix(model, t)[0][0, 0] for t in grid])
    lo = np.max((cx - r) / phi)
    hi = np.min((cx + r) / phi)
    return lo, hi


@pytest.mark.parametrize("amp,expect_empty", [(0.3, False), (10.0, True)])
def test_emptiness_matches_interval_oracle(amp, expect_empty):
    m = desk_model()
    inp = PeriodicInput.sine(amp, TWO_PI)
    lo, hi = interval_oracle(m, inp, [0.0, 0.0], TWO_PI, 0.2)
    assert (lo > hi) == expect_empty
    res = stationary_emptiness(m, Ball([0.0], 0.2), inp, [0.0, 0.0], TWO_PI, steps=1024)
    assert res.empty == expect_empty
    if not expect_empty:
        assert lo - 1e-6 <= res.witness[0] <= hi + 1e-6


def test_membership_agrees_with_interval_oracle():
    m = desk_model()
    inp = PeriodicInput.sine(0.3, TWO_PI)
    lo, hi = interval_oracle(m, inp, [0.0, 0.0], TWO_PI, 0.2)
    for z in np.linspace(-0.2, 0.2, 17):
        if min(abs(z - lo), abs(z - hi)) < 1e-3:
            continue
        verdict = stationary_membership(m, Ball([0.0], 0.2), inp, [0.0, 0.0], [z], TWO_PI, steps=1024)
        assert verdict.member == (lo <= z <= hi)


def test_membership_without_coupling_is_direct_intersection():
    m = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    inp = PeriodicInput.sine(0.1, TWO_PI)
    grid = np.linspace(0.0, TWO_PI, 513)
    y = forced_response(m, inp, [0.0], grid)[:, 0]
    lo, hi = np.max(y) - 0.2, np.min(y) + 0.2
    assert stationary_membership(m, Ball([0.0], 0.2), inp, [0.0], [0.5 * (lo + hi)], TWO_PI).member
    assert not stationary_membership(m, Ball([0.0], 0.2), inp, [0.0], [hi + 0.01], TWO_PI).member


def test_short_horizon_reduces_to_initial_admissibility():
    m = desk_model()
    inp = PeriodicInput.sine(10.0, TWO_PI)
    assert stationary_membership(m, Ball([0.0], 0.2), inp, [1.0, 0.0], [1.15], 1e-9, steps=4).member
    assert not stationary_membership(m, Ball([0.0], 0.2), inp, [1.0, 0.0], [1.25], 1e-9, steps=4).member


def test_equilibrium_witness_without_input():
    m = desk_model()
    zbar = 0.1
    xbar = -np.linalg.solve(m.A, m.E[:, 0] * zbar)
    inp = PeriodicInput.constant(0.0, TWO_PI)
    theta = Ball([0.0], 0.2)
    assert stationary_membership(m, theta, inp, xbar, [zbar], TWO_PI).member
    res = stationary_emptiness(m, theta, inp, xbar, TWO_PI)
    assert not res.empty
    assert stationary_membership(m, theta, inp, xbar, res.witness, TWO_PI).member


def test_membership_is_nested_in_the_horizon(desk_small):
    m, theta, inp = desk_small
    rng = np.random.default_rng(3)
    for z in rng.uniform(-0.2, 0.2, 10):
        if stationary_membership(m, theta, inp, [0.0, 0.0], [z], TWO_PI).member:
            for T in (0.5, 2.0, 4.0):
                assert stationary_membership(m, theta, inp, [0.0, 0.0], [z], T).member


def test_singular_phi_is_a_hypothesis_violation():
    m = PlantModel([[0.0]], [[1.0]], [[1.0]], [[1.0]])  # Phi(t) = 1 - t
    with pytest.raises(HypothesisError, match="t = 1"):
        stationary_membership(m, Ball([0.0], 0.2), PeriodicInput.constant(0.0, 2.0), [0.0], [0.0], 2.0, steps=200)
