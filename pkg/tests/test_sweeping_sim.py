import numpy as np
import pytest

from backlashcert.convex_sets import Ball, Ellipsoid
from backlashcert.errors import DomainError, IntegrityError
from backlashcert.linear_subsystem import PeriodicInput, PlantModel, forced_response
from backlashcert.sweeping_sim import (SimConfig, admissible_z0, pair_simulate, read_trajectory_csv, simulate,
                                       step)
from conftest import TWO_PI, desk_model

THETA = Ball([0.0], 0.2)


def test_step_at_rest_keeps_z():
    m = PlantModel([[-1.0]], [[0.0]], [[1.0]], [[0.0]])
    x, z = step(m, THETA, lambda t: np.zeros(1), [0.01], [0.0], 0.0, 1e-3)
    assert z[0] == 0.0 and x[0] < 0.01


def test_step_pushed_by_boundary_moves_by_output_increment():
    # x' = w with w = 1: y moves by exactly h; z starts at the trailing edge
    m = PlantModel([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    h = 0.01
    x, z = step(m, THETA, lambda t: np.ones(1), [0.0], [-0.2], 0.0, h)
    assert x[0] == pytest.approx(h)
    assert z[0] == pytest.approx(-0.2 + h)


def test_step_rejects_broken_membership():
    m = desk_model()
    with pytest.raises(IntegrityError):
        step(m, THETA, lambda t: np.zeros(1), [0.0, 0.0], [1.0], 0.0, 1e-3)


def test_open_loop_matches_forced_response():
    m = PlantModel([[0.0, 1.0], [-2.0, -3.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0], [0.0]])
    inp = PeriodicInput.sine(1.0, 1.0)
    tr = simulate(m, THETA, inp, SimConfig(x0=[0.5, 0.0], steps_per_period=1000, periods=5))
    ref = forced_response(m, inp, [0.5, 0.0], tr.t)
    assert np.max(np.abs(tr.x - ref)) <= 1e-6


def test_free_decay_freezes_backlash():
    m = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    # q = z - y starts inside Theta and y decays toward z, so z never moves
    tr = simulate(m, THETA, PeriodicInput.constant(0.0, 1.0),
                  SimConfig(x0=[0.1], z0=[0.0], steps_per_period=256, periods=20))
    assert abs(tr.x[-1, 0]) < 1e-8
    assert tr.path_length() == 0.0


def test_free_decay_drags_backlash_to_the_edge():
    m = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    tr = simulate(m, THETA, PeriodicInput.constant(0.0, 1.0), SimConfig(x0=[1.0], steps_per_period=256, periods=20))
    assert tr.z[-1, 0] == pytest.approx(0.2, abs=1e-8)


def test_invariants_on_desk(desk):
    m, theta, inp = desk
    tr = simulate(m, theta, inp, SimConfig(x0=[0.0, 0.0], steps_per_period=1024, periods=5))
    assert tr.max_excess <= 1e-9
    assert np.max(tr.dz_norm - tr.dy_norm) <= 1e-12
    assert tr.period_path_lengths().shape == (5,)


def test_invariants_with_ellipsoidal_backlash():
    m = PlantModel([[-1.0, 0.5], [0.0, -2.0]], np.eye(2), np.eye(2), -0.1 * np.eye(2))
    inp = PeriodicInput(TWO_PI, [0.0, 0.0], sin=[[3.0, 1.0]], cos=[[0.0, 2.0]])
    theta = Ellipsoid([0.0, 0.0], [[0.09, 0.02], [0.02, 0.04]])
    tr = simulate(m, theta, inp, SimConfig(x0=[0.0, 0.0], steps_per_period=512, periods=4))
    assert tr.max_excess <= 1e-9
    assert np.max(tr.dz_norm - tr.dy_norm) <= 1e-12


def test_step_halving_contraction(desk):
    m, theta, inp = desk
    runs = [simulate(m, theta, inp, SimConfig(x0=[0.0, 0.0], steps_per_period=n, periods=2)) for n in (512, 1024, 2048)]
    coarse = np.max(np.abs(runs[0].z[:, 0] - runs[1].z[::2, 0]))
    fine = np.max(np.abs(runs[1].z[:, 0] - runs[2].z[::2, 0]))
    assert coarse / fine >= 1.8


def test_z0_admissibility():
    m = desk_model()
    cfg = SimConfig(x0=[1.0, 0.0], z0=[2.0])
    with pytest.raises(DomainError):
        admissible_z0(m, THETA, cfg)
    cfg = SimConfig(x0=[1.0, 0.0], z0=[2.0], z0_mode="project")
    assert admissible_z0(m, THETA, cfg)[0] == pytest.approx(1.2)
    assert admissible_z0(m, THETA, SimConfig(x0=[1.0, 0.0]))[0] == pytest.approx(1.0)


def test_sim_config_validation():
    with pytest.raises(DomainError):
        SimConfig(x0=[0.0], steps_per_period=0)
    with pytest.raises(DomainError):
        SimConfig(x0=[0.0], z0_mode="snap")


def test_oversized_step_raises_integrity_error():
    m = PlantModel([[-30.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(IntegrityError):
        simulate(m, THETA, PeriodicInput.sine(1.0, 1.0), SimConfig(x0=[1.0], steps_per_period=4, periods=200))


def test_trajectory_csv_round_trip(tmp_path, desk):
    m, theta, inp = desk
    tr = simulate(m, theta, inp, SimConfig(x0=[0.1, 0.0], steps_per_period=64, periods=1))
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    cols = read_trajectory_csv(path)
    assert list(cols) == ["t", "x0", "x1", "y0", "z0", "q0", "dz_norm", "dy_norm"]
    assert np.array_equal(cols["x1"], tr.x[:, 1])
    assert np.array_equal(cols["dz_norm"], tr.dz_norm)


def test_pair_with_identical_initial_conditions_has_zero_V(desk):
    m, theta, inp = desk
    cfg = SimConfig(x0=[0.3, 0.0], steps_per_period=256, periods=2)
    pair = pair_simulate(m, theta, inp, cfg, cfg, np.eye(2))
    assert np.all(pair.V == 0.0)


def test_pair_without_coupling_decays_like_the_plant():
    m = PlantModel([[-1.0, 0.0], [0.0, -2.0]], [[1.0], [1.0]], [[1.0, 0.0]], [[0.0], [0.0]])
    inp = PeriodicInput.sine(1.0, 1.0)
    cfg1 = SimConfig(x0=[1.0, 0.0], steps_per_period=256, periods=10)
    cfg2 = SimConfig(x0=[0.0, 0.0], steps_per_period=256, periods=10)
    pair = pair_simulate(m, Ball([0.0], 10.0), inp, cfg1, cfg2, np.eye(2))
    # X(t) = (e^{-t}, 0) and the backlash never moves
    assert np.allclose(pair.X[:, 0], np.exp(-pair.t), atol=1e-9)
    slope = np.polyfit(pair.t[100:], 0.5 * np.log(pair.V[100:] - np.sum(pair.Q[100:] ** 2, axis=1)), 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-6)


def test_pair_requires_matching_grids(desk):
    m, theta, inp = desk
    with pytest.raises(DomainError):
        pair_simulate(m, theta, inp, SimConfig(x0=[0.0, 0.0], steps_per_period=64),
                      SimConfig(x0=[0.0, 0.0], steps_per_period=128), np.eye(2))
