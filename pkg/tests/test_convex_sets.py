import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backlashcert import convex_sets as cs
from backlashcert.convex_sets import Ball, Ellipsoid
from backlashcert.errors import ConfigError, DomainError

ELL = Ellipsoid([0.0, 0.0], [[4.0, 0.0], [0.0, 1.0]])


def ellipse_boundary(E, count=200_000):
    ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    circle = np.column_stack([np.cos(ang), np.sin(ang)])
    return E.center + circle @ E.sqrt_sigma().T


def random_ellipsoid(rng, dim):
    M = rng.standard_normal((dim, dim))
    return Ellipsoid(rng.standard_normal(dim), M @ M.T + 0.3 * np.eye(dim))


def test_ellipsoid_support_examples():
    assert ELL.support([1.0, 0.0]) == pytest.approx(2.0)
    shifted = Ellipsoid([1.0, 0.0], [[4.0, 0.0], [0.0, 1.0]])
    assert shifted.support([1.0, 0.0]) == pytest.approx(3.0)


def test_ellipsoid_support_matches_boundary_maximum():
    rng = np.random.default_rng(0)
    E = random_ellipsoid(rng, 2)
    pts = ellipse_boundary(E)
    for u in rng.standard_normal((20, 2)):
        assert E.support(u) == pytest.approx(np.max(pts @ u), rel=1e-9)


def test_ellipsoid_projection_examples():
    assert np.allclose(ELL.project([4.0, 0.0]), [2.0, 0.0])
    inside = np.array([0.5, 0.3])
    assert np.array_equal(ELL.project(inside), inside)


def test_ellipsoid_projection_matches_brute_force_grid():
    rng = np.random.default_rng(1)
    E = random_ellipsoid(rng, 2)
    pts = ellipse_boundary(E, 400_000)
    for _ in range(20):
        u = E.center + 4.0 * rng.standard_normal(2)
        if E.contains(u):
            continue
        brute = pts[np.argmin(np.linalg.norm(pts - u, axis=1))]
        assert np.linalg.norm(E.project(u) - brute) <= 1e-4


def test_ball_projection_and_distance():
    B = Ball([1.0, 1.0], 2.0)
    assert np.allclose(B.project([5.0, 1.0]), [3.0, 1.0])
    assert B.signed_distance([5.0, 1.0]) == pytest.approx(2.0)
    assert B.signed_distance([1.0, 1.5]) == pytest.approx(-1.5)


def test_ellipsoid_signed_distance_inside_and_out():
    assert ELL.signed_distance([4.0, 0.0]) == pytest.approx(2.0)
    # nearest boundary point from (1, 0) is at distance sqrt(2/3)
    assert ELL.signed_distance([1.0, 0.0]) == pytest.approx(-np.sqrt(2.0 / 3.0), rel=1e-9)


def test_strong_convexity_constants():
    assert Ball([0.0], 0.2).strong_convexity_constant() == 0.2
    assert ELL.strong_convexity_constant() == pytest.approx(4.0)


@pytest.mark.parametrize("S", [Ball([0.0, 0.0], 1.5), ELL, Ellipsoid([1.0, -1.0, 0.5], np.diag([3.0, 1.0, 0.5]))])
def test_sets_fit_in_balls_of_their_strong_convexity_radius(S):
    R = S.strong_convexity_constant()
    assert cs.ball_inclusion_violation(S, R, count=800) <= 1e-9
    # a smaller radius fails for a non-round ellipsoid
    if isinstance(S, Ellipsoid):
        assert cs.ball_inclusion_violation(S, 0.9 * R, count=800) > 0


def rand_pairs(rng, dim, count, scale=3.0):
    return scale * rng.standard_normal((count, dim)), scale * rng.standard_normal((count, dim))


@pytest.mark.parametrize("S", [Ball([0.3, -0.2], 1.0), ELL, Ellipsoid([0.0, 0.0, 0.0], np.diag([2.0, 1.0, 0.25]))])
def test_projection_is_nonexpansive(S):
    rng = np.random.default_rng(5)
    u, v = rand_pairs(rng, S.dim, 5000)
    lhs = np.linalg.norm(S.project(u) - S.project(v), axis=1)
    assert np.max(lhs - np.linalg.norm(u - v, axis=1)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 4))
def test_projection_is_idempotent_and_feasible(seed, dim):
    rng = np.random.default_rng(seed)
    S = random_ellipsoid(rng, dim)
    u = S.center + 5.0 * rng.standard_normal((20, dim))
    P = S.project(u)
    assert np.all(S.signed_distance(P) <= 1e-9 * (1 + S.diameter()))
    assert np.allclose(S.project(P), P, atol=1e-9)


@pytest.mark.parametrize("S", [Ball([0.0, 0.0], 0.7), ELL, Ellipsoid([0.0, 0.0, 0.0], np.diag([2.0, 1.0, 0.25]))])
def test_normal_inequalities(S):
    report = cs.check_normal_inequalities(S, trials=4000, rng_seed=2)
    assert report.passed, report.witnesses


def test_normal_cone_projection():
    B = Ball([0.0, 0.0], 1.0)
    assert np.allclose(cs.normal_cone_project(B, [1.0, 0.0], [-2.0, 3.0]), [-2.0, 0.0])
    assert np.allclose(cs.normal_cone_project(B, [1.0, 0.0], [2.0, 3.0]), [0.0, 0.0])
    assert np.allclose(cs.normal_cone_project(B, [0.2, 0.0], [-2.0, 3.0]), [0.0, 0.0])
    with pytest.raises(DomainError):
        cs.normal_cone_project(B, [2.0, 0.0], [1.0, 0.0])


def test_diameter_and_deviation():
    assert cs.diameter(ELL) == pytest.approx(4.0)
    assert cs.deviation_from(ELL) == pytest.approx(2.0)
    assert cs.deviation_from(Ball([1.0, 0.0], 1.0)) == pytest.approx(2.0)


def test_diameter_of_minkowski_sum_of_balls():
    s = Ball([0.0, 0.0], 1.0).support_fn() + Ball([3.0, 0.0], 0.5)
    assert cs.diameter(s, refine=True) == pytest.approx(3.0, rel=1e-9)


def test_diameter_brute_force_on_ellipsoid():
    rng = np.random.default_rng(7)
    E = random_ellipsoid(rng, 2)
    pts = ellipse_boundary(E, 3000)
    diffs = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert cs.diameter(E, refine=True) == pytest.approx(np.max(diffs), rel=1e-5)


def test_linear_image_of_support_function():
    M = np.array([[2.0, 0.0]])
    img = ELL.support_fn().linear_image(M)
    assert img([1.0]) == pytest.approx(4.0)


def test_sphere_directions_are_unit():
    for dim in (1, 2, 3, 5):
        U = cs.sphere_directions(dim, 64 if dim > 1 else None)
        assert np.allclose(np.linalg.norm(U, axis=1), 1.0)


def test_from_dict_round_trip_and_errors():
    assert isinstance(cs.from_dict(ELL.to_dict()), Ellipsoid)
    assert cs.from_dict({"type": "ball", "center": [0.0], "radius": 0.2}).radius == 0.2
    with pytest.raises(ConfigError) as err:
        cs.from_dict({"type": "ellipsoid", "center": [0.0]})
    assert err.value.path == "theta.sigma"
    with pytest.raises(ConfigError):
        cs.from_dict({"type": "cube", "center": [0.0]})


def test_invalid_sets_rejected():
    with pytest.raises((DomainError, ValueError)):
        Ellipsoid([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises((DomainError, ValueError)):
        Ball([0.0], -1.0)
