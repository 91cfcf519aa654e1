import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from dpdonc.geometry import (
    ConstraintSet,
    box,
    contains,
    diameter,
    l1_ball,
    l2_ball,
    linear_minimizer,
    project_euclidean,
    simplex,
)

SETS = {
    "box": box([-1.0, 0.0, -2.0], [1.0, 0.5, 3.0]),
    "l1_ball": l1_ball(3.0, 3),
    "l2_ball": l2_ball(1.5, 3, center=[0.5, -0.5, 1.0]),
    "simplex": simplex(3),
}

finite = st.floats(-50, 50, allow_nan=False)


def test_contains_examples():
    assert contains(l1_ball(3, 2), [1, -1])
    assert contains(simplex(3), [1 / 3, 1 / 3, 1 / 3])
    assert not contains(l1_ball(3, 2), [2, 2])


def test_contains_tolerance_band():
    assert contains(l1_ball(3, 2), [3 + 5e-10, 0])
    assert not contains(l1_ball(3, 2), [3 + 1e-8, 0])


def test_project_examples():
    np.testing.assert_array_equal(project_euclidean(box([0, 0], [1, 1]), [2, 0.5]), [1, 0.5])
    np.testing.assert_allclose(project_euclidean(l1_ball(3, 2), [4, 0]), [3, 0], atol=1e-15)


def simplex_projection_oracle(y, step=0.005):
    """Coarse grid search over the simplex followed by a local SLSQP refinement."""
    g = np.arange(0, 1 + step / 2, step)
    a, b = np.meshgrid(g, g, indexing="ij")
    mask = a + b <= 1 + 1e-12
    pts = np.stack([a[mask], b[mask], 1 - a[mask] - b[mask]], axis=1)
    start = pts[np.argmin(((pts - y) ** 2).sum(axis=1))]
    res = minimize(
        lambda x: 0.5 * np.sum((x - y) ** 2), start, jac=lambda x: x - y, method="SLSQP",
        bounds=[(0, 1)] * 3, constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1, "jac": lambda x: np.ones(3)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return res.x


@pytest.mark.parametrize("y", [[0.5, 0.5, 1.0], [2.0, -1.0, 0.3], [0.1, 0.2, 0.3]])
def test_simplex_projection_matches_grid_oracle(y):
    y = np.array(y)
    np.testing.assert_allclose(project_euclidean(simplex(3), y), simplex_projection_oracle(y), atol=1e-6)


def test_simplex_projection_known_value():
    np.testing.assert_allclose(project_euclidean(simplex(3), [0.5, 0.5, 1.0]), [1 / 6, 1 / 6, 2 / 3], atol=1e-15)


@pytest.mark.parametrize("name", SETS)
@settings(max_examples=60, deadline=None)
@given(y=arrays(float, 3, elements=finite))
def test_projection_idempotent_and_feasible(name, y):
    om = SETS[name]
    p = om.project(y)
    assert om.contains(p)
    np.testing.assert_allclose(om.project(p), p, atol=1e-12)


@pytest.mark.parametrize("name", SETS)
@settings(max_examples=30, deadline=None)
@given(y=arrays(float, 3, elements=finite), seed=st.integers(0, 2**32 - 1))
def test_projection_variational_inequality(name, y, seed):
    om = SETS[name]
    p = om.project(y)
    xs = om.sample(np.random.default_rng(seed), 100)
    assert np.max((xs - p) @ (y - p)) <= 1e-9


@pytest.mark.parametrize("name", SETS)
def test_bisection_route_matches_sort_route(name):
    om = SETS[name]
    ys = np.random.default_rng(3).normal(scale=5, size=(500, 3))
    np.testing.assert_allclose(om.project_bisect(ys), om.project(ys), atol=1e-12)


def test_linear_minimizer_examples():
    x, v = linear_minimizer(l1_ball(3, 2), [3, -4])
    np.testing.assert_array_equal(x, [0, 3])
    assert v == -12
    x, v = linear_minimizer(simplex(3), [5, 1, 2])
    np.testing.assert_array_equal(x, [0, 1, 0])
    assert v == 1
    x, v = linear_minimizer(box([-1, -1], [1, 1]), [2, -3])
    np.testing.assert_array_equal(x, [-1, 1])
    assert v == -5


def test_linear_minimizer_ties_and_zero():
    x, _ = linear_minimizer(l1_ball(1, 3), [1, -1, 1])
    np.testing.assert_array_equal(x, [-1, 0, 0])
    x, v = linear_minimizer(l2_ball(2, 2, center=[1, 1]), [0, 0])
    np.testing.assert_array_equal(x, [1, 1])
    assert v == 0


@pytest.mark.parametrize("name", SETS)
def test_linear_minimizer_is_minimal(name):
    om = SETS[name]
    rng = np.random.default_rng(11)
    xs = om.sample(rng, 1000)
    for _ in range(20):
        g = rng.normal(size=3)
        x, v = om.linear_minimizer(g)
        assert om.contains(x)
        assert v == pytest.approx(g @ x)
        assert np.all(v <= xs @ g + 1e-9)


def test_diameter_examples():
    assert diameter(l1_ball(3, 2)) == 6
    for d in (2, 3, 7):
        assert diameter(simplex(d)) == math.sqrt(2)
    assert diameter(box([0, 0, 0], [1, 1, 1])) == pytest.approx(math.sqrt(3))


@pytest.mark.parametrize("name", SETS)
def test_diameter_bounds_sample_distances(name):
    om = SETS[name]
    xs = om.sample(np.random.default_rng(5), 400)
    dist = np.linalg.norm(xs[:, None] - xs[None], axis=-1)
    assert dist.max() <= om.diameter() + 1e-12


def test_max_min_distance():
    om = l1_ball(3, 2)
    assert om.max_distance([0.8, 0.95]) == pytest.approx(math.hypot(0.8, 3.95))
    assert om.min_distance([0.8, 0.95]) == 0
    assert om.min_distance([4, 0]) == pytest.approx(1)


def test_default_start():
    np.testing.assert_array_equal(l1_ball(3, 2).default_start(), [0, 0])
    np.testing.assert_allclose(simplex(4).default_start(), [0.25] * 4)
    np.testing.assert_array_equal(box([1, 1], [2, 2]).default_start(), [1, 1])


@pytest.mark.parametrize("name", SETS)
def test_dict_round_trip(name):
    om = SETS[name]
    assert ConstraintSet.from_dict(om.to_dict()) == om


def test_invalid_sets_rejected():
    with pytest.raises(ValueError):
        box([1, 0], [0, 1])
    with pytest.raises(ValueError):
        l1_ball(0, 2)
    with pytest.raises(ValueError):
        simplex(1)
    with pytest.raises(ValueError):
        l1_ball(1, 2).contains([1, 2, 3])
