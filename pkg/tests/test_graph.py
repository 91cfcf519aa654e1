import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdonc.graph import (
    ConnectivityError,
    WeightSchedule,
    check_B_strong_connectivity,
    contraction_constants,
    tracking_matrices,
    transition,
    transition_products,
    validate_doubly_stochastic,
)

A1, A2, A3 = tracking_matrices()


def reachable_all(adj):
    """Boolean transitive closure (Warshall) -- independent of the SCC routine."""
    r = np.array(adj, dtype=bool) | np.eye(len(adj), dtype=bool)
    for k in range(len(r)):
        r = r | (r[:, [k]] & r[[k], :])
    return bool(r.all())


def brute_force_window(mats, cap=10):
    p = len(mats)
    for B in range(1, cap + 1):
        if all(reachable_all(sum((mats[(s + k) % p] > 0).astype(int) for k in range(B)) > 0) for s in range(p)):
            return B
    return None


def test_tracking_matrices_are_doubly_stochastic():
    for m in (A1, A2, A3):
        assert validate_doubly_stochastic(m).ok


def test_identity_is_doubly_stochastic():
    assert validate_doubly_stochastic(np.eye(6))


def test_perturbed_entry_reported():
    bad = A1.copy()
    bad[0, 0] = 0.6
    rep = validate_doubly_stochastic(bad)
    assert not rep.ok
    assert rep.bad_rows == (0,)
    assert rep.bad_cols == (0,)


def test_non_square_rejected():
    with pytest.raises(ValueError):
        validate_doubly_stochastic(np.ones((2, 3)) / 3)


def test_window_complete_graph():
    assert check_B_strong_connectivity(WeightSchedule((A2,))) == 1
    assert brute_force_window([A2]) == 1


def test_window_three_cycle_matches_brute_force():
    sched = WeightSchedule((A1, A2, A3))
    B = check_B_strong_connectivity(sched)
    assert B == brute_force_window([A1, A2, A3])
    assert B == 2


def test_window_split_graph_fails():
    # A3 only links nodes of equal parity
    with pytest.raises(ConnectivityError):
        check_B_strong_connectivity(WeightSchedule((A3,)), cap=5)
    assert brute_force_window([A3], cap=5) is None


def test_sequence_policy_windows():
    sched = WeightSchedule((A1, A3), policy="sequence", sequence=(1, 1, 0, 1, 1))
    assert check_B_strong_connectivity(sched) == 3
    assert sched(3) is sched.matrices[0]
    with pytest.raises(ValueError):
        sched(6)


def test_inferred_lower_bound():
    sched = WeightSchedule((A1, A2, A3))
    assert sched.a == pytest.approx(0.999 / 5)


def test_transition_identity_and_order():
    sched = WeightSchedule((A1, A2, A3))
    assert np.array_equal(transition(sched, 5, 5), np.eye(6))
    np.testing.assert_allclose(transition(sched, 1, 3), A2 @ A1, atol=0)
    np.testing.assert_allclose(transition(sched, 2, 6), np.linalg.multi_dot([A2, A1, A3, A2]), atol=1e-15)
    with pytest.raises(ValueError):
        transition(sched, 4, 3)


def test_transition_decays_to_average():
    sched = WeightSchedule((A1, A2, A3))
    phis = transition_products(sched, 60)
    dev = np.abs(phis - 1 / 6).max(axis=(1, 2))
    assert np.all(np.diff(dev) <= 1e-15)
    assert dev[-1] < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 30), st.integers(0, 30))
def test_transition_properties(r, ds, dt):
    sched = WeightSchedule((A1, A2, A3))
    s, t = r + ds, r + ds + dt
    phi = transition(sched, s, t)
    tol = 1e-10 * (t - s + 1)
    assert np.abs(phi.sum(axis=0) - 1).max() <= tol
    assert np.abs(phi.sum(axis=1) - 1).max() <= tol
    np.testing.assert_allclose(phi @ transition(sched, r, s), transition(sched, r, t), atol=1e-9)


def test_contraction_small_case():
    c = contraction_constants(0.5, 2, 1)
    assert c.C == pytest.approx(4.0, rel=1e-15)
    assert c.lam == pytest.approx(0.5, rel=1e-15)


def test_contraction_against_arbitrary_precision():
    mpmath.mp.dps = 50
    a, n, B = mpmath.mpf("0.15"), 6, 3
    k = (n - 1) * B
    C_ref = 2 * (1 + a ** (-k)) / (1 + a**k)
    lam_ref = (1 - a**k) ** (mpmath.mpf(1) / k)
    c = contraction_constants(0.15, n, B)
    assert c.C == pytest.approx(float(C_ref), rel=1e-13)
    assert c.lam == pytest.approx(float(lam_ref), rel=1e-15)
    assert c.one_minus_lam == pytest.approx(float(1 - lam_ref), rel=1e-12)
    assert c.lam < 1


@pytest.mark.parametrize("a,n,B", [(0.1, 6, 2), (0.9, 2, 1), (0.3, 4, 2)])
def test_lambda_strictly_below_one(a, n, B):
    c = contraction_constants(a, n, B)
    assert 0 < c.lam < 1 and c.one_minus_lam > 0 and np.isfinite(c.C)


def test_gap_survives_when_lambda_rounds_to_one():
    # a^k = 1e-90: lambda is 1.0 in double precision, the gap is not
    c = contraction_constants(0.01, 10, 5)
    assert c.one_minus_lam == pytest.approx(1e-90 / 45, rel=1e-12)


def test_contraction_rejects_bad_a():
    with pytest.raises(ValueError):
        contraction_constants(1.0, 3, 1)
    with pytest.raises(ValueError):
        contraction_constants(0.0, 3, 1)


def test_contraction_bound_holds_empirically():
    sched = WeightSchedule((A1, A2, A3))
    C, lam = sched.contraction_constants()
    for s, t in itertools.product(range(1, 8), range(0, 25)):
        phi = transition(sched, s, s + t)
        assert np.abs(phi - 1 / 6).max() <= C * lam**t


def test_zero_diagonal_accepted():
    # A2 has no self-weights; only double stochasticity is enforced
    WeightSchedule((A2,))
