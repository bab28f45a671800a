"""Confidence bound tests: binary search behavior, closed forms, enumeration."""

import math

import numpy as np
import pytest

from regcb.core import Context, UNBOUNDED
from regcb.confidence import (
    BinSearchBudgetError,
    FiniteProbeProblem,
    FiniteProductVersionSpace,
    FiniteVersionSpace,
    JointRidgeVersionSpace,
    ProductRidgeVersionSpace,
    RidgeProbeProblem,
    bin_search,
    binsearch_loop_budget,
    closed_form_ridge_bounds,
    exact_bounds_finite,
    plausible_actions,
)
from regcb.oracles import FeatureMap, FiniteClass, FiniteProductClass, RidgeState


def one_dim_problem(y: float, lam: float = 0.0) -> RidgeProbeProblem:
    state = RidgeState(1, lam=lam)
    state.update(1.0, np.array([1.0]), y)
    return RidgeProbeProblem(state, np.array([1.0]))


def test_binsearch_high_interior():
    # class {theta}: risk (theta - 0)^2 <= 0.25 allows theta up to 0.5
    result = bin_search("high", one_dim_problem(0.0), 0.25, 1e-3)
    assert result.value == pytest.approx(0.5, abs=1e-3)


def test_binsearch_high_clips_at_one():
    # (theta - 0.9)^2 <= 1 allows up to 1.9, clipped
    result = bin_search("high", one_dim_problem(0.9), 1.0, 1e-3)
    assert result.value == 1.0


def test_binsearch_low_interior():
    result = bin_search("low", one_dim_problem(0.5), 0.09, 1e-3)
    assert result.value == pytest.approx(0.2, abs=1e-3)


def test_binsearch_low_clips_at_zero():
    # (theta - 0.1)^2 <= 0.09 reaches -0.2, clipped
    result = bin_search("low", one_dim_problem(0.1), 0.09, 1e-3)
    assert result.value == 0.0


def test_binsearch_early_return_when_fit_already_extreme():
    result = bin_search("high", one_dim_problem(1.2), 0.01, 1e-3)
    assert result.value == 1.0
    assert result.loop_calls == 0
    low = bin_search("low", one_dim_problem(-0.2), 0.01, 1e-3)
    assert low.value == 0.0
    assert low.loop_calls == 0


def test_binsearch_early_return_when_probe_is_unconstrained():
    # no data: the probe direction is free, both fits land on the target side
    state = RidgeState(1, lam=0.0)
    state.update(1.0, np.array([0.0]), 0.25)  # orthogonal to the probe
    problem = RidgeProbeProblem(state, np.array([1.0]))
    result = bin_search("high", problem, 0.5, 1e-3)
    assert result.value == 1.0


def test_binsearch_validation_errors():
    with pytest.raises(ValueError):
        bin_search("sideways", one_dim_problem(0.0), 0.25)
    with pytest.raises(ValueError):
        bin_search("high", one_dim_problem(0.0), -0.1)
    with pytest.raises(ValueError):
        bin_search("high", one_dim_problem(0.0), 0.25, alpha=0.0)


def test_binsearch_iteration_cap():
    with pytest.raises(BinSearchBudgetError):
        bin_search("high", one_dim_problem(0.0), 0.25, alpha=1e-6, max_iterations=2)


def test_binsearch_respects_loop_budget():
    rng = np.random.default_rng(2)
    for alpha in (1e-2, 1e-3, 1e-4):
        for _ in range(30):
            d = int(rng.integers(1, 6))
            state = RidgeState(d, lam=1.0)
            for _ in range(int(rng.integers(1, 40))):
                state.update(1.0, rng.normal(size=d), rng.uniform())
            problem = RidgeProbeProblem(state, rng.normal(size=d))
            for kind in ("high", "low"):
                result = bin_search(kind, problem, 0.5, alpha)
                assert result.loop_calls <= binsearch_loop_budget(kind, result.z0, alpha)
                assert result.oracle_calls == result.loop_calls + 2


def test_binsearch_matches_exact_on_finite_convex_hullless_class():
    # a two-predictor class is not convex; the search must not be used there,
    # but the probe problem still demonstrates the contract mismatch: exact
    # enumeration and the search can disagree
    risks = np.array([0.0, 0.0])
    predictions = np.array([0.2, 0.8])
    exact = exact_bounds_finite(predictions, risks, 0.5)
    assert exact.high == pytest.approx(0.8)
    problem = FiniteProbeProblem(risks, predictions)
    # not asserted equal: documents why finite classes take the exact path
    bin_search("high", problem, 0.5, 1e-3)


def test_closed_form_frozen_example():
    # A = I, theta = 0, phi = [1], radius 0.25 -> +/- 0.5 unclipped
    low, high = closed_form_ridge_bounds(
        np.zeros(1), np.eye(1), np.array([1.0]), 0.25
    )
    assert (low, high) == (pytest.approx(-0.5), pytest.approx(0.5))


def test_closed_form_unbounded_radius():
    low, high = closed_form_ridge_bounds(
        np.zeros(2), np.eye(2), np.array([1.0, 0.0]), UNBOUNDED
    )
    assert low == -math.inf and high == math.inf


def test_closed_form_matches_direct_ellipsoid_maximization():
    # maximize theta
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = int(rng.integers(1, 6))
        state = RidgeState(d, lam=1.0)
        for _ in range(int(rng.integers(2, 30))):
            state.update(rng.uniform(0.5, 2.0), rng.normal(size=d), rng.uniform())
        phi = rng.normal(size=d)
        radius = float(rng.uniform(0.05, 2.0))
        theta = state.solve()
        low, high = closed_form_ridge_bounds(theta, state.inverse(), phi, radius)
        base = state.risk(theta)
        # sample directions on the risk shell and confirm none beat the bounds
        for _ in range(50):
            step = rng.normal(size=d)
            quad = step @ state.A @ step
            shell = theta + step * math.sqrt(radius / quad)
            assert state.risk(shell) == pytest.approx(base + radius, rel=1e-6)
            value = shell @ phi
            assert low - 1e-8 <= value <= high + 1e-8


def test_exact_bounds_finite_enumeration():
    predictions = np.array([0.2, 0.8, 0.5])
    risks = np.array([0.1, 0.3, 0.1])
    bounds = exact_bounds_finite(predictions, risks, 0.15)
    assert bounds.low == pytest.approx(0.2)
    assert bounds.high == pytest.approx(0.5)
    # minimizer always qualifies even at radius zero
    zero = exact_bounds_finite(predictions, risks, 0.0)
    assert zero.low == pytest.approx(0.2)
    assert zero.high == pytest.approx(0.5)
    everything = exact_bounds_finite(predictions, risks, UNBOUNDED)
    assert everything.high == pytest.approx(0.8)


def test_exact_bounds_validation():
    with pytest.raises(ValueError):
        exact_bounds_finite(np.array([0.1]), np.array([0.0, 0.0]), 0.1)
    with pytest.raises(ValueError):
        exact_bounds_finite(np.array([0.1]), np.array([0.0]), -0.1)


def test_plausible_actions_includes_ties():
    from regcb.confidence import ConfidenceBounds

    bounds = [
        ConfidenceBounds(0.4, 0.9),
        ConfidenceBounds(0.1, 0.4),  # high exactly at best low: stays in
        ConfidenceBounds(0.0, 0.39),
    ]
    assert plausible_actions(bounds) == [0, 1]


def test_product_version_space_batch_matches_scalar():
    rng = np.random.default_rng(6)
    states = []
    for _ in range(3):
        st = RidgeState(4, lam=1.0)
        for _ in range(12):
            st.update(1.0, rng.normal(size=4), rng.uniform())
        states.append(st)
    vs = ProductRidgeVersionSpace(states, radius=0.7)
    contexts = [Context(features=rng.normal(size=4)) for _ in range(10)]
    lows, highs = vs.bounds_batch(np.stack([c.features for c in contexts]))
    for i, ctx in enumerate(contexts):
        bounds = vs.bounds(ctx)
        for a, b in enumerate(bounds):
            assert b.low == pytest.approx(lows[i, a], rel=1e-9)
            assert b.high == pytest.approx(highs[i, a], rel=1e-9)


def test_version_space_binsearch_agrees_with_closed_form():
    rng = np.random.default_rng(8)
    states = []
    for _ in range(2):
        st = RidgeState(3, lam=1.0)
        for _ in range(20):
            st.update(1.0, rng.normal(size=3), rng.uniform())
        states.append(st)
    closed = ProductRidgeVersionSpace(states, radius=0.3, method="closed_form")
    searched = ProductRidgeVersionSpace(states, radius=0.3, method="bin_search", alpha=1e-4)
    for _ in range(5):
        ctx = Context(features=rng.normal(size=3))
        for b_c, b_s in zip(closed.bounds(ctx), searched.bounds(ctx)):
            assert b_s.low == pytest.approx(b_c.low, abs=1e-4)
            assert b_s.high == pytest.approx(b_c.high, abs=1e-4)


def test_joint_version_space_snapshot_is_frozen():
    rng = np.random.default_rng(10)
    fmap = FeatureMap("one_hot_block", 2, 2)
    state = RidgeState(fmap.dim, lam=1.0)
    for _ in range(10):
        state.update(1.0, rng.normal(size=fmap.dim), rng.uniform())
    vs = JointRidgeVersionSpace(state, fmap, radius=0.5)
    ctx = Context(features=rng.normal(size=2))
    before = vs.bounds(ctx)
    # mutating the live state must not move the snapshot
    state.update(5.0, rng.normal(size=fmap.dim), 1.0)
    after = vs.bounds(ctx)
    for b0, b1 in zip(before, after):
        assert b0.low == b1.low and b0.high == b1.high


def test_finite_version_space_bounds():
    values = np.zeros((3, 1, 2))
    values[:, 0, 0] = [0.5, 0.4, 0.9]
    values[:, 0, 1] = [0.1, 0.8, 0.2]
    fc = FiniteClass(values)
    vs = FiniteVersionSpace(fc, risks=np.array([0.0, 0.05, 0.4]), radius=0.1)
    bounds = vs.bounds(Context(features=np.zeros(1), key=0))
    assert bounds[0].low == pytest.approx(0.4)
    assert bounds[0].high == pytest.approx(0.5)
    assert bounds[1].high == pytest.approx(0.8)


def test_finite_product_version_space_bounds():
    # three base predictors on a single context, shared across two actions
    fpc = FiniteProductClass(np.array([[0.2], [0.6], [0.9]]), n_actions=2)
    risks = np.array([[0.0, 0.2, 0.5], [0.3, 0.0, 0.05]])
    vs = FiniteProductVersionSpace(fpc, risks, radius=0.25)
    bounds = vs.bounds(Context(features=np.zeros(1), key=0))
    # action 0 survivors: predictors 0, 1 -> values 0.2, 0.6
    assert bounds[0].low == pytest.approx(0.2)
    assert bounds[0].high == pytest.approx(0.6)
    # action 1 survivors: predictors 1, 2 -> values 0.6, 0.9
    assert bounds[1].low == pytest.approx(0.6)
    assert bounds[1].high == pytest.approx(0.9)
