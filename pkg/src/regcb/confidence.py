"""Upper and lower reward confidence bounds from regression oracles.

Given a history H and a probe point (x, a), the High (Low) bound is the
largest (smallest) prediction at the probe among predictors whose summed
squared loss on H is within `radius` of the best.  Three routes compute it:

  * bin_search: oracle-only binary search over the weight of one synthetic
    probe example, valid for any convex class; needs O(log(1/alpha)) fits.
  * closed_form_ridge_bounds: exact values for ridge classes, where the
    constrained extremum is theta_hat^T phi +/- sqrt(radius * phi^T A^-1 phi).
  * exact_bounds_finite: exact enumeration for finite classes.

A version-space snapshot object freezes the fitted state at an epoch
boundary and serves per-action bounds for the rest of the epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Context, is_unbounded
from .oracles import (
    FeatureMap,
    FiniteClass,
    FiniteProductClass,
    RidgeState,
)


@dataclass(frozen=True)
class ConfidenceBounds:
    """Per-action reward bound pair."""

    low: float
    high: float

    @property
    def width(self) -> float:
        return self.high - self.low


class BinSearchBudgetError(RuntimeError):
    """Raised when the binary search exceeds its hard iteration cap."""


@dataclass(frozen=True)
class BinSearchResult:
    value: float
    oracle_calls: int
    loop_calls: int
    z0: float


class RidgeProbeProblem:
    """Binary-search view of a frozen ridge state and one probe point.

    fit(w, target) returns the probe prediction and the regularized risk on
    the original history of the minimizer of risk + (w / 2) * (pred -
    target)^2, each fit a single augmented solve.
    """

    def __init__(self, state: RidgeState, phi: np.ndarray):
        self.state = state
        self.phi = np.asarray(phi, dtype=float)

    def fit(self, weight: float, target: float) -> tuple[float, float]:
        theta = self.state.solve_augmented(self.phi, 0.5 * weight, target)
        return float(theta @ self.phi), self.state.risk(theta)


class FiniteProbeProblem:
    """Same interface over an enumerable class (used only in tests; the
    engine answers finite classes with exact_bounds_finite instead)."""

    def __init__(self, risks: np.ndarray, predictions: np.ndarray):
        self.risks = np.asarray(risks, dtype=float)
        self.predictions = np.asarray(predictions, dtype=float)

    def fit(self, weight: float, target: float) -> tuple[float, float]:
        objective = self.risks + 0.5 * weight * (self.predictions - target) ** 2
        idx = int(np.argmin(objective))
        return float(self.predictions[idx]), float(self.risks[idx])


def bin_search(
    kind: str,
    problem,
    radius: float,
    alpha: float = 1e-3,
    max_iterations: int = 200,
) -> BinSearchResult:
    """Binary-search confidence bound at one probe point.

    `kind` is "high" or "low"; `radius` is the allowed excess of summed
    squared loss over the minimum; `alpha` is the output precision.  The
    search pins the probe target at 2 (high) or -1 (low), brackets the probe
    weight in [0, radius / alpha], and halves the bracket until either the
    prediction gap is below alpha or the weight gap is below the certified
    threshold.  Output is clipped to 1 from above (high) or 0 from below
    (low).
    """
    if kind not in ("high", "low"):
        raise ValueError(f"kind must be 'high' or 'low', got {kind!r}")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")

    target = 2.0 if kind == "high" else -1.0
    z_lo, risk_min = problem.fit(0.0, target)
    z0 = z_lo
    w_hi = radius / alpha
    z_hi, risk_hi = problem.fit(w_hi, target)
    calls = 2

    if kind == "high" and (z_lo >= 1.0 or risk_hi == risk_min):
        return BinSearchResult(1.0, calls, 0, z0)
    if kind == "low" and (z_lo <= 0.0 or risk_hi == risk_min):
        return BinSearchResult(0.0, calls, 0, z0)

    w_lo = 0.0
    weight_gap_floor = alpha * radius / abs(target - z_lo) ** 3
    loops = 0
    while abs(z_hi - z_lo) > alpha and abs(w_hi - w_lo) > weight_gap_floor:
        if loops >= max_iterations:
            raise BinSearchBudgetError(
                f"binary search exceeded {max_iterations} iterations"
            )
        w = 0.5 * (w_lo + w_hi)
        z, risk = problem.fit(w, target)
        calls += 1
        loops += 1
        if risk >= risk_min + radius:
            w_hi, z_hi = w, z
        else:
            w_lo, z_lo = w, z

    if kind == "high":
        return BinSearchResult(min(z_hi, 1.0), calls, loops, z0)
    return BinSearchResult(max(z_hi, 0.0), calls, loops, z0)


def binsearch_loop_budget(kind: str, z0: float, alpha: float) -> int:
    """Certified cap on loop iterations given the unconstrained fit value z0."""
    if kind == "high":
        span = (2.0 - z0) ** 3
    elif kind == "low":
        span = (1.0 + z0) ** 3
    else:
        raise ValueError(f"kind must be 'high' or 'low', got {kind!r}")
    if span <= 0:
        return 0
    return max(int(math.ceil(math.log2(span / alpha**2))), 0)


def closed_form_ridge_bounds(
    theta: np.ndarray, a_inv: np.ndarray, phi: np.ndarray, radius
) -> tuple[float, float]:
    """Unclipped (low, high) for a ridge class, exact.

    The version space {theta': risk(theta') <= risk(theta_hat) + radius} is
    the ellipsoid (theta' - theta_hat)^T A (theta' - theta_hat) <= radius, so
    the extreme predictions at phi are theta_hat^T phi +/- sqrt(radius *
    phi^T A^-1 phi).
    """
    mid = float(theta @ phi)
    if is_unbounded(radius):
        return -math.inf, math.inf
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    quad = float(phi @ a_inv @ phi)
    half = math.sqrt(radius * max(quad, 0.0))
    return mid - half, mid + half


def exact_bounds_finite(
    predictions: np.ndarray, risks: np.ndarray, radius
) -> ConfidenceBounds:
    """Exact (low, high) over a finite class by enumeration.

    `predictions[f]` and `risks[f]` are predictor f's value at the probe and
    summed loss on the history.  Eligible predictors have excess risk at most
    `radius`; the risk minimizer always qualifies, so the set is nonempty.
    """
    predictions = np.asarray(predictions, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if predictions.shape != risks.shape:
        raise ValueError("predictions and risks must have matching shapes")
    if is_unbounded(radius):
        eligible = np.ones(risks.shape, dtype=bool)
    else:
        if radius < 0:
            raise ValueError(f"radius must be nonnegative, got {radius}")
        eligible = risks <= risks.min() + radius
    values = predictions[eligible]
    return ConfidenceBounds(low=float(values.min()), high=float(values.max()))


def plausible_actions(bounds: Sequence[ConfidenceBounds]) -> list[int]:
    """Actions whose High bound reaches the best Low bound.

    This is the disagreement set: exactly the actions some surviving
    predictor argmaxes, including ties.
    """
    best_low = max(b.low for b in bounds)
    return [a for a, b in enumerate(bounds) if b.high >= best_low]


def _clip_high(value: float) -> float:
    return min(value, 1.0)


def _clip_low(value: float) -> float:
    return max(value, 0.0)


class ProductRidgeVersionSpace:
    """Frozen per-action ridge states plus a shared radius.

    Bounds for action a come from action a's own ellipsoid; the product
    structure means the joint version space factorizes and per-action
    extremes are attained jointly.
    """

    def __init__(
        self,
        states: Sequence[RidgeState],
        radius,
        method: str = "closed_form",
        alpha: float = 1e-3,
    ):
        if method not in ("closed_form", "bin_search"):
            raise ValueError(f"unknown bounds method {method!r}")
        self.states = [s.copy() for s in states]
        self.radius = radius
        self.method = method
        self.alpha = alpha
        self.thetas = np.stack([s.solve() for s in self.states])
        self.a_invs = [s.inverse() for s in self.states]

    @property
    def n_actions(self) -> int:
        return len(self.states)

    def bounds(self, context: Context) -> list[ConfidenceBounds]:
        x = context.features
        out = []
        for a in range(self.n_actions):
            if self.method == "closed_form" or is_unbounded(self.radius):
                low, high = closed_form_ridge_bounds(
                    self.thetas[a], self.a_invs[a], x, self.radius
                )
            else:
                problem = RidgeProbeProblem(self.states[a], x)
                high = bin_search("high", problem, self.radius, self.alpha).value
                low = bin_search("low", problem, self.radius, self.alpha).value
            out.append(ConfidenceBounds(_clip_low(low), _clip_high(high)))
        return out

    def bounds_batch(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized closed-form bounds; (n, K) lows and highs."""
        mids = features @ self.thetas.T
        if is_unbounded(self.radius):
            return np.zeros_like(mids), np.ones_like(mids)
        halves = np.empty_like(mids)
        for a in range(self.n_actions):
            quad = np.einsum("ij,jk,ik->i", features, self.a_invs[a], features)
            halves[:, a] = np.sqrt(float(self.radius) * np.clip(quad, 0.0, None))
        return np.clip(mids - halves, 0.0, None), np.clip(mids + halves, None, 1.0)


class JointRidgeVersionSpace:
    """Frozen joint ridge state over phi(x, a) plus a radius."""

    def __init__(
        self,
        state: RidgeState,
        feature_map: FeatureMap,
        radius,
        method: str = "closed_form",
        alpha: float = 1e-3,
    ):
        if method not in ("closed_form", "bin_search"):
            raise ValueError(f"unknown bounds method {method!r}")
        self.state = state.copy()
        self.feature_map = feature_map
        self.radius = radius
        self.method = method
        self.alpha = alpha
        self.theta = self.state.solve()
        self.a_inv = self.state.inverse()

    @property
    def n_actions(self) -> int:
        return self.feature_map.n_actions

    def bounds(self, context: Context) -> list[ConfidenceBounds]:
        out = []
        for a in range(self.n_actions):
            phi = self.feature_map.joint(context, a)
            if self.method == "closed_form" or is_unbounded(self.radius):
                low, high = closed_form_ridge_bounds(
                    self.theta, self.a_inv, phi, self.radius
                )
            else:
                problem = RidgeProbeProblem(self.state, phi)
                high = bin_search("high", problem, self.radius, self.alpha).value
                low = bin_search("low", problem, self.radius, self.alpha).value
            out.append(ConfidenceBounds(_clip_low(low), _clip_high(high)))
        return out


class FiniteVersionSpace:
    """Frozen per-predictor risks for an enumerable joint class."""

    def __init__(self, function_class: FiniteClass, risks: np.ndarray, radius):
        self.function_class = function_class
        self.risks = np.asarray(risks, dtype=float)
        self.radius = radius

    @property
    def n_actions(self) -> int:
        return self.function_class.n_actions

    def survivor_mask(self) -> np.ndarray:
        if is_unbounded(self.radius):
            return np.ones(self.risks.shape, dtype=bool)
        return self.risks <= self.risks.min() + self.radius

    def bounds(self, context: Context) -> list[ConfidenceBounds]:
        preds = self.function_class.predictions_at(context)
        mask = self.survivor_mask()
        return [
            ConfidenceBounds(
                low=float(preds[mask, a].min()), high=float(preds[mask, a].max())
            )
            for a in range(self.n_actions)
        ]


class FiniteProductVersionSpace:
    """Frozen per-action risks for a product of finite base classes."""

    def __init__(
        self, function_class: FiniteProductClass, per_action_risks: np.ndarray, radius
    ):
        self.function_class = function_class
        self.per_action_risks = np.asarray(per_action_risks, dtype=float)
        self.radius = radius

    @property
    def n_actions(self) -> int:
        return self.function_class.n_actions

    def bounds(self, context: Context) -> list[ConfidenceBounds]:
        preds = self.function_class.predictions_at(context)
        return [
            exact_bounds_finite(preds, self.per_action_risks[a], self.radius)
            for a in range(self.n_actions)
        ]
