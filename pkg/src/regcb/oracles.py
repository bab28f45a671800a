"""Weighted least-squares oracles over linear and tabular function classes.

Every learner in this package interacts with its function class only through
weighted squared-loss minimization: fit a predictor to a history of weighted
examples, optionally with one extra probe example appended.  Linear classes
keep (A, b) sufficient statistics so fits are a single solve; tabular classes
keep one running risk per predictor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Context, WeightedRegressionExample


class FeatureMap:
    """Maps a (context, action) pair to one joint feature vector.

    mode "one_hot_block": phi(x, a) places x.features into block a of a
    K * d vector (zeros elsewhere), the usual reduction of shared context
    features to a joint linear class.

    mode "per_action_rows": phi(x, a) is row a of the context's per-action
    feature matrix, for problems whose features already depend on the action.
    """

    def __init__(self, mode: str, base_dim: int, n_actions: int):
        if mode not in ("one_hot_block", "per_action_rows"):
            raise ValueError(f"unknown feature map mode {mode!r}")
        if base_dim < 1 or n_actions < 1:
            raise ValueError("base_dim and n_actions must be >= 1")
        self.mode = mode
        self.base_dim = base_dim
        self.n_actions = n_actions

    @property
    def dim(self) -> int:
        if self.mode == "one_hot_block":
            return self.base_dim * self.n_actions
        return self.base_dim

    def joint(self, context: Context, action: int) -> np.ndarray:
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} outside 0..{self.n_actions - 1}")
        if self.mode == "one_hot_block":
            phi = np.zeros(self.dim)
            lo = action * self.base_dim
            phi[lo : lo + self.base_dim] = context.features
            return phi
        return np.asarray(context.action_features(action), dtype=float)


class RidgeState:
    """Sufficient statistics for weighted ridge regression.

    Maintains A = lam * I + sum_i w_i phi_i phi_i^T and b = sum_i w_i y_i
    phi_i, plus sum_i w_i y_i^2 so the regularized empirical risk of any
    coefficient vector is the quadratic form theta^T A theta - 2 theta^T b +
    sum_wy2 without touching the raw examples.
    """

    def __init__(self, dim: int, lam: float = 1.0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if lam < 0:
            raise ValueError(f"lam must be nonnegative, got {lam}")
        self.dim = dim
        self.lam = lam
        self.A = lam * np.eye(dim)
        self.b = np.zeros(dim)
        self.sum_wy2 = 0.0
        self.n_examples = 0
        self._theta: np.ndarray | None = None

    def update(self, weight: float, phi: np.ndarray, target: float) -> None:
        if weight < 0:
            raise ValueError(f"weight must be nonnegative, got {weight}")
        self.A += weight * np.outer(phi, phi)
        self.b += weight * target * phi
        self.sum_wy2 += weight * target * target
        self.n_examples += 1
        self._theta = None

    def copy(self) -> RidgeState:
        out = RidgeState.__new__(RidgeState)
        out.dim = self.dim
        out.lam = self.lam
        out.A = self.A.copy()
        out.b = self.b.copy()
        out.sum_wy2 = self.sum_wy2
        out.n_examples = self.n_examples
        out._theta = None if self._theta is None else self._theta.copy()
        return out

    def solve(self) -> np.ndarray:
        """Minimizer of the regularized risk (min-norm solution if singular)."""
        if self._theta is None:
            self._theta = _solve_normal_equations(self.A, self.b)
        return self._theta

    def solve_augmented(self, phi: np.ndarray, half_weight: float, target: float) -> np.ndarray:
        """Minimizer after adding one probe example of weight `half_weight`.

        Solves (A + half_weight * phi phi^T) theta = b + half_weight * target
        * phi without mutating the state.
        """
        if half_weight == 0.0:
            return self.solve()
        A = self.A + half_weight * np.outer(phi, phi)
        b = self.b + half_weight * target * phi
        return _solve_normal_equations(A, b)

    def risk(self, theta: np.ndarray) -> float:
        """Regularized empirical risk lam * ||theta||^2 + sum w (pred - y)^2."""
        return float(theta @ self.A @ theta - 2.0 * theta @ self.b + self.sum_wy2)

    def inverse(self) -> np.ndarray:
        """A^{-1} (pseudoinverse if singular); used by closed-form bounds."""
        try:
            return np.linalg.inv(self.A)
        except np.linalg.LinAlgError:
            return np.linalg.pinv(self.A)


def _solve_normal_equations(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


@dataclass(frozen=True)
class LinearPredictor:
    """Joint linear predictor theta^T phi(x, a)."""

    theta: np.ndarray
    feature_map: FeatureMap

    def predict(self, context: Context, action: int) -> float:
        return float(self.theta @ self.feature_map.joint(context, action))

    def predict_all(self, context: Context) -> np.ndarray:
        return np.array(
            [self.predict(context, a) for a in range(self.feature_map.n_actions)]
        )


@dataclass(frozen=True)
class ProductLinearPredictor:
    """One linear predictor per action over the shared context features."""

    thetas: np.ndarray  # (K, d)

    def predict(self, context: Context, action: int) -> float:
        return float(self.thetas[action] @ context.features)

    def predict_all(self, context: Context) -> np.ndarray:
        return self.thetas @ context.features


class RidgeModel:
    """Joint ridge regression over phi(x, a)."""

    def __init__(self, feature_map: FeatureMap, lam: float = 1.0):
        self.feature_map = feature_map
        self.lam = lam

    def make_state(self) -> RidgeState:
        return RidgeState(self.feature_map.dim, self.lam)

    def state_from_history(
        self, history: Sequence[WeightedRegressionExample]
    ) -> RidgeState:
        state = self.make_state()
        for ex in history:
            state.update(
                ex.weight, self.feature_map.joint(ex.context, ex.action), ex.target
            )
        return state

    def fit(self, history: Sequence[WeightedRegressionExample]) -> LinearPredictor:
        return LinearPredictor(self.state_from_history(history).solve(), self.feature_map)


class ProductRidgeModel:
    """Independent per-action ridge regressions over context features.

    Each action's regression sees only the rounds where that action was
    taken, which is the product-class decomposition of the joint oracle.
    """

    def __init__(self, base_dim: int, n_actions: int, lam: float = 1.0):
        if n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        self.base_dim = base_dim
        self.n_actions = n_actions
        self.lam = lam

    def make_states(self) -> list[RidgeState]:
        return [RidgeState(self.base_dim, self.lam) for _ in range(self.n_actions)]

    def states_from_history(
        self, history: Sequence[WeightedRegressionExample]
    ) -> list[RidgeState]:
        states = self.make_states()
        for ex in history:
            states[ex.action].update(ex.weight, ex.context.features, ex.target)
        return states

    def fit(self, history: Sequence[WeightedRegressionExample]) -> ProductLinearPredictor:
        states = self.states_from_history(history)
        return ProductLinearPredictor(np.stack([s.solve() for s in states]))


class FiniteClass:
    """Enumerable function class over an enumerable context space.

    `values[f, x, a]` is predictor f's value at context key x and action a.
    Risks are plain (unregularized) weighted squared losses; argmin ties
    break toward the lowest predictor index.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3:
            raise ValueError("values must have shape (n_predictors, n_contexts, n_actions)")
        self.values = values

    @property
    def n_predictors(self) -> int:
        return self.values.shape[0]

    @property
    def n_contexts(self) -> int:
        return self.values.shape[1]

    @property
    def n_actions(self) -> int:
        return self.values.shape[2]

    def _key(self, context: Context) -> int:
        if context.key is None:
            raise ValueError("finite class needs contexts with integer keys")
        return context.key

    def risks(self, history: Sequence[WeightedRegressionExample]) -> np.ndarray:
        risks = np.zeros(self.n_predictors)
        for ex in history:
            preds = self.values[:, self._key(ex.context), ex.action]
            risks += ex.weight * (preds - ex.target) ** 2
        return risks

    def fit_index(self, history: Sequence[WeightedRegressionExample]) -> int:
        return int(np.argmin(self.risks(history)))

    def fit(self, history: Sequence[WeightedRegressionExample]) -> FinitePredictor:
        return FinitePredictor(self, self.fit_index(history))

    def predictions_at(self, context: Context) -> np.ndarray:
        """All predictors' values at one context, shape (n_predictors, K)."""
        return self.values[:, self._key(context), :]


@dataclass(frozen=True)
class FinitePredictor:
    function_class: FiniteClass
    index: int

    def predict(self, context: Context, action: int) -> float:
        return float(self.function_class.predictions_at(context)[self.index, action])

    def predict_all(self, context: Context) -> np.ndarray:
        return self.function_class.predictions_at(context)[self.index]


class FiniteRiskTracker:
    """Running per-predictor risks for a finite class, updated per round."""

    def __init__(self, function_class: FiniteClass):
        self.function_class = function_class
        self.risks = np.zeros(function_class.n_predictors)
        self.n_examples = 0

    def update(self, example: WeightedRegressionExample) -> None:
        fc = self.function_class
        preds = fc.values[:, fc._key(example.context), example.action]
        self.risks += example.weight * (preds - example.target) ** 2
        self.n_examples += 1

    def snapshot(self) -> np.ndarray:
        return self.risks.copy()


class FiniteProductClass:
    """Product of one finite base class per action.

    `base_values[g, x]` is base predictor g's value at context key x; the
    induced joint class is every K-tuple of base predictors, one per action.
    Per-action risks only involve rounds where that action was taken.
    """

    def __init__(self, base_values: np.ndarray, n_actions: int):
        base_values = np.asarray(base_values, dtype=float)
        if base_values.ndim != 2:
            raise ValueError("base_values must have shape (n_base, n_contexts)")
        if n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        self.base_values = base_values
        self.n_actions = n_actions

    @property
    def n_base(self) -> int:
        return self.base_values.shape[0]

    def per_action_risks(
        self, history: Sequence[WeightedRegressionExample]
    ) -> np.ndarray:
        """Shape (K, n_base): action a's risk over its own rounds."""
        risks = np.zeros((self.n_actions, self.n_base))
        for ex in history:
            if ex.context.key is None:
                raise ValueError("finite class needs contexts with integer keys")
            preds = self.base_values[:, ex.context.key]
            risks[ex.action] += ex.weight * (preds - ex.target) ** 2
        return risks

    def predictions_at(self, context: Context) -> np.ndarray:
        """All base predictors' values at one context, shape (n_base,)."""
        if context.key is None:
            raise ValueError("finite class needs contexts with integer keys")
        return self.base_values[:, context.key]
