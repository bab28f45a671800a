"""Bandit learners: confidence-bound algorithms and baselines.

All learners share one loop contract: `policy_eval(x)` is a pure map from a
context to an action distribution plus diagnostics, `observe` folds one
logged round into running statistics, and `on_epoch_boundary` refreshes
whatever frozen state the policy uses (fitted predictors, version-space
snapshots, bootstrap replicates).  The runner samples actions from the
returned distribution, so the logged propensity is exactly the probability
the action had.

The doubly-robust logging reduction used by gradient-update systems needs an
incremental optimizer rather than a least-squares fit and is deliberately
not provided; the three fit-compatible reductions are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BanditObservation,
    Context,
    Schedule,
    WeightedRegressionExample,
)
from .confidence import (
    FiniteProductVersionSpace,
    FiniteVersionSpace,
    JointRidgeVersionSpace,
    ProductRidgeVersionSpace,
    plausible_actions,
)
from .oracles import (
    FeatureMap,
    FiniteClass,
    FiniteProductClass,
    FinitePredictor,
    LinearPredictor,
    ProductLinearPredictor,
    RidgeState,
)

REDUCTIONS = ("direct", "inverse_propensity", "expanded")


def reduce_observation(
    obs: BanditObservation, kind: str, n_actions: int
) -> list[WeightedRegressionExample]:
    """Turn one logged round into weighted regression examples.

    direct: one unit-weight example with the realized reward as target.
    inverse_propensity: one example with weight 1 / propensity.
    expanded: one unit-weight example per action, target reward / propensity
        for the taken action and 0 for the rest (unbiased for each action's
        expected reward under the logging policy).
    """
    if kind == "direct":
        return [WeightedRegressionExample(1.0, obs.context, obs.action, obs.reward)]
    if kind == "inverse_propensity":
        return [
            WeightedRegressionExample(
                1.0 / obs.propensity, obs.context, obs.action, obs.reward
            )
        ]
    if kind == "expanded":
        boosted = obs.reward / obs.propensity
        return [
            WeightedRegressionExample(
                1.0, obs.context, a, boosted if a == obs.action else 0.0
            )
            for a in range(n_actions)
        ]
    raise ValueError(f"unknown reduction {kind!r}; expected one of {REDUCTIONS}")


@dataclass(frozen=True)
class PolicyEval:
    """Pure evaluation of a policy at one context."""

    probs: np.ndarray
    widths: np.ndarray | None = None
    n_plausible: int | None = None


@dataclass(frozen=True)
class Decision:
    action: int
    propensity: float
    width: float | None
    n_plausible: int | None


class BanditLearner:
    """Base class wiring policy evaluation to sampling and bookkeeping."""

    name = "base"

    def __init__(self, n_actions: int):
        if n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        self.n_actions = n_actions
        self.rounds_observed = 0

    def policy_eval(self, context: Context) -> PolicyEval:
        raise NotImplementedError

    def action_probs(self, context: Context) -> np.ndarray:
        return self.policy_eval(context).probs

    def action_probs_batch(self, contexts) -> np.ndarray:
        """(n, K) action distributions; subclasses vectorize where useful."""
        return np.stack([self.policy_eval(x).probs for x in contexts])

    def decide(self, context: Context, rng: np.random.Generator) -> Decision:
        pe = self.policy_eval(context)
        support = np.flatnonzero(pe.probs > 0.0)
        if support.size == 1:
            action = int(support[0])
        else:
            action = int(rng.choice(self.n_actions, p=pe.probs))
        width = None if pe.widths is None else float(pe.widths[action])
        return Decision(action, float(pe.probs[action]), width, pe.n_plausible)

    def observe(self, obs: BanditObservation) -> None:
        self.rounds_observed += 1

    def on_epoch_boundary(self, round_index: int) -> None:
        pass


class UniformLearner(BanditLearner):
    name = "uniform"

    def policy_eval(self, context: Context) -> PolicyEval:
        return PolicyEval(np.full(self.n_actions, 1.0 / self.n_actions))

    def action_probs_batch(self, contexts) -> np.ndarray:
        return np.full((len(contexts), self.n_actions), 1.0 / self.n_actions)


class _ArrayHistory:
    """Append-only history stored as parallel lists, stackable on demand."""

    def __init__(self):
        self.weights: list[float] = []
        self.features: list[np.ndarray] = []
        self.actions: list[int] = []
        self.targets: list[float] = []

    def __len__(self) -> int:
        return len(self.weights)

    def append(self, ex: WeightedRegressionExample) -> None:
        self.weights.append(ex.weight)
        self.features.append(ex.context.features)
        self.actions.append(ex.action)
        self.targets.append(ex.target)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.weights),
            np.asarray(self.features),
            np.asarray(self.actions, dtype=int),
            np.asarray(self.targets),
        )


def fit_product_ridge_arrays(
    base_dim: int,
    n_actions: int,
    lam: float,
    weights: np.ndarray,
    features: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> np.ndarray:
    """Per-action ridge coefficients from stacked history arrays."""
    thetas = np.zeros((n_actions, base_dim))
    for a in range(n_actions):
        mask = actions == a
        if not np.any(mask):
            continue
        xa = features[mask]
        wa = weights[mask]
        ya = targets[mask]
        A = lam * np.eye(base_dim) + xa.T @ (wa[:, None] * xa)
        b = xa.T @ (wa * ya)
        try:
            thetas[a] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            thetas[a] = np.linalg.lstsq(A, b, rcond=None)[0]
    return thetas


class ProductRidgeAdapter:
    """Incremental per-action ridge statistics behind the learner interface."""

    kind = "ridge_product"

    def __init__(self, base_dim: int, n_actions: int, lam: float = 1.0):
        self.base_dim = base_dim
        self.n_actions = n_actions
        self.lam = lam
        self.states = [RidgeState(base_dim, lam) for _ in range(n_actions)]

    def observe(self, ex: WeightedRegressionExample) -> None:
        self.states[ex.action].update(ex.weight, ex.context.features, ex.target)

    def version_space(self, radius, method: str, alpha: float) -> ProductRidgeVersionSpace:
        return ProductRidgeVersionSpace(self.states, radius, _ridge_method(method), alpha)

    def greedy_predictor(self) -> ProductLinearPredictor:
        return ProductLinearPredictor(np.stack([s.solve() for s in self.states]))


def _ridge_method(method: str) -> str:
    if method == "auto":
        return "closed_form"
    if method in ("closed_form", "bin_search"):
        return method
    raise ValueError(f"ridge classes support closed_form or bin_search, got {method!r}")


def _finite_method(method: str) -> None:
    if method not in ("auto", "exact"):
        raise ValueError(
            f"finite classes are answered by exact enumeration, got {method!r}; "
            "the binary search requires a convex class"
        )


class JointRidgeAdapter:
    """Incremental joint ridge over phi(x, a)."""

    kind = "ridge_joint"

    def __init__(self, feature_map: FeatureMap, lam: float = 1.0):
        self.feature_map = feature_map
        self.n_actions = feature_map.n_actions
        self.lam = lam
        self.state = RidgeState(feature_map.dim, lam)

    def observe(self, ex: WeightedRegressionExample) -> None:
        self.state.update(
            ex.weight, self.feature_map.joint(ex.context, ex.action), ex.target
        )

    def version_space(self, radius, method: str, alpha: float) -> JointRidgeVersionSpace:
        return JointRidgeVersionSpace(
            self.state, self.feature_map, radius, _ridge_method(method), alpha
        )

    def greedy_predictor(self) -> LinearPredictor:
        return LinearPredictor(self.state.solve(), self.feature_map)


class FiniteAdapter:
    """Running per-predictor risks for an enumerable joint class."""

    kind = "finite"

    def __init__(self, function_class: FiniteClass):
        self.function_class = function_class
        self.n_actions = function_class.n_actions
        self.risks = np.zeros(function_class.n_predictors)

    def observe(self, ex: WeightedRegressionExample) -> None:
        fc = self.function_class
        if ex.context.key is None:
            raise ValueError("finite class needs contexts with integer keys")
        preds = fc.values[:, ex.context.key, ex.action]
        self.risks += ex.weight * (preds - ex.target) ** 2

    def version_space(self, radius, method: str, alpha: float) -> FiniteVersionSpace:
        _finite_method(method)
        return FiniteVersionSpace(self.function_class, self.risks.copy(), radius)

    def greedy_predictor(self) -> FinitePredictor:
        return FinitePredictor(self.function_class, int(np.argmin(self.risks)))


class FiniteProductAdapter:
    """Running per-action risks for a product of finite base classes."""

    kind = "finite_product"

    def __init__(self, function_class: FiniteProductClass):
        self.function_class = function_class
        self.n_actions = function_class.n_actions
        self.risks = np.zeros((function_class.n_actions, function_class.n_base))

    def observe(self, ex: WeightedRegressionExample) -> None:
        fc = self.function_class
        if ex.context.key is None:
            raise ValueError("finite class needs contexts with integer keys")
        preds = fc.base_values[:, ex.context.key]
        self.risks[ex.action] += ex.weight * (preds - ex.target) ** 2

    def version_space(self, radius, method: str, alpha: float) -> FiniteProductVersionSpace:
        _finite_method(method)
        return FiniteProductVersionSpace(self.function_class, self.risks.copy(), radius)


class RegCBLearner(BanditLearner):
    """Version-space learner with per-epoch confidence bounds.

    variant "elimination": play uniformly over the actions whose upper bound
    reaches the best lower bound.  variant "optimistic": play the action
    with the highest upper bound (lowest index on ties), optionally after an
    initial stretch of epochs played uniformly while bounds are vacuous.

    Training examples are the realized rewards of chosen actions with unit
    weight (the on-policy reduction); confidence sets are rebuilt from the
    accumulated statistics only at epoch boundaries.
    """

    def __init__(
        self,
        variant: str,
        adapter,
        schedule: Schedule,
        bounds_method: str = "auto",
        alpha: float = 1e-3,
    ):
        if variant not in ("elimination", "optimistic"):
            raise ValueError(f"unknown variant {variant!r}")
        super().__init__(adapter.n_actions)
        self.variant = variant
        self.adapter = adapter
        self.schedule = schedule
        self.bounds_method = bounds_method
        self.alpha = alpha
        self.version_space = None
        self.name = "regcb-elim" if variant == "elimination" else "regcb-opt"

    def on_epoch_boundary(self, round_index: int) -> None:
        epoch = self.schedule.epoch_of_round(round_index)
        radius = self.schedule.radius_for_epoch(epoch)
        self.version_space = self.adapter.version_space(
            radius, self.bounds_method, self.alpha
        )

    def _uniform_eval(self) -> PolicyEval:
        return PolicyEval(np.full(self.n_actions, 1.0 / self.n_actions))

    def policy_eval(self, context: Context) -> PolicyEval:
        if self.version_space is None:
            return self._uniform_eval()
        if self.variant == "optimistic" and self.schedule.in_warm_start(
            self.rounds_observed + 1
        ):
            return self._uniform_eval()
        bounds = self.version_space.bounds(context)
        lows = np.array([b.low for b in bounds])
        highs = np.array([b.high for b in bounds])
        widths = highs - lows
        plausible = plausible_actions(bounds)
        probs = np.zeros(self.n_actions)
        if self.variant == "elimination":
            probs[plausible] = 1.0 / len(plausible)
        else:
            probs[int(np.argmax(highs))] = 1.0
        return PolicyEval(probs, widths, len(plausible))

    def action_probs_batch(self, contexts) -> np.ndarray:
        vs = self.version_space
        warm = self.variant == "optimistic" and self.schedule.in_warm_start(
            self.rounds_observed + 1
        )
        if vs is None or warm:
            return np.full((len(contexts), self.n_actions), 1.0 / self.n_actions)
        if isinstance(vs, ProductRidgeVersionSpace) and vs.method == "closed_form":
            features = np.stack([x.features for x in contexts])
            lows, highs = vs.bounds_batch(features)
            return self._probs_from_bounds(lows, highs)
        if isinstance(vs, FiniteVersionSpace):
            keys = np.array([x.key for x in contexts])
            mask = vs.survivor_mask()
            preds = vs.function_class.values[mask][:, keys, :]
            return self._probs_from_bounds(preds.min(axis=0), preds.max(axis=0))
        return super().action_probs_batch(contexts)

    def _probs_from_bounds(self, lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
        probs = np.zeros_like(lows)
        if self.variant == "optimistic":
            probs[np.arange(len(lows)), np.argmax(highs, axis=1)] = 1.0
            return probs
        best_low = lows.max(axis=1, keepdims=True)
        member = highs >= best_low
        return member / member.sum(axis=1, keepdims=True)

    def observe(self, obs: BanditObservation) -> None:
        super().observe(obs)
        for ex in reduce_observation(obs, "direct", self.n_actions):
            self.adapter.observe(ex)


class EpsilonGreedyLearner(BanditLearner):
    """Greedy on a periodically refit predictor with decaying exploration.

    Exploration probability at round t is max(1 / sqrt(t), epsilon); with
    probability p the action is uniform, otherwise greedy, so the sampling
    distribution is p / K plus (1 - p) on the greedy action.
    """

    name = "epsilon-greedy"

    def __init__(self, epsilon: float, adapter, reduction: str = "inverse_propensity"):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        if reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {reduction!r}")
        super().__init__(adapter.n_actions)
        self.epsilon = epsilon
        self.adapter = adapter
        self.reduction = reduction
        self.predictor = None

    def on_epoch_boundary(self, round_index: int) -> None:
        self.predictor = self.adapter.greedy_predictor()

    def _explore_prob(self) -> float:
        t = self.rounds_observed + 1
        return max(1.0 / np.sqrt(t), self.epsilon)

    def policy_eval(self, context: Context) -> PolicyEval:
        p = self._explore_prob()
        probs = np.full(self.n_actions, p / self.n_actions)
        if self.predictor is None:
            greedy = 0
        else:
            greedy = int(np.argmax(self.predictor.predict_all(context)))
        probs[greedy] += 1.0 - p
        return PolicyEval(probs)

    def action_probs_batch(self, contexts) -> np.ndarray:
        p = self._explore_prob()
        probs = np.full((len(contexts), self.n_actions), p / self.n_actions)
        if self.predictor is None:
            greedy = np.zeros(len(contexts), dtype=int)
        elif isinstance(self.predictor, ProductLinearPredictor):
            features = np.stack([x.features for x in contexts])
            greedy = np.argmax(features @ self.predictor.thetas.T, axis=1)
        else:
            greedy = np.array(
                [int(np.argmax(self.predictor.predict_all(x))) for x in contexts]
            )
        probs[np.arange(len(contexts)), greedy] += 1.0 - p
        return probs

    def observe(self, obs: BanditObservation) -> None:
        super().observe(obs)
        for ex in reduce_observation(obs, self.reduction, self.n_actions):
            self.adapter.observe(ex)


def bootstrap_scores(predictions: np.ndarray, exploration_coef: float) -> np.ndarray:
    """Per-action score mean + sqrt(coef * variance) over replicates.

    `predictions` has shape (n_replicates, K).  Variance is the population
    variance across replicates, so a single replicate scores as plain greedy.
    """
    if exploration_coef < 0:
        raise ValueError("exploration_coef must be nonnegative")
    mean = predictions.mean(axis=0)
    var = predictions.var(axis=0)
    return mean + np.sqrt(exploration_coef * var)


def bootstrap_act(predictions: np.ndarray, exploration_coef: float) -> int:
    """Argmax of the bootstrap scores, lowest index on ties."""
    return int(np.argmax(bootstrap_scores(predictions, exploration_coef)))


class BootstrapLearner(BanditLearner):
    """Ensemble of predictors fit on resampled histories.

    At each epoch boundary every replicate is refit on a same-size resample
    of the history drawn with replacement from the learner's own random
    stream.  Actions maximize mean + sqrt(coef * variance) across replicates
    and are played deterministically (propensity 1).
    """

    name = "bootstrap"

    def __init__(
        self,
        n_replicates: int,
        exploration_coef: float,
        base_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        lam: float = 1.0,
        reduction: str = "direct",
    ):
        if n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        if exploration_coef < 0:
            raise ValueError("exploration_coef must be nonnegative")
        if reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {reduction!r}")
        super().__init__(n_actions)
        self.n_replicates = n_replicates
        self.exploration_coef = exploration_coef
        self.base_dim = base_dim
        self.lam = lam
        self.reduction = reduction
        self.rng = rng
        self.history = _ArrayHistory()
        self.thetas = np.zeros((n_replicates, n_actions, base_dim))

    def on_epoch_boundary(self, round_index: int) -> None:
        n = len(self.history)
        if n == 0:
            return
        weights, features, actions, targets = self.history.arrays()
        for i in range(self.n_replicates):
            idx = self.rng.integers(0, n, size=n)
            self.thetas[i] = fit_product_ridge_arrays(
                self.base_dim,
                self.n_actions,
                self.lam,
                weights[idx],
                features[idx],
                actions[idx],
                targets[idx],
            )

    def _replicate_predictions(self, context: Context) -> np.ndarray:
        return self.thetas @ context.features

    def policy_eval(self, context: Context) -> PolicyEval:
        preds = self._replicate_predictions(context)
        scores = bootstrap_scores(preds, self.exploration_coef)
        mean = preds.mean(axis=0)
        spread = scores - mean
        probs = np.zeros(self.n_actions)
        probs[int(np.argmax(scores))] = 1.0
        n_plausible = int(np.sum(scores >= np.max(mean - spread)))
        return PolicyEval(probs, widths=2.0 * spread, n_plausible=n_plausible)

    def action_probs_batch(self, contexts) -> np.ndarray:
        features = np.stack([x.features for x in contexts])
        preds = np.einsum("rkd,nd->nrk", self.thetas, features)
        mean = preds.mean(axis=1)
        var = preds.var(axis=1)
        scores = mean + np.sqrt(self.exploration_coef * var)
        probs = np.zeros((len(contexts), self.n_actions))
        probs[np.arange(len(contexts)), np.argmax(scores, axis=1)] = 1.0
        return probs

    def observe(self, obs: BanditObservation) -> None:
        super().observe(obs)
        for ex in reduce_observation(obs, self.reduction, self.n_actions):
            self.history.append(ex)
