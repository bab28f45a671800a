"""Bandit environments: dataset-backed, synthetic linear, and hard tabular.

Environments own all dataset-side randomness.  A single dataset seed is
split into named substreams (row permutation, reward noise, reward matrix,
world parameters, holdout draws), so two runs with the same dataset seed see
identical contexts and reward draws regardless of the learner, while the
learner's own seed drives only action sampling and resampling.

Realized rewards are full vectors over actions; the runner reveals only the
chosen entry to the learner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Context, validate_reward_vector

STREAM_PERMUTE = 0
STREAM_REWARD = 1
STREAM_MATRIX = 2
STREAM_WORLD = 3
STREAM_HOLDOUT = 4
STREAM_CONTEXT = 5
STREAM_AUDIT = 6


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream_id)))


@dataclass
class SupervisedDataset:
    """Multiclass dataset ready for bandit conversion."""

    features: np.ndarray
    labels: np.ndarray
    n_actions: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def load_csv_dataset(
    path: str,
    label_column: int = -1,
    n_actions: int | None = None,
    add_bias: bool = True,
    standardize: bool = False,
    delimiter: str = ",",
    has_header: bool = False,
) -> SupervisedDataset:
    """Read a delimited multiclass dataset.

    Labels must be integer-coded; malformed rows (ragged, non-numeric,
    labels outside 0..K-1 when `n_actions` is given) raise ValueError naming
    the offending file line.  `standardize` centers and scales each feature
    column using full-dataset statistics; `add_bias` appends a constant 1
    column afterwards.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if has_header and line_no == 1:
                continue
            line = line.strip()
            if not line:
                continue
            parts = line.split(delimiter)
            if width is None:
                width = len(parts)
                if width < 2:
                    raise ValueError(
                        f"line {line_no}: need at least one feature and a label"
                    )
            elif len(parts) != width:
                raise ValueError(
                    f"line {line_no}: expected {width} fields, got {len(parts)}"
                )
            try:
                values = [float(p) for p in parts]
            except ValueError as err:
                raise ValueError(f"line {line_no}: non-numeric field ({err})") from None
            label_idx = label_column if label_column >= 0 else width + label_column
            raw_label = values.pop(label_idx)
            if raw_label != int(raw_label):
                raise ValueError(f"line {line_no}: label {raw_label} is not an integer")
            label = int(raw_label)
            if label < 0:
                raise ValueError(f"line {line_no}: label {label} is negative")
            if n_actions is not None and label >= n_actions:
                raise ValueError(
                    f"line {line_no}: label {label} outside 0..{n_actions - 1}"
                )
            rows.append(values)
            labels.append(label)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    features = np.asarray(rows)
    label_arr = np.asarray(labels, dtype=int)
    if standardize:
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std[std == 0.0] = 1.0
        features = (features - mean) / std
    if add_bias:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
    k = n_actions if n_actions is not None else int(label_arr.max()) + 1
    return SupervisedDataset(features, label_arr, k)


def noisy_reward_matrix(n_actions: int, seed: int) -> np.ndarray:
    """Off-diagonal success rates uniform on [0, 1]; diagonal exactly 1.

    mu[a, label] is the chance action a pays off when the true class is
    `label`.  The matrix is a function of the dataset seed only, so every
    configuration sharing a dataset seed shares the matrix.
    """
    rng = _stream(seed, STREAM_MATRIX)
    mu = rng.uniform(0.0, 1.0, size=(n_actions, n_actions))
    np.fill_diagonal(mu, 1.0)
    return mu


class DatasetBanditEnv:
    """Streams a permuted multiclass dataset as a bandit problem.

    reward_model "multiclass": reward 1 for the true class, 0 otherwise
    (deterministic).  reward_model "noisy": the true class always pays 1,
    other actions pay Bernoulli(mu[a, label]) with fresh draws each round.
    """

    def __init__(
        self,
        dataset: SupervisedDataset,
        dataset_seed: int,
        holdout_fraction: float = 0.1,
        reward_model: str = "multiclass",
    ):
        if not 0.0 < holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if reward_model not in ("multiclass", "noisy"):
            raise ValueError(f"unknown reward_model {reward_model!r}")
        self.dataset = dataset
        self.dataset_seed = dataset_seed
        self.reward_model = reward_model
        self.n_actions = dataset.n_actions

        n = dataset.n_rows
        n_holdout = int(math.ceil(holdout_fraction * n))
        if n_holdout >= n:
            raise ValueError("holdout fraction leaves no training rows")
        perm = _stream(dataset_seed, STREAM_PERMUTE).permutation(n)
        self._holdout_rows = perm[:n_holdout]
        self._train_rows = perm[n_holdout:]

        if reward_model == "noisy":
            self.mu = noisy_reward_matrix(self.n_actions, dataset_seed)
            draws = _stream(dataset_seed, STREAM_REWARD).uniform(
                size=(len(self._train_rows), self.n_actions)
            )
            self._reward_draws = draws
        else:
            self.mu = None
            self._reward_draws = None

        self._contexts = [
            Context(features=dataset.features[row], key=int(row))
            for row in self._train_rows
        ]
        self._holdout_contexts = [
            Context(features=dataset.features[row], key=int(row))
            for row in self._holdout_rows
        ]

    @property
    def n_rounds(self) -> int:
        return len(self._train_rows)

    @property
    def dim(self) -> int:
        return self.dataset.dim

    def context_at(self, t: int) -> Context:
        return self._contexts[t - 1]

    def mean_rewards(self, context: Context) -> np.ndarray:
        label = int(self.dataset.labels[context.key])
        if self.reward_model == "noisy":
            return self.mu[:, label].copy()
        means = np.zeros(self.n_actions)
        means[label] = 1.0
        return means

    def realized_rewards(self, t: int, context: Context) -> np.ndarray:
        label = int(self.dataset.labels[context.key])
        if self.reward_model == "multiclass":
            rewards = np.zeros(self.n_actions)
            rewards[label] = 1.0
            return rewards
        rewards = (self._reward_draws[t - 1] < self.mu[:, label]).astype(float)
        rewards[label] = 1.0
        return validate_reward_vector(rewards, self.n_actions)

    def holdout_contexts(self) -> list[Context]:
        return self._holdout_contexts

    def holdout_means(self) -> np.ndarray:
        return np.stack([self.mean_rewards(x) for x in self._holdout_contexts])

    def descriptor(self) -> dict:
        return {
            "environment": "dataset",
            "reward_model": self.reward_model,
            "n_rows": self.dataset.n_rows,
            "n_train_rounds": self.n_rounds,
            "n_holdout": len(self._holdout_rows),
            "dim": self.dim,
            "n_actions": self.n_actions,
            "dataset_seed": self.dataset_seed,
        }


class SyntheticLinearEnv:
    """Linear reward means over contexts drawn uniformly from a sphere.

    Contexts are x = (1, z) with z uniform on the unit sphere.  Each action
    has weights (intercept, direction) with intercept 0.8 / sqrt(K) and
    direction norm 0.6 / sqrt(K) (capped so means stay inside [0, 1]), which
    makes the stacked weight vector unit-norm for K >= 2.  Realized rewards
    add uniform noise on [-noise, noise] and clip to [0, 1]; since means
    stay at least `noise` away from both ends for noise <= 0.1 and K <= 16,
    clipping almost never binds and means stay realizable.

    With `margin` set, context draws are rejection-sampled until the gap
    between the best and second-best mean is at least `margin`, producing a
    hard-margin instance.
    """

    def __init__(
        self,
        dim: int,
        n_actions: int,
        horizon: int,
        dataset_seed: int,
        noise: float = 0.1,
        margin: float | None = None,
        holdout_size: int = 1000,
        max_rejections: int = 10_000,
    ):
        if dim < 2:
            raise ValueError("dim must be >= 2 (one intercept plus sphere coords)")
        if not 0.0 <= noise <= 0.5:
            raise ValueError("noise must lie in [0, 0.5]")
        if margin is not None and margin <= 0:
            raise ValueError("margin must be positive when set")
        self.dim = dim
        self.n_actions = n_actions
        self.horizon = horizon
        self.dataset_seed = dataset_seed
        self.noise = noise
        self.margin = margin
        self.max_rejections = max_rejections

        k = n_actions
        self.intercept = 0.8 / math.sqrt(k)
        self.direction_norm = min(0.6 / math.sqrt(k), 1.0 - self.intercept)
        world_rng = _stream(dataset_seed, STREAM_WORLD)
        dirs = world_rng.normal(size=(k, dim - 1))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        self.thetas = np.hstack(
            [np.full((k, 1), self.intercept), self.direction_norm * dirs]
        )

        ctx_rng = _stream(dataset_seed, STREAM_CONTEXT)
        self._features = self._draw_features(ctx_rng, horizon)
        self._contexts = [
            Context(features=self._features[i], key=i) for i in range(horizon)
        ]
        self._noise_draws = _stream(dataset_seed, STREAM_REWARD).uniform(
            -noise, noise, size=(horizon, k)
        )
        hold_rng = _stream(dataset_seed, STREAM_HOLDOUT)
        self._holdout_features = self._draw_features(hold_rng, holdout_size)
        self._holdout_contexts = [
            Context(features=self._holdout_features[i], key=None)
            for i in range(holdout_size)
        ]

    def _draw_features(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.empty((count, self.dim))
        for i in range(count):
            out[i] = self._draw_one(rng)
        return out

    def _draw_one(self, rng: np.random.Generator) -> np.ndarray:
        for _ in range(self.max_rejections):
            z = rng.normal(size=self.dim - 1)
            norm = np.linalg.norm(z)
            if norm == 0.0:
                continue
            x = np.concatenate([[1.0], z / norm])
            if self.margin is None:
                return x
            means = np.sort(self.thetas @ x)
            if means[-1] - means[-2] >= self.margin:
                return x
        raise RuntimeError(
            f"could not draw a context with margin {self.margin} "
            f"in {self.max_rejections} tries"
        )

    @property
    def n_rounds(self) -> int:
        return self.horizon

    def context_at(self, t: int) -> Context:
        return self._contexts[t - 1]

    def mean_rewards(self, context: Context) -> np.ndarray:
        return self.thetas @ context.features

    def realized_rewards(self, t: int, context: Context) -> np.ndarray:
        means = self.thetas @ context.features
        return np.clip(means + self._noise_draws[t - 1], 0.0, 1.0)

    def holdout_contexts(self) -> list[Context]:
        return self._holdout_contexts

    def holdout_means(self) -> np.ndarray:
        return self._holdout_features @ self.thetas.T

    def audit_margin(self, n_samples: int = 10_000) -> float:
        """Smallest top-two mean gap over fresh audit draws."""
        rng = _stream(self.dataset_seed, STREAM_AUDIT)
        worst = math.inf
        for _ in range(n_samples):
            x = self._draw_one(rng)
            means = np.sort(self.thetas @ x)
            worst = min(worst, float(means[-1] - means[-2]))
        return worst

    def sample_moment_inputs(self, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
        """(phi, means) arrays for moment diagnostics.

        phi has shape (n, K, K * dim) using one-hot action blocks; means has
        shape (n, K).
        """
        rng = _stream(self.dataset_seed, STREAM_AUDIT)
        feats = self._draw_features(rng, n_samples)
        k, d = self.n_actions, self.dim
        phi = np.zeros((n_samples, k, k * d))
        for a in range(k):
            phi[:, a, a * d : (a + 1) * d] = feats
        return phi, feats @ self.thetas.T

    def descriptor(self) -> dict:
        return {
            "environment": "synthetic",
            "dim": self.dim,
            "n_actions": self.n_actions,
            "n_train_rounds": self.horizon,
            "noise": self.noise,
            "margin": self.margin,
            "n_holdout": len(self._holdout_contexts),
            "dataset_seed": self.dataset_seed,
        }


def hard_tabular_class(n_contexts: int, good_reward: float) -> "np.ndarray":
    """Predictor table for the hard first-visit instance.

    Predictor 0 is the truth: reward `good_reward` on action 0, reward 0 on
    action 1, at every context.  Predictor i (1 <= i <= N) agrees with the
    truth except at context i - 1, where it swaps to (0, 1).  Until a
    context is visited, its swapped predictor keeps zero risk and promises
    reward 1 on the bad action there.
    """
    if n_contexts < 1:
        raise ValueError("n_contexts must be >= 1")
    if not 0.0 < good_reward < 1.0:
        raise ValueError("good_reward must lie in (0, 1)")
    values = np.zeros((n_contexts + 1, n_contexts, 2))
    values[:, :, 0] = good_reward
    for i in range(1, n_contexts + 1):
        values[i, i - 1, 0] = 0.0
        values[i, i - 1, 1] = 1.0
    return values


class HardTabularEnv:
    """Noiseless tabular instance forcing one error per new context.

    Contexts are uniform over N states; action 0 always pays `good_reward`
    and action 1 always pays 0, so every play of action 1 costs
    `good_reward` in regret.  Paired with `hard_tabular_class` and a zero
    confidence radius, a version-space learner keeps the swapped predictor
    for every unvisited state alive, so the bad action stays plausible (and
    optimistic) exactly until the state is first visited.
    """

    def __init__(
        self, n_contexts: int, good_reward: float, horizon: int, dataset_seed: int
    ):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.n_contexts = n_contexts
        self.good_reward = good_reward
        self.horizon = horizon
        self.dataset_seed = dataset_seed
        self.n_actions = 2
        self.dim = 1
        rng = _stream(dataset_seed, STREAM_CONTEXT)
        self._keys = rng.integers(0, n_contexts, size=horizon)
        self._contexts = [
            Context(features=np.array([float(k)]), key=int(k)) for k in self._keys
        ]
        self._holdout_contexts = [
            Context(features=np.array([float(k)]), key=k) for k in range(n_contexts)
        ]
        self._means = np.array([good_reward, 0.0])

    @property
    def n_rounds(self) -> int:
        return self.horizon

    def function_class_values(self) -> np.ndarray:
        return hard_tabular_class(self.n_contexts, self.good_reward)

    def context_at(self, t: int) -> Context:
        return self._contexts[t - 1]

    def mean_rewards(self, context: Context) -> np.ndarray:
        return self._means.copy()

    def realized_rewards(self, t: int, context: Context) -> np.ndarray:
        return self._means.copy()

    def holdout_contexts(self) -> list[Context]:
        return self._holdout_contexts

    def holdout_means(self) -> np.ndarray:
        return np.tile(self._means, (self.n_contexts, 1))

    def expected_distinct(self, horizon: int) -> float:
        """Expected number of distinct states among `horizon` uniform draws."""
        n = self.n_contexts
        return n * (1.0 - (1.0 - 1.0 / n) ** horizon)

    def descriptor(self) -> dict:
        return {
            "environment": "hard_tabular",
            "n_contexts": self.n_contexts,
            "good_reward": self.good_reward,
            "n_train_rounds": self.horizon,
            "n_actions": self.n_actions,
            "dataset_seed": self.dataset_seed,
        }
