"""Shared types and epoch/radius schedules for the bandit engine.

The learning loop is organized in epochs: predictors and confidence sets are
recomputed only at epoch starts and stay frozen in between, while sufficient
statistics keep accumulating every round.  This module owns the epoch start
grids, the per-epoch confidence radii, and the small record types passed
between the environment, the learners, and the evaluation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SCHEDULE_MODES = ("theory_doubling", "practical_sqrt2", "every_round")


class _Unbounded:
    """Sentinel for an unconstrained confidence radius (whole function class)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"


UNBOUNDED = _Unbounded()


def is_unbounded(radius) -> bool:
    """True if `radius` means "no constraint" (sentinel or infinite float)."""
    if radius is UNBOUNDED or radius is None:
        return True
    return isinstance(radius, float) and math.isinf(radius)


@dataclass(frozen=True)
class Context:
    """One observed context.

    `features` is the shared feature vector (used by per-action one-hot
    blocking and by product classes).  `per_action` optionally carries a
    (K, d) matrix of action-dependent feature rows.  `key` identifies the
    context inside enumerable context spaces (tabular function classes).
    """

    features: np.ndarray
    per_action: np.ndarray | None = None
    key: int | None = None

    def action_features(self, action: int) -> np.ndarray:
        if self.per_action is None:
            raise ValueError("context has no per-action feature rows")
        return self.per_action[action]


@dataclass(frozen=True)
class BanditObservation:
    """A logged interaction round: context, chosen action, realized reward."""

    context: Context
    action: int
    reward: float
    propensity: float

    def __post_init__(self):
        if self.action < 0:
            raise ValueError(f"action must be nonnegative, got {self.action}")
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"reward must lie in [0, 1], got {self.reward}")
        if not 0.0 < self.propensity <= 1.0:
            raise ValueError(
                f"propensity must lie in (0, 1], got {self.propensity}"
            )


@dataclass(frozen=True)
class WeightedRegressionExample:
    """Weighted squared-loss example ((x, a) -> y with weight w)."""

    weight: float
    context: Context
    action: int
    target: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")


def validate_reward_vector(rewards: np.ndarray, n_actions: int) -> np.ndarray:
    """Check shape (K,) and range [0, 1]; returns the array unchanged."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.shape != (n_actions,):
        raise ValueError(
            f"reward vector has shape {rewards.shape}, expected ({n_actions},)"
        )
    if np.any(rewards < 0.0) or np.any(rewards > 1.0):
        raise ValueError("reward vector has entries outside [0, 1]")
    return rewards


def epoch_starts(mode: str, horizon: int) -> list[int]:
    """Epoch start rounds (1-indexed, strictly increasing, first start = 1).

    theory_doubling: starts at 1, 2, 4, 8, ... while <= horizon.
    practical_sqrt2: epoch i (0-indexed) has length round(2**(i/2)) with
        ties rounded up, so lengths go 1, 1, 2, 3, 4, 6, 8, 11, 16, ...
    every_round: every round starts a new epoch (used by idealized runs
        that refresh confidence sets continuously).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if mode == "theory_doubling":
        starts = []
        m = 1
        while 2 ** (m - 1) <= horizon:
            starts.append(2 ** (m - 1))
            m += 1
        return starts
    if mode == "practical_sqrt2":
        starts = []
        t = 1
        i = 0
        while t <= horizon:
            starts.append(t)
            t += int(math.floor(2 ** (i / 2.0) + 0.5))
            i += 1
        return starts
    if mode == "every_round":
        return list(range(1, horizon + 1))
    raise ValueError(f"unknown schedule mode {mode!r}; expected one of {SCHEDULE_MODES}")


def c_delta(n_base_predictors: int, n_actions: int, horizon: int, delta: float) -> float:
    """Confidence constant 16 * ln(2 G K T^2 / delta) for product classes.

    G counts base predictors per action.  Natural log throughout.
    """
    if n_base_predictors < 1 or n_actions < 1 or horizon < 1:
        raise ValueError("class size, action count, and horizon must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 16.0 * math.log(2.0 * n_base_predictors * n_actions * horizon**2 / delta)


def c_delta_joint(n_predictors: int, horizon: int, delta: float) -> float:
    """Confidence constant 16 * ln(2 |F| T^2 / delta) for joint classes."""
    if n_predictors < 1 or horizon < 1:
        raise ValueError("class size and horizon must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 16.0 * math.log(2.0 * n_predictors * horizon**2 / delta)


def c_delta_covering(ln_class_size: float, horizon: int, delta: float) -> float:
    """Confidence constant with the class size given on the log scale.

    Matches c_delta_joint when ln_class_size = ln(|F|); continuous classes
    pass a covering-number proxy instead.
    """
    if ln_class_size < 0:
        raise ValueError("ln_class_size must be nonnegative")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 16.0 * (math.log(2.0 * horizon**2 / delta) + ln_class_size)


def beta_schedule(n_epochs: int, epoch: int, confidence_constant: float, epoch_start: int):
    """Normalized confidence radius for the given epoch.

    Epoch 1 has no data, so its version space is the whole class; callers get
    the UNBOUNDED sentinel rather than a large float.  For later epochs the
    radius is (M - m + 1) * C / (tau_m - 1), nonincreasing in m.
    """
    if not 1 <= epoch <= n_epochs:
        raise ValueError(f"epoch {epoch} outside 1..{n_epochs}")
    if epoch == 1:
        return UNBOUNDED
    if epoch_start < 2:
        raise ValueError(f"epoch {epoch} must start at round >= 2, got {epoch_start}")
    return (n_epochs - epoch + 1) * confidence_constant / (epoch_start - 1)


def to_sum_radius(normalized_radius, n_examples: int):
    """Convert a normalized (per-example) radius to the summed-loss scale.

    Elimination thresholds and the binary search both work with summed
    squared losses, while the schedule above is stated per example.  This is
    the single place the conversion happens.
    """
    if is_unbounded(normalized_radius):
        return UNBOUNDED
    if n_examples < 1:
        raise ValueError(f"need at least one example, got {n_examples}")
    return float(normalized_radius) * n_examples


def warm_start_epochs(
    n_epochs: int,
    l1_moment_bound: float,
    confidence_constant: float,
    margin: float,
) -> int:
    """Number of initial epochs the optimistic variant plays uniformly.

    Computed as 2 + floor(log2(1 + (2M + 3) * L1 * C' / margin^2)); the
    uniform phase ends once version-space widths are provably below the
    decision margin.
    """
    if n_epochs < 1:
        raise ValueError(f"n_epochs must be >= 1, got {n_epochs}")
    if l1_moment_bound <= 0 or confidence_constant <= 0:
        raise ValueError("moment bound and confidence constant must be positive")
    if not 0.0 < margin <= 1.0:
        raise ValueError(f"margin must lie in (0, 1], got {margin}")
    inner = 1.0 + (2 * n_epochs + 3) * l1_moment_bound * confidence_constant / margin**2
    return 2 + int(math.floor(math.log2(inner)))


@dataclass(frozen=True)
class Schedule:
    """Epoch grid plus the per-epoch confidence radius rule.

    `radius_mode` is one of:
      - "constant": every epoch beyond the first uses `radius_value` on the
        summed-loss scale, directly comparable to summed squared error.
      - "theory": epoch m uses the normalized beta_schedule value with
        constant `radius_value` (converted to the summed scale per epoch).
      - "unbounded": every epoch uses the whole class.
    """

    mode: str
    horizon: int
    radius_mode: str = "constant"
    radius_value: float = 1.0
    warm_start: int = 0
    starts: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.radius_mode not in ("constant", "theory", "unbounded"):
            raise ValueError(f"unknown radius_mode {self.radius_mode!r}")
        if self.radius_mode != "unbounded" and self.radius_value < 0:
            raise ValueError("radius_value must be nonnegative")
        if self.warm_start < 0:
            raise ValueError("warm_start must be nonnegative")
        object.__setattr__(
            self, "starts", tuple(epoch_starts(self.mode, self.horizon))
        )

    @property
    def n_epochs(self) -> int:
        return len(self.starts)

    def epoch_of_round(self, t: int) -> int:
        """1-indexed epoch containing round t."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside 1..{self.horizon}")
        return int(np.searchsorted(np.asarray(self.starts), t, side="right"))

    def radius_for_epoch(self, epoch: int):
        """Summed-scale radius for the given epoch (UNBOUNDED for epoch 1)."""
        if not 1 <= epoch <= self.n_epochs:
            raise ValueError(f"epoch {epoch} outside 1..{self.n_epochs}")
        if epoch == 1 or self.radius_mode == "unbounded":
            return UNBOUNDED
        n_examples = self.starts[epoch - 1] - 1
        if self.radius_mode == "constant":
            return float(self.radius_value)
        normalized = beta_schedule(
            self.n_epochs, epoch, self.radius_value, self.starts[epoch - 1]
        )
        return to_sum_radius(normalized, n_examples)

    def in_warm_start(self, t: int) -> bool:
        """True while the optimistic variant should still play uniformly."""
        if self.warm_start <= 0:
            return False
        cutoff_epoch = min(self.warm_start, self.n_epochs)
        return t < self.starts[cutoff_epoch - 1]


def history_matrices(
    history: Sequence[WeightedRegressionExample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack a history into (weights, features, actions, targets) arrays."""
    n = len(history)
    if n == 0:
        raise ValueError("history is empty")
    d = history[0].context.features.shape[0]
    weights = np.empty(n)
    feats = np.empty((n, d))
    actions = np.empty(n, dtype=int)
    targets = np.empty(n)
    for i, ex in enumerate(history):
        weights[i] = ex.weight
        feats[i] = ex.context.features
        actions[i] = ex.action
        targets[i] = ex.target
    return weights, feats, actions, targets
