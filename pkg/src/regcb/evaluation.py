"""Run loop, evaluation protocol, diagnostics, and delimited output.

A run drives one learner through one environment under an epoch schedule,
logging every round and periodically scoring the current policy on a held
out set (the expected reward of the learner's action distribution under the
true means, computed without touching learner state).  Helpers here also
cover the comparison protocol: supervised skylines, parameter grids,
normalized relative losses and their empirical CDFs, width and disagreement
series with log-log slope fits, and moment-based exploration diagnostics.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import BanditObservation, Schedule
from .learners import BanditLearner

ROUNDS_COLUMNS = (
    "t",
    "epoch",
    "action",
    "propensity",
    "reward",
    "width",
    "disagreement_size",
)


@dataclass
class RoundLog:
    t: int
    epoch: int
    action: int
    propensity: float
    reward: float
    width: float | None
    disagreement_size: int | None


@dataclass
class RunRecord:
    """Everything one run produced.

    `regrets` (per-round expected regret under the true means) stays in
    memory for tests and reports; the delimited outputs carry only the
    stable documented columns.
    """

    meta: dict
    rounds: list[RoundLog] = field(default_factory=list)
    validations: list[tuple[int, float]] = field(default_factory=list)
    regrets: np.ndarray | None = None

    @property
    def final_validation(self) -> float:
        return self.validations[-1][1]


def validation_interval(horizon: int, n_checkpoints: int = 15) -> int:
    """Rounds between holdout evaluations: ceil(horizon / n_checkpoints)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return int(math.ceil(horizon / n_checkpoints))


def validate_policy(learner: BanditLearner, env) -> float:
    """Expected holdout reward of the learner's current action distribution.

    Pure with respect to the learner: only `action_probs_batch` is called.
    """
    contexts = env.holdout_contexts()
    means = env.holdout_means()
    probs = learner.action_probs_batch(contexts)
    return float(np.mean(np.sum(probs * means, axis=1)))


def run_experiment(
    learner: BanditLearner,
    env,
    schedule: Schedule,
    horizon: int,
    rng: np.random.Generator,
    meta: dict | None = None,
    n_checkpoints: int = 15,
) -> RunRecord:
    """Drive one learner/environment pair for `horizon` rounds.

    Epoch boundaries fire before the round they start.  If the environment
    has fewer rounds than requested, the run truncates with a warning.
    """
    if horizon > env.n_rounds:
        warnings.warn(
            f"horizon {horizon} exceeds the {env.n_rounds} available rounds; truncating"
        )
        horizon = env.n_rounds
    if schedule.horizon < horizon:
        raise ValueError("schedule horizon shorter than the run horizon")
    interval = validation_interval(horizon, n_checkpoints)
    starts = set(schedule.starts)
    record = RunRecord(meta=dict(meta or {}))
    regrets = np.empty(horizon)
    epoch = 0
    for t in range(1, horizon + 1):
        if t in starts:
            epoch += 1
            learner.on_epoch_boundary(t)
        context = env.context_at(t)
        decision = learner.decide(context, rng)
        reward_vec = env.realized_rewards(t, context)
        reward = float(reward_vec[decision.action])
        means = env.mean_rewards(context)
        regrets[t - 1] = float(np.max(means) - means[decision.action])
        record.rounds.append(
            RoundLog(
                t=t,
                epoch=epoch,
                action=decision.action,
                propensity=decision.propensity,
                reward=reward,
                width=decision.width,
                disagreement_size=decision.n_plausible,
            )
        )
        learner.observe(
            BanditObservation(context, decision.action, reward, decision.propensity)
        )
        if t % interval == 0 or t == horizon:
            record.validations.append((t, validate_policy(learner, env)))
    record.regrets = regrets
    record.meta.setdefault("horizon", horizon)
    record.meta.setdefault("validation_interval", interval)
    return record


def supervised_skyline(env, lam: float = 1.0) -> float:
    """Holdout value of a full-information least-squares fit.

    Fits one ridge regression per action on every training context with the
    true mean reward as target, then plays greedily on the holdout.  This is
    the ceiling the bandit learners are normalized against.
    """
    n = env.n_rounds
    features = np.stack([env.context_at(t).features for t in range(1, n + 1)])
    means = np.stack([env.mean_rewards(env.context_at(t)) for t in range(1, n + 1)])
    d = features.shape[1]
    gram = lam * np.eye(d) + features.T @ features
    thetas = np.linalg.solve(gram, features.T @ means).T  # (K, d)
    hold_feats = np.stack([x.features for x in env.holdout_contexts()])
    hold_means = env.holdout_means()
    greedy = np.argmax(hold_feats @ thetas.T, axis=1)
    return float(np.mean(hold_means[np.arange(len(greedy)), greedy]))


def parameter_grid(kind: str, n_points: int = 8) -> list[float]:
    """Log-spaced sweep grids.

    "confidence" spans 1e2 down to 1e-8; "epsilon" spans 1e-1 down to 1e-8.
    Both are decreasing with endpoints included.
    """
    if kind == "confidence":
        return [float(v) for v in np.logspace(2, -8, n_points)]
    if kind == "epsilon":
        return [float(v) for v in np.logspace(-1, -8, n_points)]
    raise ValueError(f"unknown grid kind {kind!r}")


def normalized_relative_loss(values: dict) -> dict:
    """(best - v) / (best - worst) per entry; all zeros when all are equal."""
    vals = np.array(list(values.values()), dtype=float)
    best = vals.max()
    spread = best - vals.min()
    if spread == 0.0:
        return {k: 0.0 for k in values}
    return {k: float((best - v) / spread) for k, v in values.items()}


def loss_cdf(losses) -> list[tuple[float, int]]:
    """Empirical CDF points (x, count of losses <= x).

    Evaluation points are the observed losses plus 0 and 0.99, so curves
    are comparable near the interesting ends.
    """
    losses = [float(v) for v in losses]
    xs = sorted(set(losses) | {0.0, 0.99})
    return [(x, sum(1 for v in losses if v <= x)) for x in xs]


def sliding_mean(values, window: int = 20) -> np.ndarray:
    """Trailing mean over up to `window` entries (prefixes use what exists)."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(values)])
    n = len(values)
    lo = np.maximum(np.arange(n) - window + 1, 0)
    return (csum[np.arange(n) + 1] - csum[lo]) / (np.arange(n) + 1 - lo)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    n_used: int
    n_dropped: int


def slope_fit(t, values) -> SlopeFit:
    """Least-squares slope of log(values) against log(t).

    Nonpositive entries cannot be logged and are dropped (counted); needs at
    least two surviving points.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape:
        raise ValueError("t and values must have matching shapes")
    mask = (values > 0.0) & (t > 0.0)
    n_used = int(mask.sum())
    n_dropped = int(len(values) - n_used)
    if n_used < 2:
        raise ValueError("need at least two positive points for a slope fit")
    slope, intercept = np.polyfit(np.log(t[mask]), np.log(values[mask]), deg=1)
    return SlopeFit(float(slope), float(intercept), n_used, n_dropped)


def empirical_margin(fstar_values: np.ndarray) -> float:
    """Smallest top-two gap of the true means across sampled contexts.

    With a single action there is no runner-up; the margin is 1 by
    convention.
    """
    fstar_values = np.asarray(fstar_values, dtype=float)
    if fstar_values.ndim != 2:
        raise ValueError("fstar_values must have shape (n_samples, n_actions)")
    if fstar_values.shape[1] == 1:
        return 1.0
    part = np.sort(fstar_values, axis=1)
    return float(np.min(part[:, -1] - part[:, -2]))


def u_lambda_mask(fstar_values: np.ndarray, lam: float) -> np.ndarray:
    """Boolean (n, K) mask: action a leads at context i by at least lam."""
    fstar_values = np.asarray(fstar_values, dtype=float)
    n, k = fstar_values.shape
    if k == 1:
        return np.ones((n, 1), dtype=bool)
    mask = np.zeros((n, k), dtype=bool)
    for a in range(k):
        others = np.delete(fstar_values, a, axis=1).max(axis=1)
        mask[:, a] = fstar_values[:, a] >= others + lam
    return mask


def psi_min(matrix: np.ndarray, sparsity: int, max_supports: int = 20_000) -> float:
    """Smallest eigenvalue over principal submatrices on supports of size
    min(2 * sparsity, dim)."""
    matrix = np.asarray(matrix, dtype=float)
    d = matrix.shape[0]
    if matrix.shape != (d, d):
        raise ValueError("matrix must be square")
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    size = min(2 * sparsity, d)
    n_supports = math.comb(d, size)
    if n_supports > max_supports:
        raise ValueError(
            f"{n_supports} supports of size {size} exceed the enumeration cap"
        )
    worst = math.inf
    for support in itertools.combinations(range(d), size):
        sub = matrix[np.ix_(support, support)]
        worst = min(worst, float(np.linalg.eigvalsh(sub)[0]))
    return worst


@dataclass(frozen=True)
class MomentDiagnostics:
    lam: float
    sparsity: int | None
    lambda_min_full: float
    lambda_min_masked: float
    l1_bound: float
    l2_bound: float
    l1_sparse_bound: float | None
    l2_sparse_bound: float | None
    empirical_margin: float
    degenerate_full: bool
    degenerate_masked: bool


def moment_bounds(
    phi: np.ndarray,
    fstar_values: np.ndarray,
    lam: float = 0.0,
    sparsity: int | None = None,
    tol: float = 1e-12,
) -> MomentDiagnostics:
    """Moment-matrix exploration diagnostics from sampled features.

    `phi` has shape (n, K, D) and `fstar_values` shape (n, K).  The full
    moment matrix sums phi phi^T over actions and averages over samples; the
    masked variant keeps only (context, action) pairs where the action leads
    by at least `lam`.  Bounds are K over the smallest eigenvalue (infinite,
    with a degeneracy flag, when the eigenvalue is not positive), and the
    sparse variants are 2 K s over the restricted eigenvalue.
    """
    phi = np.asarray(phi, dtype=float)
    fstar_values = np.asarray(fstar_values, dtype=float)
    if phi.ndim != 3:
        raise ValueError("phi must have shape (n_samples, n_actions, dim)")
    n, k, _ = phi.shape
    if fstar_values.shape != (n, k):
        raise ValueError("fstar_values must have shape (n_samples, n_actions)")
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    full = np.einsum("nad,nae->de", phi, phi) / n
    mask = u_lambda_mask(fstar_values, lam).astype(float)
    masked = np.einsum("na,nad,nae->de", mask, phi, phi) / n

    lam_full = float(np.linalg.eigvalsh(full)[0])
    lam_masked = float(np.linalg.eigvalsh(masked)[0])
    degenerate_full = lam_full <= tol
    degenerate_masked = lam_masked <= tol
    l1 = math.inf if degenerate_full else k / lam_full
    l2 = math.inf if degenerate_masked else k / lam_masked

    l1_sparse = l2_sparse = None
    if sparsity is not None:
        psi_full = psi_min(full, sparsity)
        psi_masked = psi_min(masked, sparsity)
        l1_sparse = math.inf if psi_full <= tol else 2.0 * k * sparsity / psi_full
        l2_sparse = math.inf if psi_masked <= tol else 2.0 * k * sparsity / psi_masked

    return MomentDiagnostics(
        lam=lam,
        sparsity=sparsity,
        lambda_min_full=lam_full,
        lambda_min_masked=lam_masked,
        l1_bound=l1,
        l2_bound=l2,
        l1_sparse_bound=l1_sparse,
        l2_sparse_bound=l2_sparse,
        empirical_margin=empirical_margin(fstar_values),
        degenerate_full=degenerate_full,
        degenerate_masked=degenerate_masked,
    )


def derive_dataset_seed(seed_dataset: int, replicate: int) -> int:
    """Decorrelated per-replicate dataset seed, stable across platforms."""
    seq = np.random.SeedSequence((seed_dataset, replicate))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def algo_streams(
    seed_algo: int, replicate: int, param_index: int = 0, count: int = 2
) -> list[np.random.Generator]:
    """Learner-side random streams, independent of the dataset streams.

    Stream 0 samples actions; stream 1 drives learner-internal resampling
    (bootstrap replicates).
    """
    seq = np.random.SeedSequence((seed_algo, replicate, param_index))
    return [np.random.default_rng(child) for child in seq.spawn(count)]


def derive_algo_rng(
    seed_algo: int, replicate: int, param_index: int = 0
) -> np.random.Generator:
    """The action-sampling stream (stream 0 of `algo_streams`)."""
    return algo_streams(seed_algo, replicate, param_index)[0]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rounds_csv(path: str, rounds: list[RoundLog]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ROUNDS_COLUMNS)
        for row in rounds:
            writer.writerow(
                [
                    row.t,
                    row.epoch,
                    row.action,
                    _fmt(row.propensity),
                    _fmt(row.reward),
                    _fmt(row.width),
                    _fmt(row.disagreement_size),
                ]
            )


def write_validation_csv(path: str, validations: list[tuple[int, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "reward"])
        for t, reward in validations:
            writer.writerow([t, _fmt(reward)])


def write_run(record: RunRecord, out_dir: str) -> None:
    """Write rounds.csv, validation.csv, and meta.json into `out_dir`.

    meta.json goes last and marks the run complete for resume logic.
    """
    os.makedirs(out_dir, exist_ok=True)
    write_rounds_csv(os.path.join(out_dir, "rounds.csv"), record.rounds)
    write_validation_csv(os.path.join(out_dir, "validation.csv"), record.validations)
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as handle:
        json.dump(record.meta, handle, sort_keys=True, indent=2)
        handle.write("\n")


def read_rounds_csv(path: str) -> dict[str, np.ndarray]:
    """Columns of rounds.csv as arrays; blanks become NaN (width) or -1."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != ROUNDS_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    cols = list(zip(*rows)) if rows else [[] for _ in ROUNDS_COLUMNS]
    for name, raw in zip(ROUNDS_COLUMNS, cols):
        if name in ("t", "epoch", "action"):
            out[name] = np.array([int(v) for v in raw], dtype=int)
        elif name == "disagreement_size":
            out[name] = np.array([int(v) if v else -1 for v in raw], dtype=int)
        else:
            out[name] = np.array(
                [float(v) if v else math.nan for v in raw], dtype=float
            )
    return out


def read_validation_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != ("t", "reward"):
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = list(reader)
    t = np.array([int(r[0]) for r in rows], dtype=int)
    reward = np.array([float(r[1]) for r in rows], dtype=float)
    return t, reward


def read_meta(run_dir: str) -> dict:
    with open(os.path.join(run_dir, "meta.json"), "r", encoding="utf-8") as handle:
        return json.load(handle)
