"""Acceptance suite: one test per headline requirement.

Each test prints one `[PASS] name: details` line on success (run with
`pytest tests/test_acceptance.py -v -s` to see them); a failing criterion
shows up as a normal pytest failure for that test.  The suite exercises the
package end to end and takes roughly half a minute.
"""

import itertools
import json
import math
import os
import time

import numpy as np
import pytest

from regcb.core import (
    BanditObservation,
    Context,
    Schedule,
    UNBOUNDED,
    c_delta_covering,
    is_unbounded,
)
from regcb.confidence import (
    FiniteProductVersionSpace,
    RidgeProbeProblem,
    bin_search,
    binsearch_loop_budget,
    closed_form_ridge_bounds,
    plausible_actions,
)
from regcb.environments import (
    HardTabularEnv,
    SyntheticLinearEnv,
    hard_tabular_class,
)
from regcb.evaluation import (
    derive_algo_rng,
    derive_dataset_seed,
    moment_bounds,
    psi_min,
    read_validation_csv,
    run_experiment,
    sliding_mean,
    slope_fit,
    validate_policy,
)
from regcb.learners import (
    EpsilonGreedyLearner,
    FiniteAdapter,
    ProductRidgeAdapter,
    RegCBLearner,
    UniformLearner,
    bootstrap_act,
    reduce_observation,
)
from regcb.oracles import FiniteClass, FiniteProductClass, RidgeState
from regcb import cli


def report(name: str, details: str) -> None:
    print(f"[PASS] {name}: {details}")


# ------------------------------------------------------------ criteria 1 + 2


@pytest.fixture(scope="module")
def binsearch_sweep():
    """120 random ridge instances; returns (records, elapsed_seconds).

    Each record is (kind, result, exact_clipped_bound, alpha).
    """
    rng = np.random.default_rng(7)
    betas = (0.01, 0.1, 1.0)
    alpha = 1e-3
    records = []
    start = time.perf_counter()
    for i in range(120):
        d = int(rng.integers(1, 11))
        n = int(rng.integers(1, 201))
        lam = 0.0 if (i % 10 == 0 and n >= d) else 1.0
        state = RidgeState(d, lam=lam)
        for _ in range(n):
            state.update(1.0, rng.normal(size=d), float(rng.uniform()))
        phi = rng.normal(size=d)
        beta = betas[i % 3]
        raw_lo, raw_hi = closed_form_ridge_bounds(
            state.solve(), state.inverse(), phi, beta
        )
        problem = RidgeProbeProblem(state, phi)
        for kind, exact in (("high", min(raw_hi, 1.0)), ("low", max(raw_lo, 0.0))):
            result = bin_search(kind, problem, beta, alpha)
            records.append((kind, result, exact, alpha))
    return records, time.perf_counter() - start


def test_01_binsearch_matches_closed_form(binsearch_sweep):
    records, elapsed = binsearch_sweep
    assert len(records) >= 200  # >= 100 instances, High and Low each
    worst = 0.0
    for kind, result, exact, alpha in records:
        gap = abs(result.value - exact)
        worst = max(worst, gap)
        assert gap <= alpha, (kind, result.value, exact)
    assert elapsed < 5.0, f"sweep took {elapsed:.2f}s"
    report(
        "binsearch-matches-closed-form",
        f"{len(records)} bounds, worst gap {worst:.2e} <= 1e-3, {elapsed:.2f}s",
    )


def test_02_binsearch_call_budget(binsearch_sweep):
    records, _ = binsearch_sweep
    violations = 0
    for kind, result, _, alpha in records:
        budget = binsearch_loop_budget(kind, result.z0, alpha)
        if result.loop_calls > budget:
            violations += 1
        assert result.oracle_calls == result.loop_calls + 2
    assert violations == 0
    report(
        "binsearch-call-budget",
        f"0 budget violations over {len(records)} searches",
    )


# --------------------------------------------------------------- criterion 3


def test_03_first_visit_lower_bound():
    n_contexts, good_reward, horizon, n_seeds = 50, 0.5, 2000, 20
    checkpoints = (100, 500, 1000, 2000)
    prefix_exposures = {
        v: {tp: [] for tp in checkpoints} for v in ("regcb-elim", "regcb-opt")
    }
    exposures = {v: [] for v in prefix_exposures}
    for rep in range(n_seeds):
        env = HardTabularEnv(
            n_contexts, good_reward, horizon, derive_dataset_seed(0, rep)
        )
        for variant, name in (("elimination", "regcb-elim"), ("optimistic", "regcb-opt")):
            adapter = FiniteAdapter(FiniteClass(env.function_class_values()))
            schedule = Schedule(
                "every_round", horizon, radius_mode="constant", radius_value=0.0
            )
            learner = RegCBLearner(variant, adapter, schedule)
            record = run_experiment(
                learner, env, schedule, horizon, derive_algo_rng(0, rep)
            )
            stats = cli.first_visit_stats(record, env, name)
            assert stats["errs_only_on_first_visits"], (name, rep)
            exposures[name].append(stats["exposure_regret"])
            # with errors exactly on first visits, the prefix exposure is the
            # gap times the number of distinct contexts in the prefix
            keys = [env.context_at(row.t).key for row in record.rounds]
            for tp in checkpoints:
                distinct = len(set(keys[:tp]))
                prefix_exposures[name][tp].append(good_reward * distinct)

    env = HardTabularEnv(n_contexts, good_reward, horizon, 0)
    details = []
    for name in exposures:
        mean_exposure = float(np.mean(exposures[name]))
        predicted = good_reward * env.expected_distinct(horizon)
        assert abs(mean_exposure - predicted) <= 0.1 * predicted, (name, mean_exposure)
        details.append(f"{name} {mean_exposure:.2f} vs {predicted:.2f}")
        for tp in checkpoints:
            mean_prefix = float(np.mean(prefix_exposures[name][tp]))
            shape = good_reward * env.expected_distinct(tp)
            assert abs(mean_prefix - shape) <= 0.1 * shape, (name, tp, mean_prefix)
    report(
        "first-visit-lower-bound",
        "errors exactly on first visits over 20 seeds; regret at risk "
        + "; ".join(details)
        + f"; shape matches at T'={checkpoints}",
    )


# --------------------------------------------------------------- criterion 4


def test_04_disagreement_set_equals_brute_force():
    rng = np.random.default_rng(17)
    grid = np.arange(0.0, 1.01, 0.25)
    n_pairs = 1000
    for trial in range(n_pairs):
        n_base = int(rng.integers(2, 9))
        k = int(rng.integers(2, 5))
        n_contexts = int(rng.integers(1, 6))
        base_values = rng.choice(grid, size=(n_base, n_contexts))
        fpc = FiniteProductClass(base_values, n_actions=k)

        risks = np.zeros((k, n_base))
        for _ in range(int(rng.integers(0, 21))):
            a = int(rng.integers(0, k))
            key = int(rng.integers(0, n_contexts))
            target = float(rng.choice(grid))
            risks[a] += (base_values[:, key] - target) ** 2
        radius = [0.0, 0.1, 0.5, UNBOUNDED][trial % 4]

        vs = FiniteProductVersionSpace(fpc, risks, radius)
        key = int(rng.integers(0, n_contexts))
        context = Context(features=np.zeros(1), key=key)
        from_bounds = set(plausible_actions(vs.bounds(context)))

        survivors = []
        for a in range(k):
            if is_unbounded(radius):
                mask = np.ones(n_base, dtype=bool)
            else:
                mask = risks[a] <= risks[a].min() + radius
            survivors.append(np.flatnonzero(mask))
        tuples = np.array(list(itertools.product(*survivors)))
        vals = base_values[tuples, key]  # (n_tuples, k)
        row_max = vals.max(axis=1, keepdims=True)
        brute = set(np.flatnonzero((vals == row_max).any(axis=0)))
        assert from_bounds == brute, (trial, from_bounds, brute)
    report(
        "disagreement-set-equivalence",
        f"bounds-based set == brute-force argmax union on {n_pairs} pairs",
    )


# --------------------------------------------------------------- criterion 5


def test_05_version_space_soundness():
    dim, k, horizon, n_reps, delta = 5, 4, 512, 50, 0.1
    confidence = c_delta_covering(dim + math.log(k), horizon, delta)
    schedule = Schedule(
        "theory_doubling", horizon, radius_mode="theory", radius_value=confidence
    )
    n_epochs = 0
    violations = 0
    for rep in range(n_reps):
        env = SyntheticLinearEnv(
            dim=dim,
            n_actions=k,
            horizon=horizon,
            dataset_seed=derive_dataset_seed(21, rep),
            noise=0.1,
            holdout_size=10,
        )
        rng = derive_algo_rng(5, rep)
        states = [RidgeState(dim, lam=0.0) for _ in range(k)]
        for t in range(1, horizon + 1):
            if t in schedule.starts:
                epoch = schedule.epoch_of_round(t)
                radius = schedule.radius_for_epoch(epoch)
                if not is_unbounded(radius):
                    n_epochs += 1
                    excess = 0.0
                    for a in range(k):
                        best = states[a].risk(states[a].solve())
                        excess += states[a].risk(env.thetas[a]) - best
                    if excess > radius:
                        violations += 1
            context = env.context_at(t)
            action = int(rng.integers(0, k))
            reward = float(env.realized_rewards(t, context)[action])
            states[action].update(1.0, context.features, reward)
    fraction = violations / n_epochs
    assert fraction <= 0.15, f"{violations}/{n_epochs} epochs violate the radius"
    report(
        "version-space-soundness",
        f"{violations}/{n_epochs} epochs exceed the theory radius "
        f"(fraction {fraction:.3f} <= 0.15)",
    )


# --------------------------------------------------------- criteria 6 and 7


def synthetic_regcb_run(variant, dataset_seed, algo_seed, rep, horizon, margin=None):
    env = SyntheticLinearEnv(
        dim=5,
        n_actions=4,
        horizon=horizon,
        dataset_seed=derive_dataset_seed(dataset_seed, rep),
        noise=0.1,
        margin=margin,
        holdout_size=1000,
    )
    schedule = Schedule(
        "practical_sqrt2", horizon, radius_mode="constant", radius_value=1.0
    )
    learner = RegCBLearner(variant, ProductRidgeAdapter(5, 4, 1.0), schedule)
    record = run_experiment(
        learner, env, schedule, horizon, derive_algo_rng(algo_seed, rep)
    )
    return env, record


def test_06_regret_sanity():
    horizon, n_seeds = 20000, 5
    tail = horizon // 10
    details = []
    for variant, name in (("elimination", "regcb-elim"), ("optimistic", "regcb-opt")):
        first, last, lifts = [], [], []
        for rep in range(n_seeds):
            env, record = synthetic_regcb_run(variant, 11, 3, rep, horizon)
            first.append(float(np.mean(record.regrets[:tail])))
            last.append(float(np.mean(record.regrets[-tail:])))
            uniform_value = validate_policy(UniformLearner(4), env)
            lift = record.final_validation - uniform_value
            assert lift > 0.0, (name, rep, lift)
            lifts.append(lift)
        ratio = float(np.mean(last)) / float(np.mean(first))
        mean_lift = float(np.mean(lifts))
        assert ratio <= 0.25, (name, ratio)
        assert mean_lift >= 0.1, (name, mean_lift)
        details.append(f"{name} decay ratio {ratio:.3f}, lift {mean_lift:.3f}")
    report("regret-sanity", "; ".join(details) + f" over {n_seeds} seeds")


def test_07_width_decay_slope():
    _, record = synthetic_regcb_run("optimistic", 11, 3, 0, 20000, margin=0.2)
    t = np.array([row.t for row in record.rounds if row.width is not None])
    widths = np.array([row.width for row in record.rounds if row.width is not None])
    fit = slope_fit(t, sliding_mean(widths, 20))
    assert fit.slope <= -0.3, fit
    report(
        "width-decay-slope",
        f"optimistic-action width slope {fit.slope:.3f} <= -0.3 "
        f"({fit.n_used} rounds, margin 0.2)",
    )


# --------------------------------------------------------------- criterion 8


def test_08_moment_estimators():
    k = 3
    phi = np.tile(np.eye(k), (10, 1, 1))
    fstar = np.random.default_rng(1).uniform(size=(10, k))
    diag = moment_bounds(phi, fstar, lam=0.0)
    assert diag.l1_bound == k  # exact

    assert psi_min(np.diag([1.0, 2.0, 3.0]), 1) == 1.0  # exact

    lams = [0.0, 0.02, 0.05, 0.1, 0.2]
    for world in range(20):
        env = SyntheticLinearEnv(
            dim=4, n_actions=3, horizon=2, dataset_seed=derive_dataset_seed(33, world),
            holdout_size=2,
        )
        phi_w, fstar_w = env.sample_moment_inputs(300)
        bounds = [moment_bounds(phi_w, fstar_w, lam=lam).l2_bound for lam in lams]
        for lo, hi in zip(bounds, bounds[1:]):
            assert hi >= lo - 1e-9, (world, bounds)
    report(
        "moment-estimators",
        f"identity L1 == {k} exact; psi_min(diag(1,2,3), s=1) == 1 exact; "
        "masked bound monotone in the margin on 20 worlds",
    )


# --------------------------------------------------------------- criterion 9


def test_09_baseline_identities():
    # epsilon = 1 vs uniform: identical action streams under a shared seed
    horizon = 500
    env = SyntheticLinearEnv(
        dim=4, n_actions=3, horizon=horizon, dataset_seed=derive_dataset_seed(2, 0),
        holdout_size=10,
    )
    schedule = Schedule("practical_sqrt2", horizon)
    actions = {}
    for name, learner in (
        ("eps1", EpsilonGreedyLearner(1.0, ProductRidgeAdapter(4, 3))),
        ("uniform", UniformLearner(3)),
    ):
        record = run_experiment(
            learner, env, schedule, horizon, derive_algo_rng(9, 0)
        )
        actions[name] = [row.action for row in record.rounds]
    assert actions["eps1"] == actions["uniform"]

    # single-replicate bootstrap with no exploration bonus is plain greedy
    rng = np.random.default_rng(4)
    for _ in range(200):
        preds = rng.uniform(size=(1, int(rng.integers(2, 7))))
        assert bootstrap_act(preds, 0.0) == int(np.argmax(preds[0]))

    # expanded reduction frozen targets
    obs = BanditObservation(Context(features=np.zeros(1)), 1, 1.0, 0.25)
    targets = [ex.target for ex in reduce_observation(obs, "expanded", 3)]
    assert targets == [0.0, 4.0, 0.0]
    report(
        "baseline-identities",
        f"eps=1 == uniform over {horizon} rounds; bootstrap(N=1, coef=0) == greedy "
        "on 200 draws; expanded targets (0, 4, 0)",
    )


# -------------------------------------------------------------- criterion 10


def test_10_protocol_fidelity(tmp_path):
    horizon = 60
    cfg = {
        "algorithm": "epsilon-greedy",
        "environment": "synthetic",
        "horizon": horizon,
        "dim": 3,
        "n_actions": 2,
        "epsilon": 0.1,
        "holdout_size": 50,
        "seed_dataset": 1,
        "seed_algo": 2,
    }
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps(cfg))
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert cli.main(["sweep", "--config", str(config), "--out", out_a]) == 0
    assert cli.main(["sweep", "--config", str(config), "--out", out_b]) == 0

    runs = sorted(
        os.path.join(dirpath)
        for dirpath, _, files in os.walk(out_a)
        if "meta.json" in files
    )
    assert len(runs) == 40  # 8 parameters x 5 replicates

    interval = math.ceil(horizon / 15)
    expected_ts = sorted(set(range(interval, horizon + 1, interval)) | {horizon})
    for run in runs:
        t, _ = read_validation_csv(os.path.join(run, "validation.csv"))
        assert list(t) == expected_ts, run

    for run in runs:
        twin = run.replace(out_a, out_b, 1)
        for name in ("rounds.csv", "validation.csv", "meta.json"):
            with open(os.path.join(run, name), "rb") as fa:
                with open(os.path.join(twin, name), "rb") as fb:
                    assert fa.read() == fb.read(), (run, name)
    report(
        "protocol-fidelity",
        f"sweep wrote 8x5 runs, checkpoints every {interval} rounds, "
        "reruns byte-identical",
    )
