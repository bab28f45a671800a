"""Command-line interface: run, sweep, lowerbound, diag, aggregate.

Configs are flat JSON documents; unknown keys are rejected so typos fail
loudly.  Exit codes: 0 on success, 2 for configuration problems, 3 for
runtime failures.  The default output root is $REGCB_OUT_DIR, falling back
to ./runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import glob
import json
import math
import os
import sys

import numpy as np

from . import core, environments, evaluation, learners
from .oracles import FeatureMap, FiniteClass

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ALGORITHMS = ("regcb-elim", "regcb-opt", "epsilon-greedy", "bootstrap", "uniform")
ENVIRONMENTS = ("synthetic", "dataset", "hard_tabular")
ORACLES = ("ridge_product", "ridge_joint", "finite")


class ConfigError(Exception):
    pass


# key -> (type, default); None default means "no default" (maybe required).
CONFIG_KEYS = {
    "algorithm": (str, None),
    "environment": (str, None),
    "horizon": (int, None),
    "schedule": (str, "practical_sqrt2"),
    "radius_mode": (str, "constant"),
    "beta": (float, 1.0),
    "delta": (float, 0.1),
    "class_size_ln": (float, None),
    "bounds_method": (str, "auto"),
    "alpha_precision": (float, 1e-3),
    "lambda_reg": (float, 1.0),
    "warm_start": (int, 0),
    "epsilon": (float, None),
    "reduction": (str, None),
    "n_replicates": (int, 10),
    "oracle": (str, None),
    "seed_dataset": (int, 0),
    "seed_algo": (int, 0),
    "replicate": (int, 0),
    "out_dir": (str, None),
    "sweep_grid": (str, None),
    "sweep_replicates": (int, 5),
    "dim": (int, 5),
    "n_actions": (int, None),
    "noise": (float, 0.1),
    "margin": (float, None),
    "holdout_size": (int, 1000),
    "csv_path": (str, None),
    "label_column": (int, -1),
    "add_bias": (bool, True),
    "standardize": (bool, False),
    "has_header": (bool, False),
    "holdout_fraction": (float, 0.1),
    "reward_model": (str, "multiclass"),
    "n_contexts": (int, None),
    "good_reward": (float, 0.5),
}

INTERNAL_KEYS = ("_param_index",)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            cfg = json.load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def validate_config(cfg: dict) -> dict:
    unknown = [k for k in cfg if k not in CONFIG_KEYS and k not in INTERNAL_KEYS]
    if unknown:
        raise ConfigError(
            f"unknown config keys: {sorted(unknown)}; "
            f"allowed keys: {sorted(CONFIG_KEYS)}"
        )
    out: dict = {}
    for key, (kind, default) in CONFIG_KEYS.items():
        if key in cfg:
            value = cfg[key]
            if kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if kind is int and isinstance(value, bool):
                raise ConfigError(f"config key {key!r} must be {kind.__name__}")
            if value is not None and not isinstance(value, kind):
                raise ConfigError(
                    f"config key {key!r} must be {kind.__name__}, got {value!r}"
                )
            out[key] = value
        elif default is not None:
            out[key] = default
    for key in INTERNAL_KEYS:
        if key in cfg:
            out[key] = cfg[key]

    algorithm = out.get("algorithm")
    if algorithm is None:
        raise ConfigError("config key 'algorithm' is required")
    if algorithm not in ALGORITHMS:
        raise ConfigError(
            f"invalid algorithm {algorithm!r}; valid names: {list(ALGORITHMS)}"
        )
    env_name = out.get("environment")
    if env_name is None:
        raise ConfigError("config key 'environment' is required")
    if env_name not in ENVIRONMENTS:
        raise ConfigError(
            f"invalid environment {env_name!r}; valid names: {list(ENVIRONMENTS)}"
        )
    if out.get("horizon") is None:
        raise ConfigError("config key 'horizon' is required")
    if out["horizon"] < 1:
        raise ConfigError("horizon must be >= 1")
    if out["schedule"] not in core.SCHEDULE_MODES:
        raise ConfigError(
            f"invalid schedule {out['schedule']!r}; valid: {list(core.SCHEDULE_MODES)}"
        )
    if out["radius_mode"] not in ("constant", "theory", "unbounded"):
        raise ConfigError(f"invalid radius_mode {out['radius_mode']!r}")
    if algorithm == "epsilon-greedy" and out.get("epsilon") is None:
        raise ConfigError("epsilon-greedy requires the 'epsilon' key")
    if out.get("epsilon") is not None and not 0.0 <= out["epsilon"] <= 1.0:
        raise ConfigError("epsilon must lie in [0, 1]")
    if out["beta"] < 0:
        raise ConfigError("beta must be nonnegative")
    if env_name == "dataset" and not out.get("csv_path"):
        raise ConfigError("dataset environment requires the 'csv_path' key")
    if env_name == "hard_tabular" and out.get("n_contexts") is None:
        raise ConfigError("hard_tabular environment requires the 'n_contexts' key")
    if env_name == "synthetic" and out.get("n_actions") is None:
        out["n_actions"] = 4
    if out.get("reward_model") not in ("multiclass", "noisy"):
        raise ConfigError(f"invalid reward_model {out.get('reward_model')!r}")
    oracle = out.get("oracle")
    if oracle is None:
        oracle = "finite" if env_name == "hard_tabular" else "ridge_product"
        out["oracle"] = oracle
    if oracle not in ORACLES:
        raise ConfigError(f"invalid oracle {oracle!r}; valid names: {list(ORACLES)}")
    if oracle == "finite" and env_name != "hard_tabular":
        raise ConfigError("the finite oracle is only available on hard_tabular")
    if oracle != "finite" and env_name == "hard_tabular":
        raise ConfigError("hard_tabular requires the finite oracle")
    if out.get("reduction") is None:
        out["reduction"] = (
            "inverse_propensity" if algorithm == "epsilon-greedy" else "direct"
        )
    if out["reduction"] not in learners.REDUCTIONS:
        raise ConfigError(f"invalid reduction {out['reduction']!r}")
    return out


def build_environment(cfg: dict):
    dataset_seed = evaluation.derive_dataset_seed(cfg["seed_dataset"], cfg["replicate"])
    name = cfg["environment"]
    if name == "synthetic":
        return environments.SyntheticLinearEnv(
            dim=cfg["dim"],
            n_actions=cfg["n_actions"],
            horizon=cfg["horizon"],
            dataset_seed=dataset_seed,
            noise=cfg["noise"],
            margin=cfg.get("margin"),
            holdout_size=cfg["holdout_size"],
        )
    if name == "dataset":
        dataset = environments.load_csv_dataset(
            cfg["csv_path"],
            label_column=cfg["label_column"],
            n_actions=cfg.get("n_actions"),
            add_bias=cfg["add_bias"],
            standardize=cfg["standardize"],
            has_header=cfg["has_header"],
        )
        return environments.DatasetBanditEnv(
            dataset,
            dataset_seed=dataset_seed,
            holdout_fraction=cfg["holdout_fraction"],
            reward_model=cfg["reward_model"],
        )
    return environments.HardTabularEnv(
        n_contexts=cfg["n_contexts"],
        good_reward=cfg["good_reward"],
        horizon=cfg["horizon"],
        dataset_seed=dataset_seed,
    )


def build_schedule(cfg: dict, env, horizon: int) -> core.Schedule:
    radius_mode = cfg["radius_mode"]
    radius_value = cfg["beta"]
    if radius_mode == "theory":
        ln_class_size = cfg.get("class_size_ln")
        if ln_class_size is None:
            if cfg["oracle"] == "finite":
                ln_class_size = math.log(cfg["n_contexts"] + 1)
            else:
                ln_class_size = float(env.dim) + math.log(env.n_actions)
        radius_value = core.c_delta_covering(ln_class_size, horizon, cfg["delta"])
    return core.Schedule(
        mode=cfg["schedule"],
        horizon=horizon,
        radius_mode=radius_mode,
        radius_value=radius_value,
        warm_start=cfg["warm_start"],
    )


def build_adapter(cfg: dict, env):
    oracle = cfg["oracle"]
    if oracle == "ridge_product":
        return learners.ProductRidgeAdapter(env.dim, env.n_actions, cfg["lambda_reg"])
    if oracle == "ridge_joint":
        fmap = FeatureMap("one_hot_block", env.dim, env.n_actions)
        return learners.JointRidgeAdapter(fmap, cfg["lambda_reg"])
    return learners.FiniteAdapter(FiniteClass(env.function_class_values()))


def build_learner(cfg: dict, env, schedule: core.Schedule, resample_rng):
    algorithm = cfg["algorithm"]
    if algorithm == "uniform":
        return learners.UniformLearner(env.n_actions)
    if algorithm in ("regcb-elim", "regcb-opt"):
        variant = "elimination" if algorithm == "regcb-elim" else "optimistic"
        return learners.RegCBLearner(
            variant,
            build_adapter(cfg, env),
            schedule,
            bounds_method=cfg["bounds_method"],
            alpha=cfg["alpha_precision"],
        )
    if algorithm == "epsilon-greedy":
        return learners.EpsilonGreedyLearner(
            cfg["epsilon"], build_adapter(cfg, env), reduction=cfg["reduction"]
        )
    return learners.BootstrapLearner(
        n_replicates=cfg["n_replicates"],
        exploration_coef=cfg["beta"],
        base_dim=env.dim,
        n_actions=env.n_actions,
        rng=resample_rng,
        lam=cfg["lambda_reg"],
        reduction=cfg["reduction"],
    )


def dataset_label(cfg: dict, env) -> str:
    name = cfg["environment"]
    if name == "dataset":
        base = os.path.basename(cfg["csv_path"])
        return f"{base}-{cfg['reward_model']}"
    if name == "synthetic":
        label = f"synthetic-dim{cfg['dim']}-k{cfg['n_actions']}-noise{cfg['noise']}"
        if cfg.get("margin") is not None:
            label += f"-margin{cfg['margin']}"
        return label
    return f"hard-tabular-n{cfg['n_contexts']}"


def execute_run(cfg: dict, out_dir: str, include_skyline: bool = False) -> dict:
    """Build everything from a validated config, run, and write outputs."""
    env = build_environment(cfg)
    horizon = min(cfg["horizon"], env.n_rounds)
    schedule = build_schedule(cfg, env, horizon)
    param_index = int(cfg.get("_param_index", 0))
    action_rng, resample_rng = evaluation.algo_streams(
        cfg["seed_algo"], cfg["replicate"], param_index
    )
    learner = build_learner(cfg, env, schedule, resample_rng)
    meta = {
        "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
        "algorithm": learner.name,
        "environment": env.descriptor(),
        "dataset_label": dataset_label(cfg, env),
        "schedule": {
            "mode": schedule.mode,
            "n_epochs": schedule.n_epochs,
            "radius_mode": schedule.radius_mode,
            "radius_value": schedule.radius_value,
            "warm_start": schedule.warm_start,
        },
        "seeds": {
            "seed_dataset": cfg["seed_dataset"],
            "seed_algo": cfg["seed_algo"],
            "replicate": cfg["replicate"],
            "param_index": param_index,
        },
        "log_convention": "natural",
    }
    if include_skyline:
        meta["skyline"] = evaluation.supervised_skyline(env, lam=cfg["lambda_reg"])
    record = evaluation.run_experiment(
        learner, env, schedule, horizon, action_rng, meta=meta
    )
    record.meta["final_validation"] = record.final_validation
    evaluation.write_run(record, out_dir)
    return {
        "out_dir": out_dir,
        "algorithm": learner.name,
        "final_validation": record.final_validation,
    }


def _default_out_root() -> str:
    return os.environ.get("REGCB_OUT_DIR", "runs")


def _resolve_out(args_out: str | None, cfg: dict, fallback_name: str) -> str:
    if args_out:
        return args_out
    if cfg.get("out_dir"):
        return cfg["out_dir"]
    return os.path.join(_default_out_root(), fallback_name)


def _apply_overrides(cfg: dict, args) -> dict:
    for key in ("seed_dataset", "seed_algo", "replicate"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def cmd_run(args) -> int:
    cfg = validate_config(_apply_overrides(load_config(args.config), args))
    name = f"{cfg['algorithm']}-rep{cfg['replicate']}"
    out_dir = _resolve_out(args.out, cfg, name)
    result = execute_run(cfg, out_dir, include_skyline=args.skyline)
    print(
        f"run complete: {result['algorithm']} -> {result['out_dir']} "
        f"(final validation {result['final_validation']:.4f})"
    )
    return EXIT_OK


def _sweep_worker(cfg: dict, out_dir: str) -> dict:
    return execute_run(cfg, out_dir)


def cmd_sweep(args) -> int:
    cfg = validate_config(_apply_overrides(load_config(args.config), args))
    algorithm = cfg["algorithm"]
    grid_kind = cfg.get("sweep_grid")
    if grid_kind is None:
        if algorithm in ("regcb-elim", "regcb-opt", "bootstrap"):
            grid_kind = "confidence"
        elif algorithm == "epsilon-greedy":
            grid_kind = "epsilon"
        else:
            raise ConfigError(f"{algorithm} has no parameter to sweep")
    grid = evaluation.parameter_grid(grid_kind)
    n_reps = cfg["sweep_replicates"]
    out_root = _resolve_out(args.out, cfg, f"sweep-{algorithm}")
    os.makedirs(out_root, exist_ok=True)

    tasks = []
    for param_index, param in enumerate(grid):
        for rep in range(n_reps):
            run_cfg = dict(cfg)
            run_cfg["replicate"] = rep
            run_cfg["_param_index"] = param_index
            if grid_kind == "epsilon":
                run_cfg["epsilon"] = param
            else:
                run_cfg["beta"] = param
            run_dir = os.path.join(out_root, f"param-{param_index:02d}", f"rep-{rep}")
            if args.resume and os.path.exists(os.path.join(run_dir, "meta.json")):
                continue
            tasks.append((run_cfg, run_dir, param_index, param, rep))

    failures = []
    if args.jobs > 1 and tasks:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {
                pool.submit(_sweep_worker, cfg_i, dir_i): (dir_i, idx, param, rep)
                for cfg_i, dir_i, idx, param, rep in tasks
            }
            for future in concurrent.futures.as_completed(futures):
                dir_i, idx, param, rep = futures[future]
                try:
                    future.result()
                except Exception as err:  # noqa: BLE001 - record and continue
                    failures.append((dir_i, idx, param, rep, str(err)))
    else:
        for cfg_i, dir_i, idx, param, rep in tasks:
            try:
                _sweep_worker(cfg_i, dir_i)
            except Exception as err:  # noqa: BLE001 - record and continue
                failures.append((dir_i, idx, param, rep, str(err)))

    if failures:
        with open(
            os.path.join(out_root, "failures.csv"), "w", newline="", encoding="utf-8"
        ) as handle:
            writer = csv.writer(handle)
            writer.writerow(["run_dir", "param_index", "parameter", "replicate", "error"])
            writer.writerows(failures)

    _summarize_sweep(out_root, algorithm, grid)
    done = sum(1 for _ in glob.glob(os.path.join(out_root, "param-*", "rep-*", "meta.json")))
    print(
        f"sweep complete: {algorithm}, {len(grid)} parameters x {n_reps} replicates, "
        f"{done} runs on disk, {len(failures)} failures -> {out_root}"
    )
    return EXIT_OK


def _summarize_sweep(out_root: str, algorithm: str, grid: list[float]) -> None:
    """summary.csv (per-parameter final means), best_series.csv, envelope_series.csv."""
    per_param: list[tuple[int, float, float, int]] = []
    series: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for param_index, param in enumerate(grid):
        finals = []
        curves = []
        for rep_dir in sorted(
            glob.glob(os.path.join(out_root, f"param-{param_index:02d}", "rep-*"))
        ):
            val_path = os.path.join(rep_dir, "validation.csv")
            if not os.path.exists(os.path.join(rep_dir, "meta.json")):
                continue
            t, reward = evaluation.read_validation_csv(val_path)
            finals.append(reward[-1])
            curves.append((t, reward))
        if not finals:
            continue
        per_param.append((param_index, param, float(np.mean(finals)), len(finals)))
        base_t = curves[0][0]
        stacked = np.stack([c[1] for c in curves])
        series[param_index] = (base_t, stacked.mean(axis=0))

    if not per_param:
        return
    best_index = max(per_param, key=lambda row: row[2])[0]
    with open(
        os.path.join(out_root, "summary.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["algorithm", "param_index", "parameter", "mean_final_validation", "n_runs", "is_best"]
        )
        for param_index, param, mean_final, n_ok in per_param:
            writer.writerow(
                [
                    algorithm,
                    param_index,
                    repr(param),
                    repr(mean_final),
                    n_ok,
                    int(param_index == best_index),
                ]
            )
    best_t, best_curve = series[best_index]
    with open(
        os.path.join(out_root, "best_series.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "mean_reward"])
        for t, v in zip(best_t, best_curve):
            writer.writerow([int(t), repr(float(v))])
    aligned = [curve for _, curve in series.values() if len(curve) == len(best_t)]
    envelope = np.max(np.stack(aligned), axis=0)
    with open(
        os.path.join(out_root, "envelope_series.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "max_mean_reward"])
        for t, v in zip(best_t, envelope):
            writer.writerow([int(t), repr(float(v))])


def cmd_lowerbound(args) -> int:
    if args.variant == "both":
        variants = ["regcb-elim", "regcb-opt"]
    else:
        variants = [args.variant]
    out_dir = args.out or os.path.join(_default_out_root(), "lowerbound")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    summaries = {}
    for variant in variants:
        exposure_regrets = []
        realized_regrets = []
        distincts = []
        clean = True
        for rep in range(args.seeds):
            cfg = validate_config(
                {
                    "algorithm": variant,
                    "environment": "hard_tabular",
                    "horizon": args.horizon,
                    "n_contexts": args.n_contexts,
                    "good_reward": args.good_reward,
                    "beta": 0.0,
                    "schedule": args.schedule,
                    "seed_dataset": args.seed_dataset,
                    "seed_algo": args.seed_algo,
                    "replicate": rep,
                }
            )
            env = build_environment(cfg)
            schedule = build_schedule(cfg, env, args.horizon)
            rng = evaluation.derive_algo_rng(cfg["seed_algo"], rep)
            learner = build_learner(cfg, env, schedule, None)
            record = evaluation.run_experiment(learner, env, schedule, args.horizon, rng)
            stats = first_visit_stats(record, env, variant)
            rows.append(
                [
                    variant,
                    rep,
                    stats["distinct"],
                    stats["mistake_rounds"],
                    repr(stats["exposure_regret"]),
                    repr(stats["realized_regret"]),
                    int(stats["errs_only_on_first_visits"]),
                ]
            )
            exposure_regrets.append(stats["exposure_regret"])
            realized_regrets.append(stats["realized_regret"])
            distincts.append(stats["distinct"])
            clean = clean and stats["errs_only_on_first_visits"]
        expected = env.expected_distinct(args.horizon)
        summaries[variant] = {
            "mean_exposure_regret": float(np.mean(exposure_regrets)),
            "mean_realized_regret": float(np.mean(realized_regrets)),
            "mean_distinct_contexts": float(np.mean(distincts)),
            "expected_distinct_contexts": expected,
            "predicted_regret": args.good_reward * expected,
            "errs_only_on_first_visits": bool(clean),
            "n_seeds": args.seeds,
        }
    with open(
        os.path.join(out_dir, "lowerbound.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "algorithm",
                "replicate",
                "distinct_contexts",
                "mistake_rounds",
                "exposure_regret",
                "realized_regret",
                "errs_only_on_first_visits",
            ]
        )
        writer.writerows(rows)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as handle:
        json.dump(summaries, handle, sort_keys=True, indent=2)
        handle.write("\n")
    for variant, summary in summaries.items():
        print(
            f"{variant}: mean regret at risk {summary['mean_exposure_regret']:.2f} "
            f"vs predicted {summary['predicted_regret']:.2f}; "
            f"errors only on first visits: {summary['errs_only_on_first_visits']}"
        )
    print(f"lower-bound report -> {out_dir}")
    return EXIT_OK


def first_visit_stats(record, env, algorithm: str) -> dict:
    """Compare a hard-instance run against the first-visit error pattern.

    A round is a mistake when the bad action was still in play: for the
    elimination variant, when the plausible set contained it; for the
    optimistic variant, when it was actually chosen.  Exposure regret prices
    every mistake round at the full reward gap (the cost of the bad action
    being playable); realized regret prices only rounds where it was played.
    """
    keys = [env.context_at(row.t).key for row in record.rounds]
    seen: set[int] = set()
    first_visits = []
    for key in keys:
        first_visits.append(key not in seen)
        seen.add(key)
    mistakes = []
    for row, first in zip(record.rounds, first_visits):
        if algorithm == "regcb-elim":
            mistake = row.disagreement_size is not None and row.disagreement_size > 1
        else:
            mistake = row.action == 1
        mistakes.append(mistake)
    mistake_rounds = int(np.sum(mistakes))
    exposure = env.good_reward * mistake_rounds
    realized = float(np.sum(record.regrets))
    errs_clean = all(m == f for m, f in zip(mistakes, first_visits))
    return {
        "distinct": len(seen),
        "mistake_rounds": mistake_rounds,
        "exposure_regret": exposure,
        "realized_regret": realized,
        "errs_only_on_first_visits": errs_clean,
    }


def cmd_diag(args) -> int:
    if not args.run_dir and not args.config:
        raise ConfigError("diag needs --run-dir and/or --config")
    out_dir = args.out or os.path.join(_default_out_root(), "diag")
    os.makedirs(out_dir, exist_ok=True)
    if args.run_dir:
        _diag_run_dir(args.run_dir, out_dir, args.window)
    if args.config:
        _diag_moments(args, out_dir)
    print(f"diagnostics -> {out_dir}")
    return EXIT_OK


def _diag_run_dir(run_dir: str, out_dir: str, window: int) -> None:
    cols = evaluation.read_rounds_csv(os.path.join(run_dir, "rounds.csv"))
    width_mask = ~np.isnan(cols["width"])
    if np.any(width_mask):
        t = cols["t"][width_mask]
        widths = cols["width"][width_mask]
        smoothed = evaluation.sliding_mean(widths, window)
        with open(
            os.path.join(out_dir, "width_series.csv"), "w", newline="", encoding="utf-8"
        ) as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "width", "smoothed"])
            for ti, wi, si in zip(t, widths, smoothed):
                writer.writerow([int(ti), repr(float(wi)), repr(float(si))])
        fit = evaluation.slope_fit(t, smoothed)
        with open(
            os.path.join(out_dir, "slope.csv"), "w", newline="", encoding="utf-8"
        ) as handle:
            writer = csv.writer(handle)
            writer.writerow(["series", "slope", "intercept", "n_used", "n_dropped"])
            writer.writerow(
                ["width", repr(fit.slope), repr(fit.intercept), fit.n_used, fit.n_dropped]
            )
    size_mask = cols["disagreement_size"] >= 0
    if np.any(size_mask):
        t = cols["t"][size_mask]
        sizes = cols["disagreement_size"][size_mask].astype(float)
        smoothed = evaluation.sliding_mean(sizes, window)
        with open(
            os.path.join(out_dir, "disagreement_series.csv"),
            "w",
            newline="",
            encoding="utf-8",
        ) as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "size", "smoothed"])
            for ti, si, mi in zip(t, sizes, smoothed):
                writer.writerow([int(ti), repr(float(si)), repr(float(mi))])


def _diag_moments(args, out_dir: str) -> None:
    cfg = validate_config(load_config(args.config))
    env = build_environment(cfg)
    if not hasattr(env, "sample_moment_inputs"):
        raise ConfigError(
            "moment diagnostics need an environment with known true means "
            "(synthetic); got " + cfg["environment"]
        )
    phi, fstar = env.sample_moment_inputs(args.samples)
    lams = args.lam if args.lam else [0.0]
    with open(
        os.path.join(out_dir, "moments.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "lam",
                "lambda_min_full",
                "lambda_min_masked",
                "l1_bound",
                "l2_bound",
                "l1_sparse_bound",
                "l2_sparse_bound",
                "degenerate_full",
                "degenerate_masked",
                "empirical_margin",
            ]
        )
        for lam in lams:
            diag = evaluation.moment_bounds(phi, fstar, lam=lam, sparsity=args.sparsity)
            writer.writerow(
                [
                    repr(float(lam)),
                    repr(diag.lambda_min_full),
                    repr(diag.lambda_min_masked),
                    repr(diag.l1_bound),
                    repr(diag.l2_bound),
                    "" if diag.l1_sparse_bound is None else repr(diag.l1_sparse_bound),
                    "" if diag.l2_sparse_bound is None else repr(diag.l2_sparse_bound),
                    int(diag.degenerate_full),
                    int(diag.degenerate_masked),
                    repr(diag.empirical_margin),
                ]
            )


def cmd_aggregate(args) -> int:
    run_dirs: list[str] = []
    for pattern in args.runs:
        matches = sorted(glob.glob(pattern))
        if not matches:
            raise ConfigError(f"no run directories match {pattern!r}")
        run_dirs.extend(matches)
    out_dir = args.out or os.path.join(_default_out_root(), "aggregate")
    os.makedirs(out_dir, exist_ok=True)

    # (dataset, algorithm) -> list of values at the cutoff.
    values: dict[tuple[str, str], list[float]] = {}
    for run_dir in run_dirs:
        meta = evaluation.read_meta(run_dir)
        horizon = meta.get("horizon", 0)
        if horizon < args.min_rounds:
            continue
        t, reward = evaluation.read_validation_csv(
            os.path.join(run_dir, "validation.csv")
        )
        if args.at is not None:
            eligible = np.flatnonzero(t <= args.at)
            if eligible.size == 0:
                continue
            value = float(reward[eligible[-1]])
        else:
            value = float(reward[-1])
        key = (meta["dataset_label"], meta["algorithm"])
        values.setdefault(key, []).append(value)

    if not values:
        raise ConfigError(
            "no runs survive aggregation (check --min-rounds and --at cutoffs)"
        )

    datasets = sorted({k[0] for k in values})
    losses: dict[str, list[float]] = {}
    with open(
        os.path.join(out_dir, "losses.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(["algorithm", "dataset", "loss"])
        for dataset in datasets:
            algo_values = {
                algo: float(np.mean(vals))
                for (ds, algo), vals in values.items()
                if ds == dataset
            }
            for algo, loss in sorted(
                evaluation.normalized_relative_loss(algo_values).items()
            ):
                writer.writerow([algo, dataset, repr(loss)])
                losses.setdefault(algo, []).append(loss)

    with open(
        os.path.join(out_dir, "cdf.csv"), "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(["algorithm", "x", "count"])
        for algo in sorted(losses):
            for x, count in evaluation.loss_cdf(losses[algo]):
                writer.writerow([algo, repr(float(x)), count])

    print(
        f"aggregated {len(run_dirs)} runs over {len(datasets)} datasets -> {out_dir}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regcb",
        description="Contextual bandit runs with regression-oracle confidence bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured run")
    run.add_argument("--config", required=True, help="flat JSON config file")
    run.add_argument("--out", help="output directory for this run")
    run.add_argument("--seed-dataset", dest="seed_dataset", type=int)
    run.add_argument("--seed-algo", dest="seed_algo", type=int)
    run.add_argument("--replicate", type=int)
    run.add_argument(
        "--skyline",
        action="store_true",
        help="also record the full-information fit's holdout value",
    )
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter grid with replicates")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", help="output root for the sweep")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--resume", action="store_true")
    sweep.add_argument("--seed-dataset", dest="seed_dataset", type=int)
    sweep.add_argument("--seed-algo", dest="seed_algo", type=int)
    sweep.set_defaults(func=cmd_sweep)

    lower = sub.add_parser(
        "lowerbound", help="reproduce the first-visit hard instance"
    )
    lower.add_argument("--n-contexts", dest="n_contexts", type=int, default=50)
    lower.add_argument(
        "--good-reward",
        dest="good_reward",
        type=float,
        default=0.5,
        help="mean reward of the good action (the bad action pays 0)",
    )
    lower.add_argument("--horizon", type=int, default=2000)
    lower.add_argument(
        "--variant", choices=["regcb-elim", "regcb-opt", "both"], default="both"
    )
    lower.add_argument("--seeds", type=int, default=20)
    lower.add_argument("--seed-dataset", dest="seed_dataset", type=int, default=0)
    lower.add_argument("--seed-algo", dest="seed_algo", type=int, default=0)
    lower.add_argument(
        "--schedule",
        choices=list(core.SCHEDULE_MODES),
        default="every_round",
        help="every_round refreshes confidence sets each round, matching the "
        "idealized first-visit analysis",
    )
    lower.add_argument("--out")
    lower.set_defaults(func=cmd_lowerbound)

    diag = sub.add_parser("diag", help="width/disagreement series and moment bounds")
    diag.add_argument("--run-dir", dest="run_dir")
    diag.add_argument("--config", help="environment config for moment diagnostics")
    diag.add_argument("--out")
    diag.add_argument("--window", type=int, default=20)
    diag.add_argument("--samples", type=int, default=2000)
    diag.add_argument("--lam", type=float, action="append")
    diag.add_argument("--sparsity", type=int)
    diag.set_defaults(func=cmd_diag)

    agg = sub.add_parser("aggregate", help="relative losses and CDFs across runs")
    agg.add_argument("--runs", nargs="+", required=True, help="run dirs or globs")
    agg.add_argument("--out")
    agg.add_argument("--at", type=int, help="evaluate at the checkpoint <= this round")
    agg.add_argument(
        "--min-rounds",
        dest="min_rounds",
        type=int,
        default=1000,
        help="skip runs shorter than this",
    )
    agg.set_defaults(func=cmd_aggregate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
