"""Experiment orchestration and the command-line interface.

Verbs: train, eval, failure-eval, plot, validate-config. One YAML experiment
file configures everything; --set key=value applies dotted overrides. Exit
codes: 0 success, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import yaml

from .world import ScenarioConfig, coerce_field_types, make_scenario
from .metrics import STEP_CSV_COLUMNS, RewardWeights, StepMetrics
from .power import RotorcraftParams
from .env import CoverageEnv, Transition
from . import nn
from . import baselines
from . import train as training

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PLOT_METRICS = ["mean_reward", "c_cov", "handoffs", "e_eff", "jfi_rate"]
AGGREGATE_METRICS = [
    "mean_reward", "c_cov", "handoffs", "e_eff", "jfi_rate",
    "actor_loss", "critic_loss", "entropy",
]


class ConfigError(Exception):
    """Invalid experiment or scenario configuration."""


@dataclass
class ExperimentSpec:
    scenario_name: str
    scenario_overrides: dict = field(default_factory=dict)
    controller: str = training.CONTROLLER_TAG
    train: training.TrainConfig = field(default_factory=training.TrainConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    rotorcraft: RotorcraftParams = field(default_factory=RotorcraftParams)
    seeds: List[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    eval_episodes: int = 5
    output_dir: str = ""
    failure_time: int = 100
    failure_uav: object = "random"

    def validate(self) -> None:
        if self.controller not in training.CONTROLLERS:
            raise ConfigError(
                f"unknown controller {self.controller!r}; expected one of "
                f"{training.CONTROLLERS}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.eval_episodes <= 0:
            raise ConfigError("eval_episodes must be positive")

    def scenario(self) -> ScenarioConfig:
        try:
            return make_scenario(self.scenario_name, self.scenario_overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def config_hash(self) -> str:
        # The per-run seed is assigned programmatically and excluded so every
        # seed's checkpoint validates against the same experiment spec.
        train_dict = self.train.to_dict()
        train_dict.pop("seed", None)
        return nn.config_hash({
            "scenario": self.scenario().to_dict(),
            "train": train_dict,
            "controller": self.controller,
        })


def _strict_section(data: dict, name: str, allowed) -> dict:
    section = data.get(name, {}) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return section


def spec_from_dict(data: dict) -> ExperimentSpec:
    top_allowed = {"scenario", "controller", "train", "reward", "rotorcraft",
                   "experiment"}
    unknown = set(data) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    scenario = _strict_section(data, "scenario", {"name", "overrides"})
    if "name" not in scenario:
        raise ConfigError("scenario.name is required")
    overrides = scenario.get("overrides", {}) or {}
    if not isinstance(overrides, dict):
        raise ConfigError("scenario.overrides must be a mapping")

    try:
        train_cfg = training.TrainConfig.from_dict(data.get("train", {}) or {})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"train: {exc}") from exc

    reward_data = data.get("reward", {}) or {}
    try:
        reward = RewardWeights(**coerce_field_types(RewardWeights, reward_data))
        reward.validate()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"reward: {exc}") from exc

    rotor_data = data.get("rotorcraft", {}) or {}
    try:
        rotor = RotorcraftParams(
            **coerce_field_types(RotorcraftParams, rotor_data))
        rotor.validate()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"rotorcraft: {exc}") from exc

    exp = _strict_section(data, "experiment",
                          {"seeds", "eval_episodes", "output_dir", "failure"})
    failure = _strict_section(exp, "failure", {"time", "uav"})

    spec = ExperimentSpec(
        scenario_name=str(scenario["name"]),
        scenario_overrides=overrides,
        controller=str(data.get("controller", training.CONTROLLER_TAG)),
        train=train_cfg,
        reward=reward,
        rotorcraft=rotor,
        seeds=[int(s) for s in exp.get("seeds", [1, 2, 3, 4, 5])],
        eval_episodes=int(exp.get("eval_episodes", 5)),
        output_dir=str(exp.get("output_dir", "")),
        failure_time=int(failure.get("time", 100)),
    )
    spec.failure_uav = failure.get("uav", "random")
    if spec.failure_uav != "random":
        spec.failure_uav = int(spec.failure_uav)
    if not spec.output_dir:
        spec.output_dir = os.path.join(
            "runs", f"{spec.scenario_name}_{spec.controller}")
    spec.validate()
    spec.scenario()  # fail fast on bad scenario overrides
    return spec


def load_spec(path: str, set_overrides: Optional[List[str]] = None) -> ExperimentSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"experiment file {path} must hold a mapping")
    for item in set_overrides or []:
        key, sep, raw_value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        _set_dotted(data, key.strip(), yaml.safe_load(raw_value))
    return spec_from_dict(data)


def _set_dotted(data: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = {}
            node[part] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set path {dotted!r} crosses a non-mapping")
        node = nxt
    node[parts[-1]] = value


# -- training ------------------------------------------------------------------

def seed_csv_path(out_dir: str, seed: int) -> str:
    return os.path.join(out_dir, f"train_seed{seed}.csv")


def seed_checkpoint_path(out_dir: str, seed: int) -> str:
    return os.path.join(out_dir, f"checkpoint_seed{seed}.ckpt")


def _train_one_seed(payload: dict) -> str:
    """Run one seed (importable for process pools); returns the CSV path."""
    spec = spec_from_dict(payload["spec"])
    seed = payload["seed"]
    scenario = spec.scenario()
    scenario.rng_seed = seed
    train_cfg = spec.train
    train_cfg.seed = seed
    csv_path = seed_csv_path(spec.output_dir, seed)
    ckpt_path = seed_checkpoint_path(spec.output_dir, seed)
    training.train_run(scenario, train_cfg, spec.controller, csv_path,
                       checkpoint_path=ckpt_path, weights=spec.reward,
                       rotorcraft=spec.rotorcraft, cfg_hash=spec.config_hash(),
                       log=payload.get("log"))
    return csv_path


def spec_to_payload(spec: ExperimentSpec) -> dict:
    return {
        "scenario": {"name": spec.scenario_name,
                     "overrides": spec.scenario_overrides},
        "controller": spec.controller,
        "train": spec.train.to_dict(),
        "reward": dict(vars(spec.reward)),
        "rotorcraft": dict(vars(spec.rotorcraft)),
        "experiment": {"seeds": spec.seeds, "eval_episodes": spec.eval_episodes,
                       "output_dir": spec.output_dir,
                       "failure": {"time": spec.failure_time,
                                   "uav": spec.failure_uav}},
    }


def cmd_train(spec: ExperimentSpec, jobs: int = 1, quiet: bool = False) -> List[str]:
    """Train every seed, then write the cross-seed aggregate CSV."""
    os.makedirs(spec.output_dir, exist_ok=True)
    payloads = [{"spec": spec_to_payload(spec), "seed": seed,
                 "log": None if quiet else _make_logger(seed)}
                for seed in spec.seeds]
    if jobs > 1:
        for p in payloads:
            p["log"] = None  # loggers do not cross process boundaries
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            csv_paths = list(pool.map(_train_one_seed, payloads))
    else:
        csv_paths = [_train_one_seed(p) for p in payloads]
    aggregate_path = os.path.join(spec.output_dir, "train_aggregate.csv")
    write_aggregate(csv_paths, aggregate_path)
    return csv_paths


def _make_logger(seed: int):
    def log(msg: str) -> None:
        print(f"[seed {seed}] {msg}", flush=True)
    return log


def read_csv_columns(path: str) -> Dict[str, np.ndarray]:
    """Parse a numeric CSV into column arrays, reporting bad rows by line."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        columns: Dict[str, list] = {name: [] for name in header}
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{line_no}: non-numeric value {cell!r} in {name}"
                    ) from None
            n_rows += 1
    if n_rows == 0:
        raise ValueError(f"{path}: empty CSV (header only)")
    return {name: np.array(vals) for name, vals in columns.items()}


def t_interval_95(values: np.ndarray) -> float:
    """Half-width of the Student-t 95% confidence interval over runs."""
    n = values.shape[0]
    if n < 2:
        return 0.0
    from scipy import stats as sps
    se = values.std(ddof=1) / np.sqrt(n)
    return float(sps.t.ppf(0.975, n - 1) * se)


def write_aggregate(csv_paths: List[str], out_path: str) -> None:
    """Per-episode mean and 95% CI across seed runs."""
    runs = [read_csv_columns(p) for p in csv_paths]
    episodes = runs[0]["episode"]
    for run in runs[1:]:
        if not np.array_equal(run["episode"], episodes):
            raise ValueError("seed runs cover different episode ranges")
    header = ["episode"]
    for metric in AGGREGATE_METRICS:
        header += [f"{metric}_mean", f"{metric}_ci95"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(episodes.shape[0]):
            row = [int(episodes[i])]
            for metric in AGGREGATE_METRICS:
                vals = np.array([run[metric][i] for run in runs])
                row += [repr(float(vals.mean())), repr(t_interval_95(vals))]
            writer.writerow(row)


# -- evaluation ----------------------------------------------------------------

def load_controller(spec: ExperimentSpec, checkpoint: Optional[str],
                    scenario: ScenarioConfig):
    """Greedy policy function for eval episodes, from checkpoint or geometry."""
    if spec.controller == training.CONTROLLER_KMEANS:
        ctrl = baselines.KmeansController(scenario, seed=spec.seeds[0])

        def policy(env, observations, rng):
            actions = ctrl.act(env.state)
            return actions, {k: 0.0 for k in actions}
        return policy

    if not checkpoint:
        raise ConfigError(f"controller {spec.controller} needs --checkpoint")
    params, manifest = nn.load_checkpoint(checkpoint)
    expected = spec.config_hash()
    if manifest.get("config_hash") != expected:
        raise ConfigError(
            f"checkpoint {checkpoint} was trained under a different config "
            f"(hash {manifest.get('config_hash')!r} != {expected!r})")

    def policy(env, observations, rng):
        actions, logps = {}, {}
        for k in sorted(observations):
            logits, _ = nn.actor_forward(params, observations[k][None, :])
            probs, logp, _ = nn.policy_stats(logits)
            a = int(np.argmax(probs[0]))
            actions[k] = a
            logps[k] = float(logp[0, a])
        return actions, logps
    return policy


def run_episode(env: CoverageEnv, policy, seed: int,
                trace_path: Optional[str] = None) -> List[StepMetrics]:
    """One full greedy episode; optionally dumps a JSON-lines replay trace."""
    observations = env.reset(seed)
    rng = training.action_rng_for(seed)
    rows: List[StepMetrics] = []
    trace = open(trace_path, "w", encoding="utf-8") if trace_path else None
    try:
        done = False
        while not done:
            snapshot = env.last_snapshot
            pre_obs = observations
            actions, logps = policy(env, observations, rng)
            observations, reward, metrics, done = env.step(actions)
            rows.append(metrics)
            if trace is not None:
                transition = Transition(
                    t=snapshot.t,
                    observations={k: np.asarray(v) for k, v in pre_obs.items()},
                    actions=actions, log_probs=logps, reward=reward,
                    alive_mask=snapshot.alive, snapshot=snapshot, done=done)
                trace.write(transition.to_json_line() + "\n")
    finally:
        if trace is not None:
            trace.close()
    return rows


def write_step_csv(path: str, rows: List[StepMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STEP_CSV_COLUMNS)
        for m in rows:
            writer.writerow([training._fmt(v) if isinstance(v, float) else str(v)
                             for v in m.csv_row()])


def cmd_eval(spec: ExperimentSpec, checkpoint: Optional[str],
             trace: bool = False) -> List[str]:
    """Plain evaluation episodes (no injected failure); one step CSV each."""
    scenario = spec.scenario()
    os.makedirs(spec.output_dir, exist_ok=True)
    policy = load_controller(spec, checkpoint, scenario)
    env = CoverageEnv(scenario, weights=spec.reward, rotorcraft=spec.rotorcraft)
    paths = []
    for seed in spec.seeds:
        for ep in range(spec.eval_episodes):
            ep_seed = training.episode_env_seed(seed, ep, 0)
            trace_path = (os.path.join(spec.output_dir,
                                       f"trace_seed{seed}_ep{ep}.jsonl")
                          if trace else None)
            rows = run_episode(env, policy, ep_seed, trace_path)
            path = os.path.join(spec.output_dir, f"eval_seed{seed}_ep{ep}.csv")
            write_step_csv(path, rows)
            paths.append(path)
    return paths


def recovery_stats(ccov_trace: np.ndarray, failure_t: int,
                   pre_window: int = 20, target_frac: float = 0.9) -> dict:
    """Recovery summary of one coverage trace around a failure step.

    The trace is indexed by step t starting at 1 (metrics exist per step).
    Counts the failure step itself as recovery step 1.
    """
    idx = np.arange(1, ccov_trace.shape[0] + 1)
    pre_mask = (idx >= failure_t - pre_window) & (idx < failure_t)
    if not np.any(pre_mask):
        raise ValueError("no pre-failure window in trace")
    pre_mean = float(ccov_trace[pre_mask].mean())
    post_mask = idx >= failure_t
    post = ccov_trace[post_mask]
    post_idx = idx[post_mask]
    trough = float(post.min())
    trough_t = int(post_idx[int(np.argmin(post))])
    threshold = target_frac * pre_mean
    reached = np.flatnonzero(post >= threshold)
    steps = int(reached[0]) + 1 if reached.size else -1
    return {"pre_failure_mean": pre_mean, "trough": trough,
            "trough_t": trough_t, "recovery_steps": steps,
            "threshold": threshold}


def cmd_failure_eval(spec: ExperimentSpec, checkpoint: Optional[str]) -> dict:
    """Paired episodes with and without a failure; emits traces + stats.

    Both arms share env seeds; the failure RNG stream is independent of the
    physics stream, so trajectories match exactly until the failure step.
    """
    scenario = spec.scenario()
    if not 0 < spec.failure_time < scenario.episode_len:
        raise ConfigError(
            f"failure time {spec.failure_time} outside (0, {scenario.episode_len})")
    policy = load_controller(spec, checkpoint, scenario)
    os.makedirs(spec.output_dir, exist_ok=True)

    fail_scenario = spec.scenario()
    fail_scenario.failure_schedule = [(spec.failure_time, spec.failure_uav)]
    fail_scenario.validate()

    env_fail = CoverageEnv(fail_scenario, weights=spec.reward,
                           rotorcraft=spec.rotorcraft)
    env_base = CoverageEnv(scenario, weights=spec.reward,
                           rotorcraft=spec.rotorcraft)

    traces = {"fail": {"c_cov": [], "jfi_rate": [], "active": []},
              "nofail": {"c_cov": [], "jfi_rate": [], "active": []}}
    for seed in spec.seeds:
        for ep in range(spec.eval_episodes):
            ep_seed = training.episode_env_seed(seed, ep, 0)
            for arm, env in (("fail", env_fail), ("nofail", env_base)):
                rows = run_episode(env, policy, ep_seed)
                traces[arm]["c_cov"].append([m.c_cov for m in rows])
                traces[arm]["jfi_rate"].append([m.jfi_rate for m in rows])
                traces[arm]["active"].append([m.active_uav_count for m in rows])

    mean = {arm: {k: np.mean(np.array(v), axis=0) for k, v in arm_data.items()}
            for arm, arm_data in traces.items()}
    trace_path = os.path.join(spec.output_dir, "failure_traces.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "ccov_fail", "ccov_nofail", "jfi_fail",
                         "jfi_nofail", "active_fail", "active_nofail"])
        t_len = mean["fail"]["c_cov"].shape[0]
        for i in range(t_len):
            writer.writerow([i + 1,
                             repr(float(mean["fail"]["c_cov"][i])),
                             repr(float(mean["nofail"]["c_cov"][i])),
                             repr(float(mean["fail"]["jfi_rate"][i])),
                             repr(float(mean["nofail"]["jfi_rate"][i])),
                             repr(float(mean["fail"]["active"][i])),
                             repr(float(mean["nofail"]["active"][i]))])

    stats = recovery_stats(mean["fail"]["c_cov"], spec.failure_time)
    stats_path = os.path.join(spec.output_dir, "recovery_stats.csv")
    with open(stats_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pre_failure_mean", "trough", "trough_t",
                         "recovery_steps", "threshold"])
        writer.writerow([repr(stats["pre_failure_mean"]), repr(stats["trough"]),
                         stats["trough_t"], stats["recovery_steps"],
                         repr(stats["threshold"])])
    stats["traces_csv"] = trace_path
    stats["stats_csv"] = stats_path
    return stats


# -- plotting --------------------------------------------------------------------

def cmd_plot(csv_paths: List[str], out_dir: str) -> List[str]:
    """Line charts with CI bands over seed runs, plus plot-ready data CSVs."""
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "aginsim"
    import matplotlib.pyplot as plt

    runs = [read_csv_columns(p) for p in csv_paths]
    episodes = runs[0]["episode"]
    for run in runs[1:]:
        if not np.array_equal(run["episode"], episodes):
            raise ValueError("input CSVs cover different episode ranges")
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for metric in PLOT_METRICS:
        if metric not in runs[0]:
            continue
        stack = np.stack([run[metric] for run in runs])
        mean = stack.mean(axis=0)
        ci = np.array([t_interval_95(stack[:, i]) for i in range(stack.shape[1])])

        data_path = os.path.join(out_dir, f"plotdata_{metric}.csv")
        with open(data_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean", "ci95"])
            for i in range(episodes.shape[0]):
                writer.writerow([int(episodes[i]), repr(float(mean[i])),
                                 repr(float(ci[i]))])
        outputs.append(data_path)

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(episodes, mean, lw=1.5, label=metric)
        ax.fill_between(episodes, mean - ci, mean + ci, alpha=0.25, lw=0)
        ax.set_xlabel("episode")
        ax.set_ylabel(metric)
        ax.legend(loc="best")
        fig.tight_layout()
        svg_path = os.path.join(out_dir, f"plot_{metric}.svg")
        fig.savefig(svg_path, metadata={"Date": None})
        plt.close(fig)
        outputs.append(svg_path)
    if not outputs:
        raise ValueError("no known metric columns found in the input CSVs")
    return outputs


# -- CLI --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aginsim",
        description="Resilient multi-UAV coverage simulator and trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec_args(p):
        p.add_argument("config", help="experiment YAML file")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="dotted config override")
        p.add_argument("--out", default=None, help="output directory override")

    p_train = sub.add_parser("train", help="train every seed and aggregate")
    add_spec_args(p_train)
    p_train.add_argument("--jobs", type=int, default=1,
                         help="parallel seed jobs (outputs are identical)")
    p_train.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("eval", help="run plain evaluation episodes")
    add_spec_args(p_eval)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--trace", action="store_true",
                        help="dump JSON-lines transition traces")

    p_fail = sub.add_parser("failure-eval",
                            help="paired failure/no-failure evaluation")
    add_spec_args(p_fail)
    p_fail.add_argument("--checkpoint", default=None)

    p_plot = sub.add_parser("plot", help="emit SVG charts and plot data")
    p_plot.add_argument("csvs", nargs="+", help="per-seed training CSVs")
    p_plot.add_argument("--out", required=True, help="output directory")

    p_val = sub.add_parser("validate-config", help="parse and echo a config")
    add_spec_args(p_val)
    return parser


def _spec_for(args) -> ExperimentSpec:
    spec = load_spec(args.config, args.overrides)
    if args.out:
        spec.output_dir = args.out
    return spec


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            spec = _spec_for(args)
            paths = cmd_train(spec, jobs=args.jobs, quiet=args.quiet)
            print(f"wrote {len(paths)} seed runs + aggregate to {spec.output_dir}")
        elif args.command == "eval":
            spec = _spec_for(args)
            paths = cmd_eval(spec, args.checkpoint, trace=args.trace)
            print(f"wrote {len(paths)} evaluation episodes to {spec.output_dir}")
        elif args.command == "failure-eval":
            spec = _spec_for(args)
            stats = cmd_failure_eval(spec, args.checkpoint)
            print("pre-failure coverage {:.4f}, trough {:.4f} at t={}, "
                  "recovery steps {}".format(
                      stats["pre_failure_mean"], stats["trough"],
                      stats["trough_t"], stats["recovery_steps"]))
            print("(full-scale headline target: back to 90% of pre-failure "
                  "coverage within 15 steps)")
        elif args.command == "plot":
            outputs = cmd_plot(args.csvs, args.out)
            print(f"wrote {len(outputs)} plot artifacts to {args.out}")
        elif args.command == "validate-config":
            spec = _spec_for(args)
            print(yaml.safe_dump(spec_to_payload(spec), sort_keys=True))
        else:  # pragma: no cover - argparse enforces choices
            return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
