"""Experiment orchestration: config files, the training/evaluation runs,
metrics CSV emission, and SVG plots.

Config files are JSON documents (conventionally *.cfg) with four blocks:
plate, conditions, env, agent, plus output_dir and seed.  Unknown keys are
rejected and all violations are reported together.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import baselines
from .agent import (EpochMetrics, SupportSpec, TrainConfig, load_checkpoint,
                    network_from_checkpoint, q_values, train)
from .environment import ModelLibrary, SteeringEnv
from .plate import ConditionSpec, PlateSpec

METRIC_COLUMNS = ["epoch", "mean_episode_reward", "reward_std", "final_score",
                  "episode_score_sum", "epsilon", "wall_time"]
SMOOTH_WINDOW = 10


class ConfigError(Exception):
    pass


@dataclass
class EnvBlock:
    sensors: int
    modes: int
    episode_length: int = 1000
    observe_condition: bool = False
    delta: float | None = None
    c2: float = 0.0


@dataclass
class ExperimentConfig:
    plate: PlateSpec
    conditions: list
    env: EnvBlock
    agent: TrainConfig
    output_dir: str
    seed: int
    digest: str = ""

    def build_library(self) -> ModelLibrary:
        return ModelLibrary(self.plate, self.conditions, self.env.modes,
                            self.env.sensors, delta=self.env.delta, c2=self.env.c2)

    def build_env(self, library: ModelLibrary, seed_offset: int = 0) -> SteeringEnv:
        return SteeringEnv(library, self.env.sensors,
                           episode_length=self.env.episode_length,
                           observe_condition=self.env.observe_condition,
                           seed=self.seed + seed_offset)


def _check_block(raw: dict, cls, prefix: str, errors: list, required: set) -> dict:
    known = {f.name for f in dc_fields(cls)}
    for key in raw:
        if key not in known:
            errors.append(f"{prefix}: unknown key {key!r}")
    for key in required:
        if key not in raw:
            errors.append(f"{prefix}: missing required field {key!r}")
    return {k: v for k, v in raw.items() if k in known}


def config_digest(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]


def parse_config(raw: dict) -> ExperimentConfig:
    errors: list[str] = []
    top_known = {"plate", "conditions", "env", "agent", "output_dir", "seed"}
    for key in raw:
        if key not in top_known:
            errors.append(f"unknown top-level key {key!r}")
    for key in ("plate", "conditions", "env", "output_dir", "seed"):
        if key not in raw:
            errors.append(f"missing required field {key!r}")

    plate = None
    if isinstance(raw.get("plate"), dict):
        plate_fields = _check_block(raw["plate"], PlateSpec, "plate", errors,
                                    {f.name for f in dc_fields(PlateSpec)})
        if not errors:
            try:
                plate = PlateSpec(**plate_fields)
            except Exception as exc:
                errors.append(f"plate: {exc}")

    conditions = []
    labels = []
    for k, entry in enumerate(raw.get("conditions") or []):
        label = entry.get("label")
        if label is None:
            errors.append(f"conditions[{k}]: missing label")
            continue
        labels.append(label)
        masses = tuple((m, tuple(pos)) for m, pos in entry.get("masses", []))
        try:
            conditions.append(ConditionSpec(label=label, masses=masses))
        except Exception as exc:
            errors.append(f"conditions[{k}]: {exc}")
    if labels and len(set(labels)) != len(labels):
        errors.append(f"duplicate condition labels: {labels}")
    if "conditions" in raw and not raw["conditions"]:
        errors.append("conditions: at least one condition required")

    env_block = None
    if isinstance(raw.get("env"), dict):
        env_fields = _check_block(raw["env"], EnvBlock, "env", errors,
                                  {"sensors", "modes"})
        if not errors:
            env_block = EnvBlock(**env_fields)

    agent_fields = _check_block(raw.get("agent") or {}, TrainConfig, "agent", errors, set())

    if not errors and plate is not None and env_block is not None:
        if env_block.sensors < 1:
            errors.append("env: sensors must be at least 1")
        if env_block.modes < 1:
            errors.append("env: modes must be at least 1")
        if env_block.sensors > plate.grid_cols:
            errors.append(
                f"env: {env_block.sensors} sensors exceed {plate.grid_cols} grid columns")
        for cond in conditions:
            try:
                cond.validate_on(plate)
            except Exception as exc:
                errors.append(str(exc))

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))

    agent_fields.setdefault("seed", raw["seed"])
    agent = TrainConfig(**agent_fields)
    return ExperimentConfig(plate=plate, conditions=conditions, env=env_block,
                            agent=agent, output_dir=raw["output_dir"],
                            seed=raw["seed"], digest=config_digest(raw))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise ConfigError(
            "invalid configuration:\n  empty file; required fields: "
            "plate, conditions, env, output_dir, seed")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def moving_average(values, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing moving average with partial windows at the start; a constant
    series is left unchanged."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def write_metrics_csv(records: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for r in records:
            writer.writerow([r.epoch, repr(r.mean_episode_reward), repr(r.reward_std),
                             repr(r.final_score), repr(r.episode_score_sum),
                             repr(r.epsilon), repr(r.wall_time)])


def read_metrics_csv(path) -> list:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRIC_COLUMNS:
            raise ConfigError(f"unexpected metrics header {reader.fieldnames}")
        for row in reader:
            records.append(EpochMetrics(
                epoch=int(row["epoch"]),
                mean_episode_reward=float(row["mean_episode_reward"]),
                reward_std=float(row["reward_std"]),
                final_score=float(row["final_score"]),
                episode_score_sum=float(row["episode_score_sum"]),
                epsilon=float(row["epsilon"]),
                wall_time=float(row["wall_time"])))
    return records


def plot_metrics(run_dir) -> list:
    """Emit reward/score SVG line plots (raw + smoothed) from metrics.csv."""
    run_dir = Path(run_dir)
    csv_path = run_dir / "metrics.csv"
    if not csv_path.exists():
        raise ConfigError(f"no metrics.csv in {run_dir}")
    records = read_metrics_csv(csv_path)
    epochs = [r.epoch for r in records]
    produced = []
    series = [
        ("reward.svg", "mean episode reward", [r.mean_episode_reward for r in records]),
        ("final_score.svg", "episode final score", [r.final_score for r in records]),
        ("score_sum.svg", "episode score sum", [r.episode_score_sum for r in records]),
    ]
    for fname, label, values in series:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(epochs, values, alpha=0.35, label="raw")
        ax.plot(epochs, moving_average(values), label=f"moving average ({SMOOTH_WINDOW})")
        ax.set_xlabel("epoch")
        ax.set_ylabel(label)
        ax.legend()
        fig.tight_layout()
        out = run_dir / fname
        fig.savefig(out)
        plt.close(fig)
        produced.append(out)
    return produced


def run_train(config: ExperimentConfig, progress=None) -> dict:
    """Full training run: library, environment, agent, metrics CSV, plots,
    checkpoints.  Returns artifact paths."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    library = config.build_library()
    env = config.build_env(library)
    metrics, checkpoints, _net = train(env, config.agent, out_dir=out_dir,
                                       config_digest=config.digest,
                                       progress=progress)
    csv_path = out_dir / "metrics.csv"
    write_metrics_csv(metrics, csv_path)
    plots = plot_metrics(out_dir)
    return {"metrics_csv": csv_path, "plots": plots, "checkpoints": checkpoints,
            "metrics": metrics}


def _max_workers() -> int:
    value = os.environ.get("STEERSMAN_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def greedy_policy(net, support: SupportSpec):
    def policy(obs):
        return int(np.argmax(q_values(net.forward(obs), support)))
    return policy


def run_eval(checkpoint_path, config: ExperimentConfig, conditions=None,
             steps: int | None = None, random_seeds: int = 5,
             snapshot_steps=(0, 35, 70, 105), out_dir=None) -> dict:
    """Compare the trained greedy policy against the EFI placement and a
    random policy on each condition; emit a comparison CSV, per-condition
    plots, and sensor-path snapshots."""
    payload = load_checkpoint(checkpoint_path)
    if payload["meta"]["config_digest"] != config.digest:
        raise ConfigError(
            f"checkpoint digest {payload['meta']['config_digest']} does not match "
            f"config digest {config.digest}")
    net = network_from_checkpoint(payload)
    agent_cfg = TrainConfig(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in payload["meta"]["train_config"].items()})
    support = agent_cfg.support()

    library = config.build_library()
    steps = steps if steps is not None else config.env.episode_length
    conditions = conditions if conditions is not None else library.labels
    out_dir = Path(out_dir) if out_dir is not None else Path(config.output_dir) / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)

    def random_curve(seed):
        env = SteeringEnv(library, config.env.sensors, episode_length=steps,
                          observe_condition=config.env.observe_condition, seed=seed)
        env.reset(label)
        rng = np.random.default_rng(seed)
        return baselines.random_policy(env, rng, steps, condition=label)

    results = {}
    rows = []
    for label in conditions:
        cond = library.condition(label)
        env = SteeringEnv(library, config.env.sensors, episode_length=steps,
                          observe_condition=config.env.observe_condition,
                          seed=config.seed)
        state = env.reset(label)
        obs = env.observe(state)
        agent_scores = []
        snapshots = {0: list(state.positions)}
        for t in range(1, steps + 1):
            result = env.step(greedy_policy(net, support)(obs))
            agent_scores.append(result.info["score"])
            obs = env.observe(result.state)
            if t in snapshot_steps:
                snapshots[t] = list(result.state.positions)

        efi = baselines.efi_select(cond, config.env.sensors)
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            random_curves = list(pool.map(random_curve, range(1, random_seeds + 1)))
        random_mean = np.mean(np.array(random_curves), axis=0)

        for t in range(steps):
            rows.append([label, t + 1, repr(agent_scores[t]), repr(efi.score),
                         repr(float(random_mean[t]))])

        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(range(1, steps + 1), agent_scores, label="trained agent")
        ax.axhline(efi.score, color="tab:orange", label="EFI placement")
        ax.plot(range(1, steps + 1), random_mean, color="tab:green",
                label=f"random (mean of {random_seeds})")
        ax.set_xlabel("step")
        ax.set_ylabel("configuration score")
        ax.set_title(label)
        ax.legend()
        fig.tight_layout()
        plot_path = out_dir / f"eval_{label}.svg"
        fig.savefig(plot_path)
        plt.close(fig)

        results[label] = {
            "agent_scores": agent_scores,
            "efi_score": efi.score,
            "random_mean": random_mean.tolist(),
            "snapshots": snapshots,
            "plot": plot_path,
        }

    csv_path = out_dir / "comparison.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "step", "agent_score", "efi_score",
                         "random_mean_score"])
        writer.writerows(rows)
    snap_path = out_dir / "snapshots.json"
    with open(snap_path, "w") as fh:
        json.dump({label: results[label]["snapshots"] for label in results}, fh, indent=2)
    return {"comparison_csv": csv_path, "snapshots": snap_path, "results": results}
