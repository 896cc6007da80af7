"""Training loop: epsilon-greedy acting, double-Q distributional targets,
KL loss with importance weights, target-network syncing, epoch metrics,
and checkpoint persistence."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..environment import SteeringEnv
from .distribution import SupportSpec, project_target, q_values
from .network import AdamOptimizer, ValueNetwork
from .replay import NStepAccumulator, PrioritizedReplay

CHECKPOINT_VERSION = 1
PRIORITY_FLOOR = 1e-6


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 6.25e-5
    gamma: float = 0.9
    target_sync_period: int = 3200
    epsilon_final: float = 0.01
    epsilon_anneal_steps: int = 250_000
    epoch_steps: int = 10_000
    epochs: int = 100
    test_episodes_per_epoch: int = 3
    batch_size: int = 32
    buffer_capacity: int = 100_000
    warmup_steps: int = 1_000
    multi_step: int = 3
    priority_alpha: float = 0.5
    beta_start: float = 0.4
    hidden: tuple = (256, 128)
    atom_count: int = 51
    v_min: float = -1.0
    v_max: float = 1.0
    checkpoint_period: int = 25
    precision: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise TrainingError("gamma must lie in (0, 1]")
        if not 0 <= self.epsilon_final <= 1:
            raise TrainingError("epsilon_final must lie in [0, 1]")
        if self.precision not in ("float32", "float64"):
            raise TrainingError("precision must be 'float32' or 'float64'")
        self.hidden = tuple(self.hidden)

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    @property
    def total_steps(self) -> int:
        return self.epochs * self.epoch_steps

    def support(self) -> SupportSpec:
        return SupportSpec(self.atom_count, self.v_min, self.v_max)


@dataclass
class EpochMetrics:
    epoch: int
    mean_episode_reward: float
    reward_std: float
    final_score: float
    episode_score_sum: float
    epsilon: float
    wall_time: float


def epsilon_schedule(step: int, config: TrainConfig) -> float:
    """Linear anneal from 1 to epsilon_final over the first
    min(epsilon_anneal_steps, total_steps) environment steps."""
    horizon = min(config.epsilon_anneal_steps, config.total_steps)
    frac = min(step / horizon, 1.0) if horizon > 0 else 1.0
    return 1.0 + frac * (config.epsilon_final - 1.0)


def beta_schedule(step: int, config: TrainConfig) -> float:
    frac = min(step / config.total_steps, 1.0)
    return config.beta_start + frac * (1.0 - config.beta_start)


def act(net: ValueNetwork, observation: np.ndarray, epsilon: float,
        rng: np.random.Generator, support: SupportSpec) -> int:
    """Epsilon-greedy action; greedy ties resolve to the lowest code."""
    if rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(q_values(net.forward(observation), support)))


def td_update(online: ValueNetwork, target: ValueNetwork, batch: dict,
              support: SupportSpec, config: TrainConfig):
    """One distributional TD step.

    Next actions are picked by the online network's expectation (double-Q);
    the target network's distribution is projected through the n-step
    Bellman operator; the loss is the importance-weighted mean KL from the
    projected target to the online distribution.

    Returns (loss, gradients, new_priorities).
    """
    next_obs = batch["next_obs"]
    online_next = online.forward(next_obs)
    next_actions = np.argmax(q_values(online_next, support), axis=1)
    rows = np.arange(len(next_actions))
    target_next = target.forward(next_obs)[rows, next_actions]
    projected = project_target(support, batch["rewards"], batch["discounts"],
                               target_next, batch["dones"].astype(float))

    log_p_all, cache = online.forward_training(batch["obs"])
    log_p = log_p_all[rows, batch["actions"]]
    m = projected
    with np.errstate(divide="ignore", invalid="ignore"):
        m_log_m = np.where(m > 0, m * np.log(m), 0.0)
    kl = (m_log_m - m * log_p).sum(axis=1)

    weights = batch["weights"]
    loss = float(np.mean(weights * kl))
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss; kl range [{kl.min()}, {kl.max()}], "
            f"rewards range [{batch['rewards'].min()}, {batch['rewards'].max()}]"
        )

    batch_size = m.shape[0]
    p = np.exp(log_p)
    grad_logits = np.zeros_like(log_p_all)
    mass = m.sum(axis=1, keepdims=True)
    grad_logits[rows, batch["actions"]] = (weights[:, None] / batch_size) * (p * mass - m)
    grads = online.backprop(cache, grad_logits)

    new_priorities = np.maximum(kl, PRIORITY_FLOOR)
    return loss, grads, new_priorities


def run_greedy_episode(env: SteeringEnv, net: ValueNetwork, support: SupportSpec,
                       condition: str | None = None) -> dict:
    """One greedy test episode; returns reward/score statistics."""
    state = env.reset(condition)
    obs = env.observe(state)
    total_reward = 0.0
    score_sum = 0.0
    scores = []
    while True:
        action = int(np.argmax(q_values(net.forward(obs), support)))
        result = env.step(action)
        total_reward += result.reward
        score_sum += result.info["score"]
        scores.append(result.info["score"])
        obs = env.observe(result.state)
        if result.truncated:
            break
    return {
        "episode_reward": total_reward,
        "final_score": scores[-1],
        "score_sum": score_sum,
        "scores": scores,
        "condition": state.condition_label,
    }


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def save_checkpoint(path, online: ValueNetwork, optimizer: AdamOptimizer,
                    config: TrainConfig, global_step: int, config_digest: str,
                    rng_states: dict) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config_digest": config_digest,
        "layer_dims": online.layer_dims,
        "n_actions": online.n_actions,
        "n_atoms": online.n_atoms,
        "hidden": list(online.hidden),
        "global_step": global_step,
        "precision": str(np.dtype(online.dtype)),
        "optimizer_t": optimizer.t,
        "rng_states": rng_states,
        "train_config": {k: (list(v) if isinstance(v, tuple) else v)
                         for k, v in asdict(config).items()},
    }
    np.savez(path, meta=json.dumps(meta), params=online.get_flat(),
             adam_m=optimizer.m, adam_v=optimizer.v)


def load_checkpoint(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise TrainingError(
                f"checkpoint version {meta.get('version')!r}, expected {CHECKPOINT_VERSION}"
            )
        arrays = {k: data[k] for k in data.files if k != "meta"}
    return {"meta": meta, "arrays": arrays}


def network_from_checkpoint(payload: dict) -> ValueNetwork:
    meta = payload["meta"]
    dtype = np.float32 if meta.get("precision") == "float32" else np.float64
    net = ValueNetwork(meta["layer_dims"][0], tuple(meta["hidden"]),
                       meta["n_actions"], meta["n_atoms"], dtype=dtype)
    net.set_flat(payload["arrays"]["params"])
    return net


def train(env: SteeringEnv, config: TrainConfig, out_dir=None,
          config_digest: str = "", eval_env: SteeringEnv | None = None,
          progress=None):
    """Train the agent on the environment.

    Returns (metrics, checkpoint_paths, online_network).  One gradient step
    per environment step once the warmup buffer is filled; the target network
    syncs every target_sync_period environment steps.
    """
    support = config.support()
    obs_size = env.observation_size
    init_rng = np.random.default_rng(config.seed)
    online = ValueNetwork(obs_size, config.hidden, env.n_actions,
                          config.atom_count, init_rng, dtype=config.dtype)
    target = online.clone()
    optimizer = AdamOptimizer(online, config.learning_rate)
    buffer = PrioritizedReplay(config.buffer_capacity, obs_size,
                               config.priority_alpha, obs_dtype=config.dtype)
    nstep = NStepAccumulator(config.multi_step, config.gamma)
    action_rng = np.random.default_rng(config.seed + 1)
    sample_rng = np.random.default_rng(config.seed + 2)
    if eval_env is None:
        eval_env = SteeringEnv(env.library, env.n_sensors,
                               episode_length=env.episode_length,
                               observe_condition=env.observe_condition,
                               seed=config.seed + 3)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    metrics: list[EpochMetrics] = []
    checkpoints: list[Path] = []
    warmup = max(config.warmup_steps, config.batch_size)
    global_step = 0
    t0 = time.perf_counter()

    obs = env.observe(env.reset())
    for epoch in range(1, config.epochs + 1):
        for _ in range(config.epoch_steps):
            eps = epsilon_schedule(global_step, config)
            action = act(online, obs, eps, action_rng, support)
            result = env.step(action)
            next_obs = env.observe(result.state)
            for tr in nstep.push(obs, action, result.reward, next_obs, result.truncated):
                buffer.add(*tr)
            if result.truncated:
                obs = env.observe(env.reset())
            else:
                obs = next_obs

            if buffer.size >= warmup:
                beta = beta_schedule(global_step, config)
                batch = buffer.sample(config.batch_size, beta, sample_rng)
                loss, grads, priorities = td_update(online, target, batch, support, config)
                optimizer.step(online, grads)
                buffer.update_priorities(batch["indices"], priorities)

            global_step += 1
            if global_step % config.target_sync_period == 0:
                target.copy_from(online)

        episodes = [run_greedy_episode(eval_env, online, support)
                    for _ in range(config.test_episodes_per_epoch)]
        rewards = np.array([e["episode_reward"] for e in episodes])
        record = EpochMetrics(
            epoch=epoch,
            mean_episode_reward=float(rewards.mean()),
            reward_std=float(rewards.std()),
            final_score=float(np.mean([e["final_score"] for e in episodes])),
            episode_score_sum=float(np.mean([e["score_sum"] for e in episodes])),
            epsilon=epsilon_schedule(global_step, config),
            wall_time=time.perf_counter() - t0,
        )
        metrics.append(record)
        if progress is not None:
            progress(record)

        if out_dir is not None and (epoch % config.checkpoint_period == 0
                                    or epoch == config.epochs):
            path = out_dir / f"checkpoint_epoch{epoch:04d}.npz"
            rng_states = {
                "env": _rng_state(env.rng),
                "eval_env": _rng_state(eval_env.rng),
                "action": _rng_state(action_rng),
                "sample": _rng_state(sample_rng),
            }
            save_checkpoint(path, online, optimizer, config, global_step,
                            config_digest, rng_states)
            checkpoints.append(path)

    return metrics, checkpoints, online
