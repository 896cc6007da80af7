"""Train a small distributional Q-learning agent to steer two sensors across
a plate, then replay the greedy policy and compare it with random motion.

This is a scaled-down run (a few epochs on a coarse grid) meant to finish in
about a minute; the bundled configs/desk.cfg drives the full-length version
through the CLI.

Run with:  python demos/steer_sensors_rl.py
"""

import numpy as np

from steersman.agent import SupportSpec, TrainConfig, run_greedy_episode, train
from steersman.baselines import random_policy
from steersman.environment import ModelLibrary, SteeringEnv
from steersman.plate import ConditionSpec, PlateSpec


def main() -> None:
    spec = PlateSpec(
        length=0.45, width=0.15, thickness=0.003, clamp_depth=0.03,
        youngs_modulus=70e9, density=2700.0, poisson_ratio=0.33,
        grid_cols=15, grid_rows=5,
    )
    library = ModelLibrary(spec, [ConditionSpec("healthy", ())],
                           n_modes=2, n_sensors=2)
    env = SteeringEnv(library, n_sensors=2, episode_length=200, seed=0)

    config = TrainConfig(
        learning_rate=1e-4, hidden=(64, 64), epochs=6, epoch_steps=8000,
        warmup_steps=1000, epsilon_anneal_steps=30000, precision="float32",
        seed=0,
    )
    print("training (6 epochs x 8000 steps)...")
    metrics, _, net = train(env, config)
    for m in metrics:
        print(f"  epoch {m.epoch}: final test score {m.final_score:.4f}, "
              f"epsilon {m.epsilon:.3f}")

    episode = run_greedy_episode(env, net, SupportSpec(), condition="healthy")
    print(f"\ngreedy policy: final score {episode['final_score']:.4f}, "
          f"mean over episode {episode['score_sum'] / 200:.4f}")

    finals = []
    for seed in range(10):
        renv = SteeringEnv(library, n_sensors=2, episode_length=200,
                           seed=seed)
        renv.reset("healthy")
        finals.append(random_policy(renv, np.random.default_rng(seed),
                                    200)[-1])
    print(f"random policy: mean final score {np.mean(finals):.4f} "
          f"over 10 seeds")


if __name__ == "__main__":
    main()
