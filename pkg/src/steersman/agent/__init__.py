from .distribution import SupportSpec, greedy_action, project_target, q_values
from .network import AdamOptimizer, ValueNetwork
from .replay import NStepAccumulator, PrioritizedReplay, SumTree
from .training import (EpochMetrics, TrainConfig, TrainingError, act,
                       epsilon_schedule, load_checkpoint, network_from_checkpoint,
                       run_greedy_episode, save_checkpoint, td_update, train)

__all__ = [
    "SupportSpec", "greedy_action", "project_target", "q_values",
    "AdamOptimizer", "ValueNetwork",
    "NStepAccumulator", "PrioritizedReplay", "SumTree",
    "EpochMetrics", "TrainConfig", "TrainingError", "act", "epsilon_schedule",
    "load_checkpoint", "network_from_checkpoint", "run_greedy_episode",
    "save_checkpoint", "td_update", "train",
]
