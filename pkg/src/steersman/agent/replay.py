"""Prioritized replay with multi-step transitions.

Priorities are held in a binary sum tree so proportional sampling and
priority updates are O(log n); the batched tree descent is vectorized.
"""

from __future__ import annotations

from collections import deque

import numpy as np


class SumTree:
    """Fixed-capacity sum tree over nonnegative leaf values."""

    def __init__(self, capacity: int):
        depth = 0
        size = 1
        while size < capacity:
            size *= 2
            depth += 1
        self.capacity = capacity
        self.leaf_offset = size
        self.tree = np.zeros(2 * size)

    def set_single(self, index: int, value: float) -> None:
        tree = self.tree
        i = index + self.leaf_offset
        tree[i] = value
        i >>= 1
        while i >= 1:
            tree[i] = tree[2 * i] + tree[2 * i + 1]
            i >>= 1

    def set(self, indices: np.ndarray, values: np.ndarray) -> None:
        idx = np.asarray(indices, dtype=int) + self.leaf_offset
        self.tree[idx] = values  # duplicate indices: last write wins
        # duplicate parents just repeat identical writes, so no dedup needed
        idx = idx >> 1
        while idx[0] >= 1:
            self.tree[idx] = self.tree[2 * idx] + self.tree[2 * idx + 1]
            if idx[0] == 1:
                break
            idx = idx >> 1

    @property
    def total(self) -> float:
        return self.tree[1]

    def find(self, values: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative range contains each value."""
        values = np.asarray(values, dtype=float).copy()
        idx = np.ones(values.shape, dtype=int)
        while idx[0] < self.leaf_offset:
            left = 2 * idx
            left_sum = self.tree[left]
            go_right = values >= left_sum
            values -= np.where(go_right, left_sum, 0.0)
            idx = left + go_right
        return idx - self.leaf_offset

    def get(self, indices: np.ndarray) -> np.ndarray:
        return self.tree[np.asarray(indices, dtype=int) + self.leaf_offset]


class PrioritizedReplay:
    """Cyclic transition store with priority-proportional sampling."""

    def __init__(self, capacity: int, obs_size: int, alpha: float,
                 obs_dtype=np.float64):
        if alpha < 0:
            raise ValueError("priority exponent must be non-negative")
        self.capacity = capacity
        self.alpha = alpha
        self.obs = np.zeros((capacity, obs_size), dtype=obs_dtype)
        self.next_obs = np.zeros((capacity, obs_size), dtype=obs_dtype)
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.discounts = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.tree = SumTree(capacity)
        self.size = 0
        self.cursor = 0
        self.max_priority = 1.0

    def add(self, obs, action, reward_n, discount_n, next_obs, done) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward_n
        self.discounts[i] = discount_n
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self.tree.set_single(i, self.max_priority ** self.alpha)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, beta: float, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        targets = rng.random(batch_size) * self.tree.total
        indices = self.tree.find(targets)
        indices = np.minimum(indices, self.size - 1)
        probs = self.tree.get(indices) / self.tree.total
        weights = (self.size * probs) ** (-beta)
        weights /= weights.max()
        batch = {
            "obs": self.obs[indices],
            "actions": self.actions[indices],
            "rewards": self.rewards[indices],
            "discounts": self.discounts[indices],
            "next_obs": self.next_obs[indices],
            "dones": self.dones[indices],
            "weights": weights,
            "indices": indices,
        }
        return batch

    def update_priorities(self, indices: np.ndarray, priorities: np.ndarray) -> None:
        priorities = np.asarray(priorities, dtype=float)
        if np.any(priorities <= 0):
            raise ValueError("priorities must be strictly positive")
        self.max_priority = max(self.max_priority, float(priorities.max()))
        self.tree.set(indices, priorities ** self.alpha)


class NStepAccumulator:
    """Folds single-step transitions into n-step ones with discount gamma.

    Stored returns are sum_{t<k} gamma^t r_t with k <= n; at an episode end
    the pending shorter-horizon transitions are flushed against the final
    observation.
    """

    def __init__(self, n: int, gamma: float):
        if n < 1:
            raise ValueError("multi-step horizon must be at least 1")
        self.n = n
        self.gamma = gamma
        self.pending: deque = deque()

    def push(self, obs, action, reward, next_obs, done) -> list:
        self.pending.append((obs, action, reward))
        out = []
        if done:
            while self.pending:
                out.append(self._mature(next_obs, True))
        elif len(self.pending) == self.n:
            out.append(self._mature(next_obs, False))
        return out

    def _mature(self, next_obs, done):
        obs0, action0, _ = self.pending[0]
        ret = 0.0
        for k, (_, _, r) in enumerate(self.pending):
            ret += (self.gamma ** k) * r
        discount = self.gamma ** len(self.pending)
        self.pending.popleft()
        return (obs0, action0, ret, discount, next_obs, done)

    def reset(self) -> None:
        self.pending.clear()
