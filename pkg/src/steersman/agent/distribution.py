"""Categorical return distributions on a fixed atom support."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SupportSpec:
    """Equidistant atoms z_0..z_{n-1} on [v_min, v_max]."""

    atom_count: int = 51
    v_min: float = -1.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.atom_count < 2:
            raise ValueError("need at least 2 atoms")
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")

    @property
    def delta_z(self) -> float:
        return (self.v_max - self.v_min) / (self.atom_count - 1)

    @property
    def atoms(self) -> np.ndarray:
        return self.v_min + self.delta_z * np.arange(self.atom_count)


def q_values(dists: np.ndarray, support: SupportSpec) -> np.ndarray:
    """Expected return per action: Q(a) = sum_i z_i p_i(a)."""
    return np.asarray(dists) @ support.atoms


def project_target(support: SupportSpec, reward_n, discount_n, next_dist,
                   done) -> np.ndarray:
    """Project the Bellman-shifted distribution back onto the support.

    Each atom z_j maps to clip(reward + discount * z_j * (1 - done),
    v_min, v_max) and its probability is split linearly between the two
    bracketing atoms.  Accepts a single distribution or a batch.
    """
    next_dist = np.asarray(next_dist, dtype=float)
    single = next_dist.ndim == 1
    next_dist = np.atleast_2d(next_dist)
    batch = next_dist.shape[0]
    reward_n = np.broadcast_to(np.asarray(reward_n, dtype=float), (batch,))
    discount_n = np.broadcast_to(np.asarray(discount_n, dtype=float), (batch,))
    alive = 1.0 - np.broadcast_to(np.asarray(done, dtype=float), (batch,))

    z = support.atoms
    tz = reward_n[:, None] + discount_n[:, None] * alive[:, None] * z[None, :]
    tz = np.clip(tz, support.v_min, support.v_max)
    b = (tz - support.v_min) / support.delta_z
    lo = np.floor(b).astype(int)
    hi = np.ceil(b).astype(int)
    same = (lo == hi).astype(float)  # atom falls exactly on the grid

    n_atoms = support.atom_count
    row_base = n_atoms * np.arange(batch)[:, None]
    size = batch * n_atoms
    out = np.bincount((row_base + lo).ravel(),
                      weights=(next_dist * (hi - b + same)).ravel(), minlength=size)
    out += np.bincount((row_base + hi).ravel(),
                       weights=(next_dist * (b - lo)).ravel(), minlength=size)
    out = out.reshape(batch, n_atoms)
    return out[0] if single else out


def greedy_action(dists: np.ndarray, support: SupportSpec) -> int:
    """Argmax of expected return with lowest-code tie-break."""
    return int(np.argmax(q_values(dists, support)))
