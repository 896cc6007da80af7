"""Deterministic sensor-steering MDP.

State: an occupancy vector over the candidate grid plus the ordered sensor
positions.  Actions: (sensor, direction) moves decoded from a flat code.
Moves off the grid or onto an occupied node are null actions (state
unchanged, zero reward).  Reward: normalized configuration-score difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import information
from .plate import (CandidateGrid, ConditionSpec, DiscreteModel, ModalBasis, PlateSpec,
                    apply_condition, build_plate, solve_modes)

N_DIRECTIONS = 4  # left, right, up, down


class EnvError(Exception):
    pass


@dataclass(frozen=True)
class EnvState:
    positions: tuple          # ordered sensor node ids
    occupancy: np.ndarray     # binary vector length n*, read-only
    condition_label: str
    step_count: int
    last_score: float


@dataclass
class StepResult:
    state: EnvState
    reward: float
    truncated: bool
    info: dict


def decode_action(code: int, n_sensors: int) -> tuple[int, int]:
    """Flat action code -> (sensor index, direction)."""
    code = int(code)
    if not 0 <= code < N_DIRECTIONS * n_sensors:
        raise EnvError(f"action code {code} outside [0, {N_DIRECTIONS * n_sensors})")
    return code // N_DIRECTIONS, code % N_DIRECTIONS


def initial_layout(grid: CandidateGrid, p: int) -> tuple:
    """p sensors evenly spaced on the mid-width row of the grid."""
    if p > grid.cols:
        raise EnvError(f"cannot place {p} sensors on {grid.cols} columns")
    row = grid.rows // 2
    cols = [int(math.floor((k + 1) * grid.cols / (p + 1) + 0.5)) - 1 for k in range(p)]
    if len(set(cols)) != p:
        raise EnvError(f"initial layout collision for {p} sensors on {grid.cols} columns")
    return tuple(grid.node_id(row, c) for c in cols)


@dataclass
class ConditionModel:
    """Precomputed scoring pipeline for one structural condition."""

    spec: ConditionSpec
    basis: ModalBasis
    covariance: information.CovarianceCache
    normalization: float
    score_cache: dict = field(default_factory=dict)


class ModelLibrary:
    """Per-condition modal bases, covariances, and score normalizers."""

    def __init__(self, plate_spec: PlateSpec, conditions: list[ConditionSpec],
                 n_modes: int, n_sensors: int, delta: float | None = None,
                 c2: float = 0.0):
        labels = [c.label for c in conditions]
        if len(set(labels)) != len(labels):
            raise EnvError(f"duplicate condition labels: {labels}")
        self.plate_spec = plate_spec
        self.n_modes = n_modes
        self.n_sensors = n_sensors
        model = build_plate(plate_spec)
        self.grid = model.grid
        if delta is None:
            delta = math.hypot(plate_spec.placement_length, plate_spec.width)
        self.delta = delta
        self.c2 = c2
        self.conditions: dict[str, ConditionModel] = {}
        for cond in conditions:
            cm = apply_condition(model, cond) if cond.masses else replace(
                model, condition_label=cond.label)
            basis = solve_modes(cm, n_modes)
            cov = information.build_covariance(basis, self.grid, delta, c2)
            norm = information.normalizer(basis, cov, n_sensors)
            self.conditions[cond.label] = ConditionModel(
                spec=cond, basis=basis, covariance=cov, normalization=norm)

    @property
    def labels(self) -> list[str]:
        return list(self.conditions.keys())

    def condition(self, label: str) -> ConditionModel:
        if label not in self.conditions:
            raise EnvError(f"unknown condition {label!r}; library has {self.labels}")
        return self.conditions[label]


class SteeringEnv:
    """Sensor-steering environment over a loaded model library."""

    def __init__(self, library: ModelLibrary, n_sensors: int,
                 episode_length: int = 1000, observe_condition: bool = False,
                 seed: int = 0):
        self.library = library
        self.n_sensors = n_sensors
        self.episode_length = episode_length
        self.observe_condition = observe_condition
        self.rng = np.random.default_rng(seed)
        self.grid = library.grid
        self.state: EnvState | None = None
        self._cond: ConditionModel | None = None

    @property
    def n_actions(self) -> int:
        return N_DIRECTIONS * self.n_sensors

    @property
    def observation_size(self) -> int:
        n = self.grid.n_nodes
        return n + len(self.library.labels) if self.observe_condition else n

    def _score(self, positions) -> float:
        cond = self._cond
        key = tuple(sorted(positions))
        cached = cond.score_cache.get(key)
        if cached is not None:
            return cached
        result = information.fim(information.ObservationSelector(positions),
                                 cond.basis, cond.covariance,
                                 normalization=cond.normalization)
        cond.score_cache[key] = result.score
        return result.score

    def reset(self, condition: str | None = None) -> EnvState:
        if condition is None:
            condition = self.library.labels[self.rng.integers(len(self.library.labels))]
        self._cond = self.library.condition(condition)
        positions = tuple(sorted(initial_layout(self.grid, self.n_sensors)))
        occupancy = np.zeros(self.grid.n_nodes, dtype=np.int8)
        occupancy[list(positions)] = 1
        occupancy.flags.writeable = False
        self.state = EnvState(positions=positions, occupancy=occupancy,
                              condition_label=condition, step_count=0,
                              last_score=self._score(positions))
        return self.state

    def observe(self, state: EnvState | None = None) -> np.ndarray:
        state = state if state is not None else self.state
        obs = state.occupancy.astype(np.float64)
        if self.observe_condition:
            one_hot = np.zeros(len(self.library.labels))
            one_hot[self.library.labels.index(state.condition_label)] = 1.0
            obs = np.concatenate([obs, one_hot])
        return obs

    def step(self, action: int) -> StepResult:
        if self.state is None:
            raise EnvError("step called before reset")
        state = self.state
        sensor, direction = decode_action(action, self.n_sensors)
        source = state.positions[sensor]
        target = self.grid.neighbor(source, direction)
        null_action = bool(target < 0 or state.occupancy[target] == 1)

        if null_action:
            positions = state.positions
            occupancy = state.occupancy
            score = state.last_score
            step_reward = 0.0
        else:
            positions = tuple(target if k == sensor else pos
                              for k, pos in enumerate(state.positions))
            occupancy = state.occupancy.copy()
            occupancy[source] = 0
            occupancy[target] = 1
            occupancy.flags.writeable = False
            score = self._score(positions)
            step_reward = information.reward(state.last_score, score)

        new_state = EnvState(positions=positions, occupancy=occupancy,
                             condition_label=state.condition_label,
                             step_count=state.step_count + 1, last_score=score)
        self.state = new_state
        truncated = new_state.step_count >= self.episode_length
        return StepResult(state=new_state, reward=step_reward, truncated=truncated,
                          info={"score": score, "null_action": null_action})
