"""Classical placement references: effective independence with a correlated
error covariance, greedy forward placement, the exhaustive optimum, and
random/greedy policy rollouts.  All scores go through the same
Fisher-information pipeline as the environment reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import information
from .environment import ConditionModel, SteeringEnv


class PlacementError(Exception):
    pass


@dataclass
class PlacementResult:
    selected: tuple
    det: float
    score: float
    method: str


def _scored(selected, cond: ConditionModel, method: str) -> PlacementResult:
    result = information.fim(information.ObservationSelector(selected),
                             cond.basis, cond.covariance,
                             normalization=cond.normalization)
    return PlacementResult(selected=tuple(sorted(int(i) for i in selected)),
                           det=result.det, score=result.score, method=method)


def effective_independence_values(phi_sel: np.ndarray, sigma_sel: np.ndarray) -> np.ndarray:
    """Per-sensor effective-independence values for the current selection.

    The selection's mode-shape rows are prewhitened by the Cholesky factor
    of its covariance block; the values are the diagonal of the orthogonal
    projector onto the whitened column space, so they lie in [0, 1] and sum
    to the mode count.
    """
    chol = np.linalg.cholesky(sigma_sel)
    white = np.linalg.solve(chol, phi_sel)
    qmat, _ = np.linalg.qr(white)
    return (qmat ** 2).sum(axis=1)


def efi_select(cond: ConditionModel, p: int) -> PlacementResult:
    """Backward elimination: repeatedly drop the retained candidate with the
    smallest effective-independence value until p sensors remain."""
    phi = cond.basis.phi
    n, m = phi.shape
    if p > n:
        raise PlacementError(f"cannot keep {p} of {n} candidates")
    if p < m:
        raise PlacementError(f"need at least {m} sensors for a full-rank FIM")
    retained = list(range(n))
    rounds = 0
    while len(retained) > p:
        rounds += 1
        idx = np.array(retained)
        try:
            ed = effective_independence_values(phi[idx], cond.covariance.sigma[np.ix_(idx, idx)])
        except np.linalg.LinAlgError as exc:
            raise PlacementError(f"rank collapse at elimination round {rounds}") from exc
        drop = int(np.argmin(ed))  # argmin ties resolve to lowest index
        retained.pop(drop)
    return _scored(retained, cond, "efi")


def fssp_select(cond: ConditionModel, p: int) -> PlacementResult:
    """Greedy forward sequential placement maximizing the FIM determinant."""
    selected = information.greedy_forward_selection(cond.basis, cond.covariance, p)
    return _scored(selected, cond, "fssp")


def brute_force_optimum(cond: ConditionModel, p: int) -> PlacementResult:
    """Exact determinant maximizer over all p-subsets."""
    n = cond.basis.n_nodes
    if math.comb(n, p) > information.EXHAUSTIVE_BUDGET:
        raise PlacementError(
            f"C({n},{p}) exceeds {information.EXHAUSTIVE_BUDGET}; use fssp_select"
        )
    selected = information.exhaustive_best_selection(cond.basis, cond.covariance, p)
    return _scored(selected, cond, "oracle")


def random_policy(env: SteeringEnv, rng: np.random.Generator, steps: int,
                  condition: str | None = None) -> list:
    """Uniform random actions; returns the per-step score trajectory."""
    env.reset(condition)
    scores = []
    for _ in range(steps):
        result = env.step(int(rng.integers(env.n_actions)))
        scores.append(result.info["score"])
    return scores


def evaluate_policy(policy, env: SteeringEnv, episodes: int, max_steps: int,
                    condition: str | None = None) -> dict:
    """Roll out a policy: callable(observation) -> action, or the string
    "random", or a fixed PlacementResult (constant curve).

    Returns per-episode score curves and final scores.
    """
    curves = []
    finals = []
    if isinstance(policy, PlacementResult):
        cond_label = condition if condition is not None else env.library.labels[0]
        cond = env.library.condition(cond_label)
        score = _scored(policy.selected, cond, policy.method).score
        for _ in range(episodes):
            curves.append([score] * max_steps)
            finals.append(score)
        return {"curves": curves, "final_scores": finals}

    for _ in range(episodes):
        state = env.reset(condition)
        obs = env.observe(state)
        scores = []
        for _ in range(max_steps):
            if policy == "random":
                action = int(env.rng.integers(env.n_actions))
            else:
                action = int(policy(obs))
            result = env.step(action)
            scores.append(result.info["score"])
            obs = env.observe(result.state)
            if result.truncated:
                break
        curves.append(scores)
        finals.append(scores[-1])
    return {"curves": curves, "final_scores": finals}
