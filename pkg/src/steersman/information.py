"""Information-theoretic scoring of sensor configurations.

Builds the spatially correlated prediction-error covariance, evaluates the
Fisher information matrix of a sensor selection, its determinant via the
Cholesky-factor singular values, the asymptotic information entropy, and
the normalized configuration score used as the environment reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .plate import CandidateGrid, ModalBasis

EXHAUSTIVE_BUDGET = 10 ** 6
_JITTER_ATTEMPTS = 3
_JITTER_SCALE = 1e-12


class SingularSelectionError(Exception):
    """Selection covariance block is singular (e.g. duplicated indices)."""


@dataclass(frozen=True)
class ObservationSelector:
    """Sorted distinct candidate-node indices carrying sensors."""

    selected: tuple

    def __init__(self, selected):
        idx = tuple(sorted(int(i) for i in selected))
        if len(set(idx)) != len(idx):
            raise SingularSelectionError(f"duplicate sensor indices in {idx}")
        if len(idx) == 0:
            raise ValueError("selector must contain at least one sensor")
        if any(i < 0 for i in idx):
            raise ValueError("negative candidate index")
        object.__setattr__(self, "selected", idx)

    def __len__(self):
        return len(self.selected)


@dataclass
class CovarianceCache:
    """Prediction-error covariance for one condition: measurement + model error."""

    sigma: np.ndarray      # (n, n), diagonal 1 + c2
    c2: float
    delta: float
    distances: np.ndarray  # (n, n) pairwise node distances
    mode_count: int


@dataclass
class FimResult:
    q: np.ndarray
    det: float
    score: float
    rank_deficient: bool = False


def _psi_pair_product(phi_i: np.ndarray, phi_j: np.ndarray) -> float:
    """Mode-shape correlation weight psi_i . psi_j / K for one node pair."""
    total = 0.0
    for a, b in zip(np.abs(phi_i), np.abs(phi_j)):
        top = max(a, b)
        if top == 0.0:
            total += 1.0  # both components vanish: full correlation
        else:
            total += (a / top) * (b / top)
    return total / len(phi_i)


def psi_weight(phi: ModalBasis, i: int, j: int) -> float:
    """Pairwise mode-shape weighting in [0, 1] between candidate nodes i and j."""
    return _psi_pair_product(phi.phi[i], phi.phi[j])


def build_covariance(phi: ModalBasis, grid: CandidateGrid, delta: float,
                     c2: float = 0.0) -> CovarianceCache:
    """Full covariance: Sigma_ij = exp(-d_ij/delta) * psi_i.psi_j / K off the
    diagonal, 1 + c2 on it."""
    if delta <= 0:
        raise ValueError("correlation length delta must be positive")
    if c2 < 0:
        raise ValueError("measurement variance c2 must be non-negative")
    dist = grid.pairwise_distances()
    absphi = np.abs(phi.phi)  # (n, K)
    n, K = absphi.shape
    weight = np.zeros((n, n))
    for k in range(K):
        a = absphi[:, k]
        lo = np.minimum.outer(a, a)
        hi = np.maximum.outer(a, a)
        ratio = np.ones((n, n))
        nz = hi > 0
        ratio[nz] = lo[nz] / hi[nz]  # both-zero pairs stay at 1
        weight += ratio
    weight /= K
    sigma = np.exp(-dist / delta) * weight
    np.fill_diagonal(sigma, 1.0 + c2)
    return CovarianceCache(sigma=sigma, c2=float(c2), delta=float(delta),
                           distances=dist, mode_count=K)


def det_via_cholesky(q: np.ndarray) -> tuple[float, bool]:
    """Determinant of a symmetric PSD matrix as the product of the squared
    singular values of its Cholesky factor.

    Returns (det, rank_deficient).  Cholesky failure beyond the jitter
    tolerance is reported as det = 0 with the rank-deficiency flag set.
    """
    q = np.asarray(q, dtype=float)
    jitter = _JITTER_SCALE * max(np.trace(q), 1.0)
    for attempt in range(_JITTER_ATTEMPTS):
        try:
            chol = np.linalg.cholesky(q + attempt * jitter * np.eye(q.shape[0]))
        except np.linalg.LinAlgError:
            continue
        sv = np.linalg.svd(chol, compute_uv=False)
        if sv[-1] ** 2 <= sv[0] ** 2 * q.shape[0] * 1e-10:
            return 0.0, True
        return float(np.prod(sv ** 2)), False
    return 0.0, True


def fim(sel: ObservationSelector, phi: ModalBasis, cov: CovarianceCache,
        normalization: float = 1.0) -> FimResult:
    """Fisher information matrix of the selected sensors.

    q = (L Phi)^T (L Sigma L^T)^{-1} (L Phi) with L the one-hot selection.
    """
    idx = np.array(sel.selected)
    phi_s = phi.phi[idx, :]
    sigma_s = cov.sigma[np.ix_(idx, idx)]
    try:
        chol = np.linalg.cholesky(sigma_s)
    except np.linalg.LinAlgError as exc:
        raise SingularSelectionError(
            f"selection covariance singular for sensors {tuple(idx)}"
        ) from exc
    white = np.linalg.solve(chol, phi_s)  # chol^{-1} (L Phi)
    q = white.T @ white
    q = 0.5 * (q + q.T)
    det, deficient = det_via_cholesky(q)
    return FimResult(q=q, det=det, score=det / normalization, rank_deficient=deficient)


def entropy(result: FimResult, n_theta: int) -> float:
    """Asymptotic information entropy 0.5*n*ln(2*pi) - 0.5*ln(det)."""
    if result.det <= 0:
        raise ValueError("entropy undefined for non-positive FIM determinant")
    return 0.5 * n_theta * math.log(2.0 * math.pi) - 0.5 * math.log(result.det)


def _selection_rank_det(phi_mat: np.ndarray, sigma: np.ndarray, idx) -> tuple[int, float]:
    """(numerical rank, pseudo-det) of the FIM for an index tuple.

    The pseudo-det is the product of the eigenvalues above tolerance, so the
    greedy search has a meaningful objective even while the FIM is still
    rank deficient (fewer sensors than modes); for a full-rank FIM it is the
    determinant."""
    ids = np.array(idx)
    sigma_s = sigma[np.ix_(ids, ids)]
    try:
        chol = np.linalg.cholesky(sigma_s)
    except np.linalg.LinAlgError:
        return (-1, 0.0)
    white = np.linalg.solve(chol, phi_mat[ids, :])
    q = white.T @ white
    eigs = np.linalg.eigvalsh(0.5 * (q + q.T))
    tol = max(eigs[-1], 0.0) * q.shape[0] * 1e-12
    above = eigs[eigs > tol]
    rank = above.size
    return (rank, float(np.prod(above)) if rank else 0.0)


def greedy_forward_selection(phi: ModalBasis, cov: CovarianceCache, p: int) -> tuple:
    """Forward sequential placement: grow the selection one sensor at a time,
    maximizing (rank, det) lexicographically with lowest-index tie-break."""
    if p < 1:
        raise ValueError("sensor count must be at least 1")
    n = phi.n_nodes
    selected: list[int] = []
    for _ in range(p):
        best = None
        best_key = None
        for cand in range(n):
            if cand in selected:
                continue
            key = _selection_rank_det(phi.phi, cov.sigma, selected + [cand])
            if best_key is None or key > best_key:
                best_key = key
                best = cand
        selected.append(best)
    return tuple(sorted(selected))


def exhaustive_best_selection(phi: ModalBasis, cov: CovarianceCache, p: int) -> tuple:
    """Exact det maximizer over all p-subsets; lowest-lexicographic tie-break."""
    n = phi.n_nodes
    if math.comb(n, p) > EXHAUSTIVE_BUDGET:
        raise ValueError(
            f"C({n},{p}) exceeds the exhaustive budget {EXHAUSTIVE_BUDGET}; "
            "use greedy_forward_selection"
        )
    best_idx = None
    best_det = -1.0
    for idx in combinations(range(n), p):
        det = fim(ObservationSelector(idx), phi, cov).det
        if det > best_det:
            best_det = det
            best_idx = idx
    return best_idx


def normalizer(phi: ModalBasis, cov: CovarianceCache, p: int) -> float:
    """Per-condition score normalization: det of the best configuration found
    exhaustively when tractable, else by greedy forward placement."""
    if p < 1:
        raise ValueError("sensor count must be at least 1")
    if math.comb(phi.n_nodes, p) <= EXHAUSTIVE_BUDGET:
        idx = exhaustive_best_selection(phi, cov, p)
    else:
        idx = greedy_forward_selection(phi, cov, p)
    det = fim(ObservationSelector(idx), phi, cov).det
    if det <= 0:
        raise ValueError("all reference configurations are singular")
    return det


def reward(prev_score: float, curr_score: float) -> float:
    """Step reward: score difference between consecutive configurations."""
    return curr_score - prev_score
