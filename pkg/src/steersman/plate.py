"""Cantilever-plate modal model.

Builds a thin-plate (Kirchhoff) bending finite-element model of a clamped
rectangular plate, applies point-mass damage conditions, solves the
generalized eigenproblem for mode shapes, and exposes the candidate sensor
grid over the unclamped placement region.

Element: 4-node rectangular bending element with 3 DOFs per node
(w, dw/dx, dw/dy) and the 12-term polynomial basis; consistent mass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

BASIS_FILE_VERSION = 1

# directions: 0=left, 1=right, 2=up, 3=down
DIRECTIONS = ("left", "right", "up", "down")


class PlateModelError(Exception):
    """Raised for invalid plate geometry or failed model construction."""


@dataclass(frozen=True)
class PlateSpec:
    """Geometry, material, and candidate-grid resolution of the plate."""

    length: float
    width: float
    thickness: float
    clamp_depth: float
    density: float
    youngs_modulus: float
    poisson_ratio: float
    grid_cols: int
    grid_rows: int

    def __post_init__(self):
        positive = {
            "length": self.length,
            "width": self.width,
            "thickness": self.thickness,
            "clamp_depth": self.clamp_depth,
            "density": self.density,
            "youngs_modulus": self.youngs_modulus,
        }
        bad = [k for k, v in positive.items() if not v > 0]
        if bad:
            raise PlateModelError(f"non-positive plate quantities: {bad}")
        if not 0 < self.poisson_ratio < 0.5:
            raise PlateModelError("poisson_ratio must lie in (0, 0.5)")
        if not self.clamp_depth < self.length:
            raise PlateModelError("clamp_depth must be smaller than length")
        if self.grid_cols < 2 or self.grid_rows < 2:
            raise PlateModelError("candidate grid needs at least 2x2 nodes")

    @property
    def placement_length(self) -> float:
        return self.length - self.clamp_depth


@dataclass(frozen=True)
class ConditionSpec:
    """A structural condition: a label and point masses placed on the plate."""

    label: str
    masses: tuple = ()  # of (mass_kg, (x, y))

    def __post_init__(self):
        for mass, (x, y) in self.masses:
            if not mass > 0:
                raise PlateModelError(f"condition {self.label!r}: mass must be positive")
        object.__setattr__(self, "masses", tuple((float(m), (float(x), float(y))) for m, (x, y) in self.masses))

    def validate_on(self, spec: PlateSpec):
        for mass, (x, y) in self.masses:
            if not (0.0 <= x <= spec.length and 0.0 <= y <= spec.width):
                raise PlateModelError(
                    f"condition {self.label!r}: mass position ({x}, {y}) outside plate footprint"
                )


class CandidateGrid:
    """Structured cols x rows grid of candidate sensor nodes.

    Node ids are row-major: id = row * cols + col.  Adjacency is stored as
    an (n, 4) array of neighbor ids for (left, right, up, down), -1 where a
    neighbor does not exist (grid boundary).
    """

    def __init__(self, node_coords: np.ndarray, cols: int, rows: int):
        node_coords = np.asarray(node_coords, dtype=float)
        if node_coords.shape != (cols * rows, 3):
            raise PlateModelError(
                f"expected {cols * rows} candidate nodes, got {node_coords.shape[0]}"
            )
        self.node_coords = node_coords
        self.cols = cols
        self.rows = rows
        n = cols * rows
        adj = np.full((n, 4), -1, dtype=int)
        ids = np.arange(n).reshape(rows, cols)
        adj[ids[:, 1:].ravel(), 0] = ids[:, :-1].ravel()   # left
        adj[ids[:, :-1].ravel(), 1] = ids[:, 1:].ravel()   # right
        adj[ids[:-1, :].ravel(), 2] = ids[1:, :].ravel()   # up
        adj[ids[1:, :].ravel(), 3] = ids[:-1, :].ravel()   # down
        self.adjacency = adj

    @property
    def n_nodes(self) -> int:
        return self.cols * self.rows

    def neighbor(self, node: int, direction: int) -> int:
        """Neighbor id in the given direction, or -1 at the boundary."""
        return int(self.adjacency[node, direction])

    def node_id(self, row: int, col: int) -> int:
        return row * self.cols + col

    def pairwise_distances(self) -> np.ndarray:
        d = self.node_coords[:, None, :] - self.node_coords[None, :, :]
        return np.sqrt((d ** 2).sum(axis=2))


@dataclass
class DiscreteModel:
    """Assembled plate model: sparse K/M over (w, wx, wy) DOFs plus grid info."""

    spec: PlateSpec
    stiffness: scipy.sparse.csr_matrix
    mass: scipy.sparse.csr_matrix
    mesh_coords: np.ndarray          # (n_mesh, 2)
    clamped_nodes: np.ndarray        # mesh node ids, fully fixed
    candidate_mesh_nodes: np.ndarray  # mesh node id per candidate grid node
    grid: CandidateGrid
    condition_label: str = "healthy"
    point_masses: tuple = ()

    @property
    def free_dofs(self) -> np.ndarray:
        n_dof = self.stiffness.shape[0]
        fixed = np.concatenate([3 * self.clamped_nodes + k for k in range(3)])
        mask = np.ones(n_dof, dtype=bool)
        mask[fixed] = False
        return np.nonzero(mask)[0]


@dataclass
class ModalBasis:
    """Mode shapes sampled at candidate nodes for one structural condition."""

    phi: np.ndarray          # (n_candidates, m) out-of-plane components
    frequencies: np.ndarray  # Hz, ascending
    condition_label: str
    node_coords: np.ndarray  # (n_candidates, 3)
    cols: int
    rows: int

    @property
    def n_nodes(self) -> int:
        return self.phi.shape[0]

    @property
    def n_modes(self) -> int:
        return self.phi.shape[1]


def _element_matrices(a: float, b: float, flexural_d: float, rho_h: float,
                      nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness and consistent mass of a rectangular bending element.

    Element occupies [0,a] x [0,b]; node order (0,0), (a,0), (a,b), (0,b),
    DOFs per node (w, dw/dx, dw/dy).
    """
    if a <= 0 or b <= 0:
        raise PlateModelError(f"zero-area element ({a} x {b})")

    exps = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
            (3, 0), (2, 1), (1, 2), (0, 3), (3, 1), (1, 3)]

    def row_w(x, y):
        return np.array([x ** p * y ** q for p, q in exps])

    def row_wx(x, y):
        return np.array([p * x ** max(p - 1, 0) * y ** q for p, q in exps])

    def row_wy(x, y):
        return np.array([q * x ** p * y ** max(q - 1, 0) for p, q in exps])

    corners = [(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)]
    A = np.vstack([f(x, y) for x, y in corners for f in (row_w, row_wx, row_wy)])
    try:
        C = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise PlateModelError("degenerate element geometry") from exc

    D = flexural_d * np.array([[1.0, nu, 0.0],
                               [nu, 1.0, 0.0],
                               [0.0, 0.0, (1.0 - nu) / 2.0]])

    gauss_x, gauss_wx = np.polynomial.legendre.leggauss(4)
    xs = 0.5 * a * (gauss_x + 1.0)
    ys = 0.5 * b * (gauss_x + 1.0)
    wxs = 0.5 * a * gauss_wx
    wys = 0.5 * b * gauss_wx

    ke = np.zeros((12, 12))
    me = np.zeros((12, 12))
    for x, wx in zip(xs, wxs):
        for y, wy in zip(ys, wys):
            pxx = np.array([p * (p - 1) * x ** max(p - 2, 0) * y ** q for p, q in exps])
            pyy = np.array([q * (q - 1) * x ** p * y ** max(q - 2, 0) for p, q in exps])
            pxy = np.array([p * q * x ** max(p - 1, 0) * y ** max(q - 1, 0) for p, q in exps])
            B = np.vstack([pxx, pyy, 2.0 * pxy]) @ C
            ke += wx * wy * (B.T @ D @ B)
            N = row_w(x, y) @ C
            me += wx * wy * rho_h * np.outer(N, N)
    return ke, me


def build_plate(spec: PlateSpec) -> DiscreteModel:
    """Assemble the plate model and the candidate sensor grid.

    The placement region [clamp_depth, length] x [0, width] carries
    grid_cols x grid_rows candidate nodes at x = clamp_depth + k*dx
    (k = 1..grid_cols); the clamped strip [0, clamp_depth] is meshed with
    extra element columns whose nodes are fully fixed.
    """
    dx = spec.placement_length / spec.grid_cols
    dy = spec.width / (spec.grid_rows - 1)

    n_clamp_elems = max(1, int(round(spec.clamp_depth / dx)))
    clamp_lines = np.linspace(0.0, spec.clamp_depth, n_clamp_elems + 1)
    cand_lines = spec.clamp_depth + dx * np.arange(1, spec.grid_cols + 1)
    xs = np.concatenate([clamp_lines, cand_lines])
    ys = np.linspace(0.0, spec.width, spec.grid_rows)

    ncx, ncy = len(xs), len(ys)
    mesh_coords = np.column_stack([np.tile(xs, ncy), np.repeat(ys, ncx)])
    n_mesh = ncx * ncy
    n_dof = 3 * n_mesh

    flexural_d = spec.youngs_modulus * spec.thickness ** 3 / (12.0 * (1.0 - spec.poisson_ratio ** 2))
    rho_h = spec.density * spec.thickness

    elem_cache: dict[tuple[float, float], tuple[np.ndarray, np.ndarray]] = {}
    rows_idx, cols_idx, k_vals, m_vals = [], [], [], []
    for r in range(ncy - 1):
        for c in range(ncx - 1):
            a = xs[c + 1] - xs[c]
            b = ys[r + 1] - ys[r]
            key = (round(a, 12), round(b, 12))
            if key not in elem_cache:
                elem_cache[key] = _element_matrices(a, b, flexural_d, rho_h, spec.poisson_ratio)
            ke, me = elem_cache[key]
            nodes = [r * ncx + c, r * ncx + c + 1, (r + 1) * ncx + c + 1, (r + 1) * ncx + c]
            dofs = np.array([3 * n + k for n in nodes for k in range(3)])
            ii, jj = np.meshgrid(dofs, dofs, indexing="ij")
            rows_idx.append(ii.ravel())
            cols_idx.append(jj.ravel())
            k_vals.append(ke.ravel())
            m_vals.append(me.ravel())

    rows_all = np.concatenate(rows_idx)
    cols_all = np.concatenate(cols_idx)
    K = scipy.sparse.coo_matrix((np.concatenate(k_vals), (rows_all, cols_all)),
                                shape=(n_dof, n_dof)).tocsr()
    M = scipy.sparse.coo_matrix((np.concatenate(m_vals), (rows_all, cols_all)),
                                shape=(n_dof, n_dof)).tocsr()

    tol = 1e-9 * spec.length
    clamped = np.nonzero(mesh_coords[:, 0] <= spec.clamp_depth + tol)[0]

    cand_col0 = n_clamp_elems + 1
    cand_nodes = np.array([r * ncx + cand_col0 + k
                           for r in range(spec.grid_rows)
                           for k in range(spec.grid_cols)])
    coords3 = np.column_stack([mesh_coords[cand_nodes], np.zeros(len(cand_nodes))])
    grid = CandidateGrid(coords3, spec.grid_cols, spec.grid_rows)

    return DiscreteModel(spec=spec, stiffness=K, mass=M, mesh_coords=mesh_coords,
                         clamped_nodes=clamped, candidate_mesh_nodes=cand_nodes, grid=grid)


def apply_condition(model: DiscreteModel, cond: ConditionSpec) -> DiscreteModel:
    """Return a copy of the model with the condition's point masses added.

    Each mass is lumped on the translational (w) DOF of the nearest
    unclamped mesh node; stiffness is unchanged.
    """
    cond.validate_on(model.spec)
    M = model.mass.copy().tolil()
    clamped_set = set(model.clamped_nodes.tolist())
    free_nodes = np.array([n for n in range(model.mesh_coords.shape[0]) if n not in clamped_set])
    tol = 1e-9 * model.spec.length
    for mass, (x, y) in cond.masses:
        if x <= model.spec.clamp_depth + tol:
            raise PlateModelError(
                f"condition {cond.label!r}: mass at ({x}, {y}) lies in the clamped region"
            )
        d2 = (model.mesh_coords[free_nodes, 0] - x) ** 2 + (model.mesh_coords[free_nodes, 1] - y) ** 2
        node = int(free_nodes[np.argmin(d2)])  # argmin ties resolve to lowest id
        M[3 * node, 3 * node] += mass
    return DiscreteModel(spec=model.spec, stiffness=model.stiffness, mass=M.tocsr(),
                         mesh_coords=model.mesh_coords, clamped_nodes=model.clamped_nodes,
                         candidate_mesh_nodes=model.candidate_mesh_nodes, grid=model.grid,
                         condition_label=cond.label, point_masses=cond.masses)


def solve_modes(model: DiscreteModel, m: int) -> ModalBasis:
    """Solve K phi = w^2 M phi for the m lowest modes, mass-normalized.

    Sign convention: the candidate-node component of largest magnitude is
    made positive, so repeated solves are bit-identical.
    """
    free = model.free_dofs
    if m > len(free):
        raise PlateModelError(f"requested {m} modes but only {len(free)} free DOFs")
    Kf = model.stiffness[np.ix_(free, free)].toarray()
    Mf = model.mass[np.ix_(free, free)].toarray()
    try:
        vals, vecs = scipy.linalg.eigh(Kf, Mf, subset_by_index=(0, m - 1))
    except scipy.linalg.LinAlgError as exc:
        raise PlateModelError(f"generalized eigensolve failed: {exc}") from exc

    k_scale = scipy.sparse.linalg.norm(model.stiffness, 1)
    for k in range(m):
        r = Kf @ vecs[:, k] - vals[k] * (Mf @ vecs[:, k])
        rel = np.linalg.norm(r) / (k_scale * np.linalg.norm(vecs[:, k]))
        if rel > 1e-8:
            raise PlateModelError(f"mode {k}: eigen residual {rel:.2e} exceeds 1e-8")

    if np.any(vals <= 0):
        raise PlateModelError("non-positive eigenvalue; check boundary conditions")
    freqs = np.sqrt(vals) / (2.0 * np.pi)

    # sample w-DOF of candidate nodes
    dof_index = np.full(model.stiffness.shape[0], -1, dtype=int)
    dof_index[free] = np.arange(len(free))
    w_dofs = dof_index[3 * model.candidate_mesh_nodes]
    phi = vecs[w_dofs, :].copy()
    for k in range(m):
        lead = np.argmax(np.abs(phi[:, k]))
        if phi[lead, k] < 0:
            phi[:, k] = -phi[:, k]
    return ModalBasis(phi=phi, frequencies=freqs, condition_label=model.condition_label,
                      node_coords=model.grid.node_coords, cols=model.grid.cols,
                      rows=model.grid.rows)


def mac(phi_a: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
    """Modal assurance criterion matrix between two mode-shape sets."""
    phi_a = np.asarray(phi_a, dtype=float)
    phi_b = np.asarray(phi_b, dtype=float)
    if phi_a.shape[0] != phi_b.shape[0]:
        raise ValueError("mode shape sets must share the node sampling")
    na = (phi_a ** 2).sum(axis=0)
    nb = (phi_b ** 2).sum(axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("zero-norm mode shape column")
    cross = phi_a.T @ phi_b
    return cross ** 2 / np.outer(na, nb)


def save_basis(basis: ModalBasis, path) -> None:
    payload = {
        "version": BASIS_FILE_VERSION,
        "condition_label": basis.condition_label,
        "cols": basis.cols,
        "rows": basis.rows,
        "node_coords": basis.node_coords.tolist(),
        "frequencies": basis.frequencies.tolist(),
        "phi": basis.phi.ravel().tolist(),  # row-major
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_basis(path) -> ModalBasis:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlateModelError(f"malformed basis file {path}: {exc}") from exc
    version = payload.get("version")
    if version != BASIS_FILE_VERSION:
        raise PlateModelError(
            f"basis file version {version!r}, expected {BASIS_FILE_VERSION}"
        )
    required = ["condition_label", "cols", "rows", "node_coords", "frequencies", "phi"]
    missing = [k for k in required if k not in payload]
    if missing:
        raise PlateModelError(f"basis file missing fields: {missing}")
    cols, rows = int(payload["cols"]), int(payload["rows"])
    coords = np.array(payload["node_coords"], dtype=float)
    if coords.shape[0] != cols * rows:
        raise PlateModelError(
            f"basis file declares {cols}x{rows} grid but has {coords.shape[0]} nodes"
        )
    freqs = np.array(payload["frequencies"], dtype=float)
    phi = np.array(payload["phi"], dtype=float).reshape(cols * rows, len(freqs))
    return ModalBasis(phi=phi, frequencies=freqs, condition_label=payload["condition_label"],
                      node_coords=coords, cols=cols, rows=rows)
