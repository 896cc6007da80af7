import numpy as np
import pytest

from steersman.environment import ModelLibrary
from steersman.information import CovarianceCache, build_covariance
from steersman.plate import (CandidateGrid, ConditionSpec, ModalBasis, PlateSpec,
                             build_plate, solve_modes)

DESK_PLATE = PlateSpec(length=0.45, width=0.15, thickness=0.003,
                       clamp_depth=0.03, density=2700.0, youngs_modulus=70e9,
                       poisson_ratio=0.33, grid_cols=15, grid_rows=5)
DESK_CONDITIONS = [ConditionSpec("healthy", ()),
                   ConditionSpec("damage1", ((0.2, (0.30, 0.075)),))]

STEEL_PLATE_KW = dict(length=0.447, width=0.0762, thickness=0.003,
                      clamp_depth=0.024, density=7850.0, youngs_modulus=200e9,
                      poisson_ratio=0.3)


@pytest.fixture(scope="session")
def desk_library():
    return ModelLibrary(DESK_PLATE, DESK_CONDITIONS, n_modes=2, n_sensors=2)


@pytest.fixture(scope="session")
def tiny_library():
    # 4x3 = 12-node grid, 2 modes, 2 sensors
    plate = PlateSpec(length=0.4, width=0.12, thickness=0.003, clamp_depth=0.04,
                      density=2700.0, youngs_modulus=70e9, poisson_ratio=0.33,
                      grid_cols=4, grid_rows=3)
    return ModelLibrary(plate, [ConditionSpec("healthy", ())], n_modes=2,
                        n_sensors=2)


@pytest.fixture(scope="session")
def tiny_basis(tiny_library):
    return tiny_library.condition("healthy").basis


def make_grid(cols, rows, dx=0.05, dy=0.04):
    coords = np.array([[c * dx, r * dy, 0.0]
                       for r in range(rows) for c in range(cols)])
    return CandidateGrid(coords, cols, rows)


def make_basis(rng, cols, rows, modes, grid=None):
    grid = grid if grid is not None else make_grid(cols, rows)
    phi = rng.normal(size=(cols * rows, modes))
    freqs = np.sort(rng.uniform(5.0, 500.0, size=modes))
    return ModalBasis(phi=phi, frequencies=freqs, condition_label="synthetic",
                      node_coords=grid.node_coords, cols=cols, rows=rows), grid


def random_spd_cov(rng, n, modes=2):
    a = rng.normal(size=(n, n))
    sigma = a @ a.T + n * np.eye(n)
    d = np.sqrt(np.diag(sigma))
    sigma = sigma / np.outer(d, d)  # unit diagonal, well conditioned
    return CovarianceCache(sigma=sigma, c2=0.0, delta=1.0,
                           distances=np.zeros((n, n)), mode_count=modes)
