"""Walk through the modal model: build a cantilever plate, solve its first
bending and torsion modes, then watch the frequencies drop as point masses
are attached near the free end.

Run with:  python demos/modal_model_tour.py
"""

import numpy as np

from steersman.plate import ConditionSpec, PlateSpec, apply_condition, \
    build_plate, mac, solve_modes


def main() -> None:
    spec = PlateSpec(
        length=0.447, width=0.0762, thickness=0.003, clamp_depth=0.024,
        youngs_modulus=200e9, density=7850.0, poisson_ratio=0.3,
        grid_cols=43, grid_rows=9,
    )
    model = build_plate(spec)
    print(f"plate: {spec.length * 1e3:.0f} x {spec.width * 1e3:.1f} mm, "
          f"{model.grid.n_nodes} candidate nodes")

    healthy = solve_modes(model, 5)
    print("\nhealthy frequencies [Hz]:",
          np.round(healthy.frequencies, 1))

    # classify each mode by symmetry across the mid-width row
    rows, cols = model.grid.rows, model.grid.cols
    for k, f in enumerate(healthy.frequencies):
        shape = healthy.phi[:, k].reshape(rows, cols)
        anti = np.linalg.norm(shape + shape[::-1]) < 1e-6 * np.linalg.norm(shape)
        print(f"  mode {k + 1}: {f:8.1f} Hz  "
              f"({'torsion' if anti else 'bending'})")

    # attach a 0.7 kg mass two thirds of the way along the free edge
    damage = ConditionSpec("added_mass", ((0.7, (0.30, 0.0762)),))
    damaged = solve_modes(apply_condition(model, damage), 5)
    print("\nwith 0.7 kg added at (0.30, 0.0762) m:")
    shift = (damaged.frequencies - healthy.frequencies) / healthy.frequencies
    for k in range(5):
        print(f"  mode {k + 1}: {damaged.frequencies[k]:8.1f} Hz "
              f"({shift[k]:+.2%})")

    diag = np.diag(mac(healthy.phi, damaged.phi))
    print("\nMAC diagonal healthy vs damaged:", np.round(diag, 3))


if __name__ == "__main__":
    main()
