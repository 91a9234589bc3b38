"""Parameter census, the density-of-hyperbolicity search, and pictures.

Sweeps the cubic family z^3 + a1 z + 1 along a real segment, searches for
a certified parameter next to the non-hyperbolic center z^3 + 1, and
writes two PPM images under demos/out/.
"""

import os

import numpy as np

from newton_dyn.algebra import Polynomial
from newton_dyn.newton_map import build
from newton_dyn.orbits import DEFAULT_BUDGET
from newton_dyn.render import (
    Viewport,
    default_palette,
    render_basins,
    render_tau,
    write_ppm,
)
from newton_dyn.search import (
    ParameterPoint,
    default_search_config,
    find_hyperbolic_near,
    tau_grid,
)

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    os.makedirs(OUT, exist_ok=True)

    nodes = np.linspace(-1.5, 1.5, 61)
    grid = tau_grid(3, [(-1.5, 1.5)], 61, DEFAULT_BUDGET)
    frac = np.mean(grid == 4)
    print(f"tau along a1 in [-1.5, 1.5]: {frac:.0%} of 61 nodes certified")
    for a1, t in zip(nodes[::12], grid[::12]):
        print(f"  a1={a1:+.2f}  tau={t}")

    res = find_hyperbolic_near(ParameterPoint(a=(0.0,), d=3), default_search_config())
    found = res.found
    print(f"search from z^3+1: a1={found.point.a[0]:.3e} at distance "
          f"{found.distance:.1e} after {found.samples_tried} samples")

    f_cube = build(Polynomial([-1, 0, 0, 1]))
    vp = Viewport(center=0j, width=4.0, pixels_x=256, pixels_y=256)
    img = render_basins(f_cube, vp, DEFAULT_BUDGET, threads=4)
    path = os.path.join(OUT, "cube_basins.ppm")
    write_ppm(img, default_palette(img), path)
    print(f"wrote {path} ({img.n_roots} basins, "
          f"{float(np.mean(img.codes < 0)):.2%} off-basin pixels)")

    tau_img = render_tau(3, [(-2.0, 2.0)], 256, DEFAULT_BUDGET)
    tau_path = os.path.join(OUT, "tau_line.ppm")
    write_ppm(tau_img, default_palette(tau_img, shade_by_time=False), tau_path)
    print(f"wrote {tau_path} (codes {tau_img.code_values()})")


if __name__ == "__main__":
    main()
