"""Deterministic rasterization of basin and parameter-plane pictures.

Every pixel is classified from its center point with the same orbit
classifier the rest of the library uses, so images agree with the scalar
API by construction.  Worker threads own disjoint row blocks and all
id assignment happens in a single ordered pass afterwards, which makes the
output byte-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import IoError
from .newton_map import NewtonMap, is_infinity
from .orbits import (
    DEFAULT_BUDGET,
    AttractingCycle,
    ConvergedToRoot,
    LandsOnInfinity,
    OrbitBudget,
    classify,
)
from .search import tau_grid

UNRESOLVED_CODE = -1
INFINITY_CODE = -2


@dataclass(frozen=True)
class Viewport:
    center: complex
    width: float
    pixels_x: int
    pixels_y: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("viewport width must be positive")
        if self.pixels_x < 1 or self.pixels_y < 1:
            raise ValueError("viewport needs at least one pixel per axis")

    @property
    def pixel_size(self) -> float:
        return self.width / self.pixels_x

    @property
    def height(self) -> float:
        # square pixels; vertical extent follows from the row count
        return self.pixel_size * self.pixels_y

    def point(self, row: int, col: int) -> complex:
        s = self.pixel_size
        x = self.center.real - 0.5 * self.width + (col + 0.5) * s
        y = self.center.imag + 0.5 * self.height - (row + 0.5) * s
        return complex(x, y)


@dataclass
class ImageGrid:
    codes: np.ndarray
    times: np.ndarray
    viewport: Viewport
    max_code: int
    n_roots: int = 0
    cycle_periods: tuple[int, ...] = ()
    cycle_reps: tuple[complex, ...] = ()

    def __post_init__(self):
        shape = (self.viewport.pixels_y, self.viewport.pixels_x)
        if self.codes.shape != shape or self.times.shape != shape:
            raise ValueError("grid arrays must match the viewport dimensions")
        lo = int(self.codes.min())
        hi = int(self.codes.max())
        if lo < INFINITY_CODE or hi > self.max_code:
            raise ValueError(f"codes [{lo}, {hi}] escape the declared range")

    def code_values(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.codes))


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("NEWTON_DYN_THREADS", "")
        try:
            threads = int(env) if env else 1
        except ValueError:
            threads = 1
    return max(1, threads)


def render_basins(
    f: NewtonMap,
    vp: Viewport,
    b: OrbitBudget = DEFAULT_BUDGET,
    threads: Optional[int] = None,
) -> ImageGrid:
    """Classify every pixel center of the viewport.

    Codes: root index for root basins, then one code per attracting cycle
    found (root count offset, ordered by period and position), INFINITY_CODE
    for escape to the repelling fixed point, UNRESOLVED_CODE otherwise.
    """
    h, w = vp.pixels_y, vp.pixels_x
    verdicts: list[list[object]] = [[] for _ in range(h)]

    def run_rows(rows):
        for i in rows:
            verdicts[i] = [classify(f, vp.point(i, j), b) for j in range(w)]

    n = _resolve_threads(threads)
    if n == 1:
        run_rows(range(h))
    else:
        blocks = [range(i, h, n) for i in range(n)]
        with ThreadPoolExecutor(max_workers=n) as ex:
            list(ex.map(run_rows, blocks))

    # cycles are identified across pixels by period and representative;
    # sorting before id assignment keeps codes independent of visit order
    tol = 1e-5
    keys: list[tuple[int, complex]] = []
    for i in range(h):
        for v in verdicts[i]:
            if isinstance(v, AttractingCycle) and not is_infinity(v.representative):
                keys.append((v.period, v.representative))
    keys.sort(key=lambda k: (k[0], k[1].real, k[1].imag))
    clusters: list[tuple[int, complex]] = []
    for period, rep in keys:
        hit = False
        for q, c in clusters:
            if q == period and abs(rep - c) <= tol * (1 + abs(c)):
                hit = True
                break
        if not hit:
            clusters.append((period, rep))

    def cycle_code(v: AttractingCycle) -> int:
        if is_infinity(v.representative):
            return UNRESOLVED_CODE
        for k, (q, c) in enumerate(clusters):
            if q == v.period and abs(v.representative - c) <= tol * (1 + abs(c)):
                return len(f.roots.locations) + k
        return UNRESOLVED_CODE

    n_roots = len(f.roots.locations)
    codes = np.full((h, w), UNRESOLVED_CODE, dtype=np.int32)
    times = np.zeros((h, w), dtype=np.int32)
    for i in range(h):
        for j, v in enumerate(verdicts[i]):
            if isinstance(v, ConvergedToRoot):
                codes[i, j] = v.root_index
                times[i, j] = v.hitting_time
            elif isinstance(v, AttractingCycle):
                codes[i, j] = cycle_code(v)
                times[i, j] = v.hitting_time
            elif isinstance(v, LandsOnInfinity):
                codes[i, j] = INFINITY_CODE
                times[i, j] = v.step
    return ImageGrid(
        codes=codes,
        times=times,
        viewport=vp,
        max_code=n_roots + len(clusters) - 1 if (n_roots or clusters) else 0,
        n_roots=n_roots,
        cycle_periods=tuple(q for q, _ in clusters),
        cycle_reps=tuple(c for _, c in clusters),
    )


def render_tau(
    d: int,
    box: Sequence[tuple[float, float]],
    resolution: Union[int, Sequence[int]],
    budget: OrbitBudget = DEFAULT_BUDGET,
) -> ImageGrid:
    """Parameter-plane image of the in-basin critical count tau.

    Wraps the census grid directly, so values agree with it node for node;
    -1 marks discriminant hits and doubles as the unresolved code.
    """
    grid = tau_grid(d, box, resolution, budget)
    res = grid.shape
    swept = [k for k, r in enumerate(res) if r > 1]
    if len(swept) > 2:
        raise ValueError("images support at most two swept axes")
    if len(swept) == 0:
        codes = grid.reshape(1, 1)
        x_axis = box[0] if box else (0.0, 1.0)
        y_axis = (0.0, 0.0)
    elif len(swept) == 1:
        codes = grid.reshape(1, -1)
        x_axis = box[swept[0]]
        y_axis = (0.0, 0.0)
    else:
        ix, iy = swept
        # first swept axis runs left to right, second bottom to top
        m = np.moveaxis(grid, (ix, iy), (0, 1)).reshape(res[ix], res[iy])
        codes = m.T[::-1]
        x_axis = box[ix]
        y_axis = box[iy]
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    h, w = codes.shape
    cx = 0.5 * (x_axis[0] + x_axis[1])
    cy = 0.5 * (y_axis[0] + y_axis[1])
    width = x_axis[1] - x_axis[0]
    vp = Viewport(
        center=complex(cx, cy),
        width=width if width > 0 else 1.0,
        pixels_x=w,
        pixels_y=h,
    )
    return ImageGrid(
        codes=codes,
        times=np.zeros((h, w), dtype=np.int32),
        viewport=vp,
        max_code=2 * d - 2,
    )


@dataclass(frozen=True)
class Palette:
    colors: Mapping[int, tuple[int, int, int]]
    shade_by_time: bool = False
    bands: int = 16


def default_palette(g: ImageGrid, shade_by_time: bool = True) -> Palette:
    """Distinct hues per code with dark escape and gray unresolved pixels."""
    colors: dict[int, tuple[int, int, int]] = {
        UNRESOLVED_CODE: (90, 90, 90),
        INFINITY_CODE: (10, 10, 30),
    }
    positive = [c for c in g.code_values() if c >= 0]
    count = max(len(positive), 1)
    for k, code in enumerate(positive):
        hue = (k * 360.0 / count) % 360.0
        colors[code] = _hsv_byte(hue, 0.85, 0.95)
    return Palette(colors=colors, shade_by_time=shade_by_time)


def _hsv_byte(h: float, s: float, v: float) -> tuple[int, int, int]:
    hh = (h % 360.0) / 60.0
    i = int(hh)
    fr = hh - i
    p = v * (1 - s)
    q = v * (1 - s * fr)
    t = v * (1 - s * (1 - fr))
    r, g, b = [
        (v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q),
    ][i % 6]
    return int(round(255 * r)), int(round(255 * g)), int(round(255 * b))


def write_ppm(g: ImageGrid, palette: Palette, path: str) -> None:
    """Binary P6 dump, top-left origin, byte-identical across runs."""
    if isinstance(palette, Mapping):
        palette = Palette(colors=palette)
    h, w = g.codes.shape
    missing = [c for c in g.code_values() if c not in palette.colors]
    if missing:
        raise ValueError(f"palette misses codes {missing}")
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    for code, (r, gg, b) in palette.colors.items():
        mask = g.codes == code
        rgb[mask] = (r, gg, b)
    if palette.shade_by_time and palette.bands > 1:
        tmax = int(g.times.max())
        if tmax > 0:
            band = np.minimum(
                (g.times.astype(np.float64) * palette.bands) // (tmax + 1),
                palette.bands - 1,
            )
            factor = 1.0 - 0.6 * band / (palette.bands - 1)
            rgb *= factor[:, :, None]
    arr = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write image to {path}: {exc}") from exc
