"""Escape-candidate renderer and overlay rasterizer.

Pixels are sampled at their centers and iterated with the same
check-before-apply rule as dynamics.orbit, so a pixel's color index is
exactly the step orbit() would report.  All color mapping is integer math
over the step index, which keeps PPM goldens bit-exact across platforms;
tiles write disjoint slices of one preallocated buffer, so the parallel
and serial renders are the same bytes by construction.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .continuum import SampledCurve
from .dynamics import ExpMap
from .numerics import EXP_LEDGE, Window

MAX_DIM = 8192

# escaped pixels cycle through this table by (step - 1); bounded stays black.
# values chosen dark-to-bright so early escape reads hot
_STEP_COLORS = np.array([
    (255, 221, 112), (247, 168, 62), (232, 114, 44), (203, 66, 40),
    (158, 33, 48), (106, 18, 58), (62, 17, 60), (41, 26, 66),
    (44, 46, 84), (52, 77, 110), (62, 112, 134), (78, 150, 151),
    (104, 186, 159), (146, 214, 158), (196, 233, 155), (243, 244, 152),
], dtype=np.uint8)

_OVERLAY_COLORS = np.array([
    (240, 240, 240), (255, 196, 0), (0, 216, 255), (255, 80, 160),
    (120, 255, 120), (160, 120, 255), (255, 140, 60), (60, 180, 255),
], dtype=np.uint8)


@dataclass(frozen=True)
class RenderConfig:
    """Window, resolution, orbit limits, palette, and output plumbing."""

    window: Window
    width: int = 512
    height: int = 512
    n_max: int = 64
    r_escape: float = 50.0
    palette: str = "step"
    overlays: tuple = ()
    out_format: str = "ppm"
    tile: int = 128

    def __post_init__(self):
        if not (1 <= self.width <= MAX_DIM and 1 <= self.height <= MAX_DIM):
            raise ValueError(f"resolution must be within 1..{MAX_DIM} per side")
        if not (self.window.x1 > self.window.x0 and self.window.y1 > self.window.y0):
            raise ValueError("window is degenerate")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if not self.r_escape >= 10.0:
            raise ValueError("r_escape must be at least 10")
        if self.palette not in ("step", "gray"):
            raise ValueError(f"unknown palette {self.palette!r}")
        if self.out_format not in ("ppm", "png"):
            raise ValueError(f"unknown format {self.out_format!r}")
        if self.tile < 1:
            raise ValueError("tile size must be positive")

    def pixel_centers(self, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
        """Complex grid for pixel rows r0:r1, columns c0:c1 (row 0 on top)."""
        w = self.window
        dx = (w.x1 - w.x0) / self.width
        dy = (w.y1 - w.y0) / self.height
        xs = w.x0 + (np.arange(c0, c1) + 0.5) * dx
        ys = w.y1 - (np.arange(r0, r1) + 0.5) * dy
        return xs[None, :] + 1j * ys[:, None]

    def to_pixels(self, z: np.ndarray) -> tuple:
        """Map complex values to fractional (col, row) pixel coordinates."""
        w = self.window
        px = (z.real - w.x0) / (w.x1 - w.x0) * self.width - 0.5
        py = (w.y1 - z.imag) / (w.y1 - w.y0) * self.height - 0.5
        return px, py


def _thread_count() -> int:
    raw = os.environ.get("EXPDYN_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def escape_steps(f: ExpMap, z: np.ndarray, n_max: int, r_escape: float) -> np.ndarray:
    """First escape/overflow step per point (0 = still bounded at n_max).

    Thresholds are checked before each application, matching orbit(): a
    point whose real part already exceeds r_escape reports the current
    step, and a point past the overflow ledge reports there instead of
    producing a non-finite value.
    """
    z = z.astype(complex, copy=True)
    steps = np.zeros(z.shape, dtype=np.int32)
    alive = np.ones(z.shape, dtype=bool)
    for n in range(1, n_max + 1):
        hit = alive & ((z.real > r_escape) | (z.real > EXP_LEDGE))
        steps[hit] = n
        alive &= ~hit
        if not alive.any():
            break
        zs = z[alive]
        z[alive] = np.exp(zs) + f.a
    return steps


def _colorize(steps: np.ndarray, n_max: int, palette: str) -> np.ndarray:
    img = np.zeros(steps.shape + (3,), dtype=np.uint8)
    esc = steps > 0
    if palette == "step":
        img[esc] = _STEP_COLORS[(steps[esc] - 1) % len(_STEP_COLORS)]
    else:
        # integer ramp: late escape dims toward the bounded black
        v = (55 + (200 * (n_max - steps[esc].astype(np.int64))) // n_max)
        img[esc] = np.stack([v, v, v], axis=-1).astype(np.uint8)
    return img


def render_escape(f: ExpMap, cfg: RenderConfig) -> np.ndarray:
    """Render the escape-step coloring as an (h, w, 3) uint8 array.

    The output marks escape candidates: past the real axis the threshold
    test is a heuristic, not a proof of divergence.  Deterministic for a
    fixed cfg regardless of tiling or thread count, because every tile is
    an independent computation written to its own slice.
    """
    img = np.zeros((cfg.height, cfg.width, 3), dtype=np.uint8)

    tiles = []
    for r0 in range(0, cfg.height, cfg.tile):
        for c0 in range(0, cfg.width, cfg.tile):
            tiles.append((r0, min(r0 + cfg.tile, cfg.height),
                          c0, min(c0 + cfg.tile, cfg.width)))

    def work(t):
        r0, r1, c0, c1 = t
        z = cfg.pixel_centers(r0, r1, c0, c1)
        steps = escape_steps(f, z, cfg.n_max, cfg.r_escape)
        img[r0:r1, c0:c1] = _colorize(steps, cfg.n_max, cfg.palette)

    n_threads = _thread_count()
    if n_threads == 1 or len(tiles) == 1:
        for t in tiles:
            work(t)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(work, tiles))
    return img


# ---------------------------------------------------------------------------
# overlays
# ---------------------------------------------------------------------------

_SUBSTEP = 0.4      # polyline resample spacing in pixels
_SPLAT_GAIN = 0.55  # per-splat alpha; a solid core needs a few overlapping splats


def _clip_segments(p0x, p0y, p1x, p1y, w, h):
    """Liang-Barsky clip of segments to the pixel rect, vectorized.

    Returns clipped endpoints and a keep mask; segments entirely outside
    (or with non-finite endpoints) are dropped.
    """
    finite = (np.isfinite(p0x) & np.isfinite(p0y)
              & np.isfinite(p1x) & np.isfinite(p1y))
    dx = p1x - p0x
    dy = p1y - p0y
    t0 = np.zeros(p0x.shape)
    t1 = np.ones(p0x.shape)
    keep = finite.copy()
    for p, q in ((-dx, p0x - (-1.0)), (dx, (w + 1.0) - p0x),
                 (-dy, p0y - (-1.0)), (dy, (h + 1.0) - p0y)):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(p != 0.0, q / np.where(p == 0.0, 1.0, p), 0.0)
        par_out = (p == 0.0) & (q < 0.0)
        keep &= ~par_out
        entering = p < 0.0
        t0 = np.where(keep & entering, np.maximum(t0, r), t0)
        t1 = np.where(keep & ~entering & (p != 0.0), np.minimum(t1, r), t1)
    keep &= t0 <= t1
    a0x = p0x + t0 * dx
    a0y = p0y + t0 * dy
    a1x = p0x + t1 * dx
    a1y = p0y + t1 * dy
    return a0x[keep], a0y[keep], a1x[keep], a1y[keep]


def _splat(alpha: np.ndarray, px: np.ndarray, py: np.ndarray,
           gain: float) -> None:
    """Accumulate bilinear footprints at fractional pixel positions."""
    h, w = alpha.shape
    ix = np.floor(px).astype(np.int64)
    iy = np.floor(py).astype(np.int64)
    fx = px - ix
    fy = py - iy
    for ox, oy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        cx = ix + ox
        cy = iy + oy
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        np.add.at(alpha, (cy[ok], cx[ok]), gain * wgt[ok])


def _rasterize_polyline(alpha: np.ndarray, cfg: RenderConfig,
                        values: np.ndarray) -> None:
    if values.size < 2:
        if values.size == 1:
            px, py = cfg.to_pixels(values)
            _splat(alpha, px, py, 1.0)
        return
    px, py = cfg.to_pixels(values)
    a0x, a0y, a1x, a1y = _clip_segments(px[:-1], py[:-1], px[1:], py[1:],
                                        cfg.width, cfg.height)
    if a0x.size == 0:
        return
    seglen = np.hypot(a1x - a0x, a1y - a0y)
    counts = np.maximum(1, np.ceil(seglen / _SUBSTEP)).astype(np.int64)
    total = int(counts.sum())
    seg = np.repeat(np.arange(counts.size), counts)
    base = np.concatenate([[0], np.cumsum(counts)[:-1]])
    frac = (np.arange(total) - base[seg] + 0.5) / counts[seg]
    sx = a0x[seg] * (1.0 - frac) + a1x[seg] * frac
    sy = a0y[seg] * (1.0 - frac) + a1y[seg] * frac
    _splat(alpha, sx, sy, _SPLAT_GAIN)


def overlay_values(item) -> np.ndarray:
    """Complex samples of one overlay item, in drawing order."""
    if isinstance(item, SampledCurve):
        return item.values
    values = getattr(item, "values", None)
    if values is not None:
        return np.asarray(values, dtype=complex)
    points = getattr(item, "points", None)
    if points is not None:
        return overlay_values(points)
    return np.asarray(item, dtype=complex)


def render_overlay(items, cfg: RenderConfig, f: ExpMap | None = None,
                   colors=None, as_dots=None) -> np.ndarray:
    """Anti-aliased polylines (or dot clouds) over an optional escape render.

    items is an ordered iterable of SampledCurve / RayTrace / complex
    arrays; colors cycle through a fixed table unless given explicitly.
    as_dots marks items to scatter instead of connect (point sets such as
    forests have no path order worth drawing).
    """
    items = list(items)
    if f is not None:
        img = render_escape(f, cfg)
    else:
        img = np.zeros((cfg.height, cfg.width, 3), dtype=np.uint8)
    if as_dots is None:
        as_dots = [False] * len(items)

    base = img.astype(np.float64)
    for i, item in enumerate(items):
        values = overlay_values(item)
        if colors is not None:
            color = np.asarray(colors[i], dtype=np.float64)
        else:
            color = _OVERLAY_COLORS[i % len(_OVERLAY_COLORS)].astype(np.float64)
        alpha = np.zeros((cfg.height, cfg.width))
        if as_dots[i]:
            px, py = cfg.to_pixels(values)
            ok = (np.isfinite(px) & np.isfinite(py)
                  & (px > -1) & (px < cfg.width) & (py > -1) & (py < cfg.height))
            _splat(alpha, px[ok], py[ok], 1.0)
        else:
            _rasterize_polyline(alpha, cfg, values)
        np.minimum(alpha, 1.0, out=alpha)
        base = base * (1.0 - alpha[..., None]) + color[None, None, :] * alpha[..., None]
    return np.clip(np.rint(base), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------

def write_ppm(img: np.ndarray, path) -> None:
    """Binary P6, max value 255: header plus raw RGB rows, nothing else."""
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def write_png(img: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8), "RGB").save(
        path, format="PNG")


def write_image(img: np.ndarray, path, out_format: str) -> None:
    if out_format == "ppm":
        write_ppm(img, path)
    elif out_format == "png":
        write_png(img, path)
    else:
        raise ValueError(f"unknown format {out_format!r}")
