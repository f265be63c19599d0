"""Gaussian kernel density estimates and the overlap (IoU) of two densities.

The estimator is the standard sum of unit-mass Gaussian kernels,

    K(u) = exp(-u^2 / 2) / sqrt(2*pi)
    f(x) = (1 / (n*h)) * sum_i K((x - x_i) / h)

sampled on a uniform grid spanning the data plus three bandwidths on each
side.  The automatic bandwidth is Silverman's rule,
0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at 1e-6.

Two densities are compared by the ratio of the area under their pointwise
minimum to the area under their pointwise maximum, evaluated on a shared
uniform grid spanning both curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .reprs import RepresentationSet

GRID_SIZE_DEFAULT = 512
BANDWIDTH_FLOOR = 1e-6
SUBSAMPLE_LIMIT = 10**6

_EVAL_CHUNK = 4096  # samples per evaluation block; keeps the n x G matrix small


@dataclass(frozen=True)
class KdeCurve:
    """A density sampled on a uniform grid, with its bandwidth and sample count."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    sample_count: int

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        density = np.array(self.density, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != density.shape:
            raise UsageError("grid and density must be equal-length 1-D arrays (>= 2 points)")
        steps = np.diff(grid)
        if steps.min() <= 0:
            raise UsageError("grid must be strictly increasing")
        span = steps.max() - steps.min()
        if span > 1e-12 * max(abs(grid[0]), abs(grid[-1]), steps.max()):
            raise UsageError("grid spacing must be uniform")
        if (density < 0).any() or not np.all(np.isfinite(density)):
            raise UsageError("density must be finite and non-negative")
        if not self.bandwidth > 0:
            raise UsageError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.sample_count < 1:
            raise UsageError(f"sample_count must be positive, got {self.sample_count}")
        grid.flags.writeable = False
        density.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)

    def mass(self) -> float:
        """Trapezoidal integral of the density over the grid."""
        return float(np.trapezoid(self.density, self.grid))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at 1e-6."""
    x = np.asarray(samples, dtype=np.float64)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, float(q75 - q25) / 1.34)
    return float(max(0.9 * spread * len(x) ** (-0.2), BANDWIDTH_FLOOR))


def _evaluate(samples: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    total = np.zeros_like(grid)
    for start in range(0, len(samples), _EVAL_CHUNK):
        block = samples[start : start + _EVAL_CHUNK]
        z = (grid[None, :] - block[:, None]) / h
        total += np.exp(-0.5 * z * z).sum(axis=0)
    return total / (len(samples) * h * math.sqrt(2.0 * math.pi))


def kde_fit(samples, bandwidth="auto", grid_size: int = GRID_SIZE_DEFAULT) -> KdeCurve:
    """Fit a Gaussian KDE on a uniform grid spanning the samples +- 3h."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise UsageError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise UsageError("samples contain non-finite values")
    if grid_size < 2:
        raise UsageError(f"grid_size must be >= 2, got {grid_size}")
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise UsageError(f"bandwidth must be positive or 'auto', got {bandwidth!r}")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise UsageError(f"bandwidth must be positive, got {h}")
    grid = np.linspace(x.min() - 3.0 * h, x.max() + 3.0 * h, grid_size)
    density = _evaluate(x, grid, h)
    return KdeCurve(grid=grid, density=density, bandwidth=h, sample_count=int(x.size))


def iou(a: KdeCurve, b: KdeCurve) -> float:
    """Overlap of two density curves: area(min) / area(max) on a shared grid.

    Both curves are re-evaluated (linear interpolation, zero outside their
    support) on a uniform grid spanning the union of their grids; symmetric
    in its arguments and 1.0 for identical curves.
    """
    lo = min(a.grid[0], b.grid[0])
    hi = max(a.grid[-1], b.grid[-1])
    size = max(len(a.grid), len(b.grid))
    grid = np.linspace(lo, hi, size)
    fa = np.interp(grid, a.grid, a.density, left=0.0, right=0.0)
    fb = np.interp(grid, b.grid, b.density, left=0.0, right=0.0)
    intersection = np.minimum(fa, fb).sum()
    union = np.maximum(fa, fb).sum()
    if union == 0.0:
        return 0.0
    return float(intersection / union)


def pool_activations(reps: RepresentationSet, group_by: str) -> dict:
    """Concatenate map values per metadata group.

    Sample order within a group is map order, then row-major within each
    map; groups come back keyed by their metadata value, sorted.
    """
    if len(reps) == 0:
        raise UsageError("representation set is empty")
    for i, rec in enumerate(reps.meta):
        if group_by not in rec:
            raise UsageError(f"metadata key {group_by!r} missing from record {i}")
    buckets = {}
    for i, rec in enumerate(reps.meta):
        buckets.setdefault(rec[group_by], []).append(reps.maps[i].ravel())
    return {
        value: np.concatenate(buckets[value])
        for value in sorted(buckets, key=lambda v: str(v))
    }


def subsample_pool(samples: np.ndarray, limit: int = SUBSAMPLE_LIMIT, seed: int = 0):
    """Uniformly subsample an activation pool above ``limit`` values.

    Returns ``(samples, subsampled_flag)``; keeps evaluation cost bounded
    before a KDE fit on very large pools.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size <= limit:
        return x, False
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(x.size, size=limit, replace=False))
    return x[idx], True


def write_curve_pair_svg(a: KdeCurve, b: KdeCurve, path, label_a="a", label_b="b") -> None:
    """Render two density curves as polylines in a fixed 640x400 viewport."""
    width, height, margin = 640, 400, 40
    lo = min(a.grid[0], b.grid[0])
    hi = max(a.grid[-1], b.grid[-1])
    top = max(a.density.max(), b.density.max(), 1e-300)

    def polyline(curve: KdeCurve) -> str:
        xs = margin + (curve.grid - lo) / (hi - lo) * (width - 2 * margin)
        ys = height - margin - curve.density / top * (height - 2 * margin)
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<polyline points="{polyline(a)}" fill="none" stroke="#1f77b4"/>',
        f'<polyline points="{polyline(b)}" fill="none" stroke="#d62728"/>',
        f'<text x="{margin + 8}" y="{margin + 14}" fill="#1f77b4" '
        f'font-size="13">{label_a}</text>',
        f'<text x="{margin + 8}" y="{margin + 32}" fill="#d62728" '
        f'font-size="13">{label_b}</text>',
        "</svg>",
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts))
        f.write("\n")
