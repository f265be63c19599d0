"""NeuRN: patch-statistics response normalization.

For every pixel, take the k x k neighborhood around it (stride 1, so the
patch count equals the pixel count), compute the patch mean and the
population standard deviation

    mean = (1/k^2) * sum(x_ij)
    std  = sqrt((1/k^2) * sum((x_ij - mean)^2))

and emit, per channel, the std map divided by its channel-wide maximum:

    out = std / c,   c = max(std over the channel)

The output lives in [0, 1], hits 1 at the highest-contrast pixel of every
non-constant channel, and is invariant to affine intensity changes of the
input (a*I + b maps to the same output for any a != 0), which is what makes
the encoding domain-agnostic.

Constant channels (c below ``epsilon``) map to all zeros, the limit of
std/c as contrast vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import UsageError
from .tensorio import Image

PADDINGS = ("replicate", "reflect")

_NP_PAD_MODE = {"replicate": "edge", "reflect": "reflect"}


@dataclass(frozen=True)
class NeurnConfig:
    """Patch size, boundary rule, and constant-image guard for the transform.

    ``k`` is the odd patch side length; ``padding`` decides how patches
    hanging over the image border are filled (``replicate`` repeats the edge
    pixel, ``reflect`` mirrors about it); ``epsilon`` is the threshold below
    which a channel's peak contrast counts as zero.
    """

    k: int = 3
    padding: str = "replicate"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.k < 3 or self.k % 2 == 0:
            raise UsageError(f"patch size k must be odd and >= 3, got {self.k}")
        if self.padding not in PADDINGS:
            raise UsageError(f"padding must be one of {PADDINGS}, got {self.padding!r}")
        if not self.epsilon > 0:
            raise UsageError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class PatchStats:
    """Per-pixel patch mean and population standard deviation maps."""

    mean_map: Image
    std_map: Image


def _channel_patch_stats(channel: np.ndarray, k: int, padding: str):
    pad = k // 2
    if padding == "reflect" and min(channel.shape) <= pad:
        raise UsageError(
            f"reflect padding needs image sides > {pad} for k={k}, "
            f"got {channel.shape[0]}x{channel.shape[1]}"
        )
    padded = np.pad(channel, pad, mode=_NP_PAD_MODE[padding])
    windows = sliding_window_view(padded, (k, k))
    mean = windows.mean(axis=(-1, -2))
    # Two-pass variance: subtract the patch mean before squaring so the
    # result tracks the direct per-pixel definition to machine precision.
    var = ((windows - mean[..., None, None]) ** 2).mean(axis=(-1, -2))
    return mean, np.sqrt(var)


def patch_stats(img: Image, cfg: NeurnConfig) -> PatchStats:
    """Mean and population std of every pixel's k x k neighborhood."""
    means = np.empty_like(img.data)
    stds = np.empty_like(img.data)
    for c in range(img.channels):
        means[c], stds[c] = _channel_patch_stats(img.data[c], cfg.k, cfg.padding)
    return PatchStats(mean_map=Image(means), std_map=Image(stds))


def neurn_apply(img: Image, cfg: NeurnConfig = NeurnConfig()) -> Image:
    """Apply the normalization; output shape equals input shape.

    The divisor is taken per channel, keeping channels independently
    normalized.
    """
    stats = patch_stats(img, cfg)
    out = np.zeros_like(img.data)
    for c in range(img.channels):
        std = stats.std_map.data[c]
        peak = std.max()
        if peak >= cfg.epsilon:
            out[c] = std / peak
    return Image(out)


def neurn_apply_stack(images: np.ndarray, cfg: NeurnConfig = NeurnConfig()) -> np.ndarray:
    """Apply the transform to a stack of single-channel images ``[n, h, w]``.

    Convenience wrapper for dataset preprocessing; each image is normalized
    independently (its own per-image divisor).
    """
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim != 3:
        raise UsageError(f"image stack must be 3-D [n, h, w], got ndim={arr.ndim}")
    out = np.empty_like(arr)
    for i in range(arr.shape[0]):
        out[i] = neurn_apply(Image(arr[i]), cfg).data[0]
    return out
