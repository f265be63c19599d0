"""Independent brute-force reference implementations used by the tests.

Everything here is written per-element with explicit loops, separately from
the vectorized library code paths it checks.
"""

import math

import numpy as np


def bilinear_oracle(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Direct corner-aligned bilinear interpolation of one 2-D channel."""
    h, w = src.shape
    out = np.empty((out_h, out_w))
    for r in range(out_h):
        y = 0.0 if out_h == 1 else r * (h - 1) / (out_h - 1)
        y0 = min(int(math.floor(y)), h - 1)
        y1 = min(y0 + 1, h - 1)
        ty = y - y0
        for c in range(out_w):
            x = 0.0 if out_w == 1 else c * (w - 1) / (out_w - 1)
            x0 = min(int(math.floor(x)), w - 1)
            x1 = min(x0 + 1, w - 1)
            tx = x - x0
            out[r, c] = (
                src[y0, x0] * (1 - ty) * (1 - tx)
                + src[y0, x1] * (1 - ty) * tx
                + src[y1, x0] * ty * (1 - tx)
                + src[y1, x1] * ty * tx
            )
    return out


def _pad_index(i: int, n: int, padding: str) -> int:
    if padding == "replicate":
        return min(max(i, 0), n - 1)
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def patch_stats_oracle(channel: np.ndarray, k: int, padding: str):
    """Per-pixel k x k neighborhood mean and population std, explicit loops."""
    h, w = channel.shape
    half = k // 2
    mean = np.empty((h, w))
    std = np.empty((h, w))
    for r in range(h):
        for c in range(w):
            values = []
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr = _pad_index(r + dr, h, padding)
                    cc = _pad_index(c + dc, w, padding)
                    values.append(channel[rr, cc])
            mu = math.fsum(values) / (k * k)
            var = math.fsum((v - mu) ** 2 for v in values) / (k * k)
            mean[r, c] = mu
            std[r, c] = math.sqrt(var)
    return mean, std


def neurn_oracle(channel: np.ndarray, k: int, padding: str, epsilon: float = 1e-12):
    _, std = patch_stats_oracle(channel, k, padding)
    peak = std.max()
    if peak < epsilon:
        return np.zeros_like(channel)
    return std / peak


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Naive triple-loop matrix product."""
    n, m = a.shape
    m2, p = b.shape
    assert m == m2
    out = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for t in range(m):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def rmse_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Direct root-mean-square difference via compensated summation."""
    diffs = [(float(y) - float(x)) ** 2 for x, y in zip(a.ravel(), b.ravel())]
    return math.sqrt(math.fsum(diffs) / len(diffs))


def kde_oracle(samples: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """Double-loop Gaussian kernel density estimator."""
    n = len(samples)
    out = np.empty(len(grid))
    norm = 1.0 / (n * h * math.sqrt(2.0 * math.pi))
    for i, x in enumerate(grid):
        out[i] = norm * math.fsum(
            math.exp(-0.5 * ((x - xi) / h) ** 2) for xi in samples
        )
    return out


def normal_pdf(x: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def normal_overlap_iou_oracle(mu_a: float, mu_b: float, sigma: float = 1.0) -> float:
    """IoU of two exact normal pdfs by fine numerical integration."""
    lo = min(mu_a, mu_b) - 8 * sigma
    hi = max(mu_a, mu_b) + 8 * sigma
    grid = np.linspace(lo, hi, 20001)
    fa = normal_pdf(grid, mu_a, sigma)
    fb = normal_pdf(grid, mu_b, sigma)
    inter = np.trapezoid(np.minimum(fa, fb), grid)
    union = np.trapezoid(np.maximum(fa, fb), grid)
    return float(inter / union)


def numeric_gradients(loss_fn, params: dict, step: float = 1e-5) -> dict:
    """Central finite differences of ``loss_fn(params)`` per parameter entry."""
    grads = {}
    for key, value in params.items():
        grad = np.zeros_like(value)
        it = np.nditer(value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = value[idx]
            value[idx] = original + step
            up = loss_fn(params)
            value[idx] = original - step
            down = loss_fn(params)
            value[idx] = original
            grad[idx] = (up - down) / (2.0 * step)
            it.iternext()
        grads[key] = grad
    return grads
