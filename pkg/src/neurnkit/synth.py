"""Seeded synthetic data: stimuli, tagged neurons, kernel banks, digit domains.

Real recordings and benchmark downloads are out of scope for this toolkit,
so every pipeline ships with a generator whose statistical structure is
known by construction:

* ``gen_kernel_bank`` -- Gabor-like convolution kernels, the "model" side.
* ``gen_stimuli`` -- white-noise stimulus images (flat covariance, so a
  neuron's stimulus-weighted map recovers whatever pattern its responses
  were tuned to).
* ``gen_neurons`` -- 10 genotype groups; excitatory neurons respond in
  proportion to a bank kernel's match with each stimulus, inhibitory
  neurons to smooth random patterns unrelated to the bank.  Downstream,
  excitatory representations are therefore closer to the bank's feature
  maps than inhibitory ones, by construction.
* ``gen_digit_domain`` -- 10-class stroke "digits" rendered under a named
  style (clean handwriting-like, or a bolder scanned-mail-like look), so
  two domains share classes but differ in rendering.
"""

from __future__ import annotations

import numpy as np

from .domainbench import DomainDataset
from .errors import UsageError
from .reprs import StimulusSet, TrialTraces
from .tensorio import Tensor

EXC_GENOTYPES = ("Emx1", "Rbp4", "Scnn1a", "Cux2", "Fezf2")
INH_GENOTYPES = ("Sst", "Vip", "Pvalb", "Gad2", "Ndnf")
REGIONS = ("VISp", "VISal", "VISpm", "VISl")

DIGIT_STYLES = ("clean", "bold")

_SALT_BANK = 1
_SALT_STIM = 2
_SALT_NEURONS = 3
_SALT_INH = 4
_SALT_DOMAIN = 5

# Class stroke geometry is shared by every domain so labels mean the same
# thing across domains; only the rendering style differs.
_CLASS_GEOMETRY_SEED = 604750

_TRACE_BASELINE = 0.2
_RESPONSE_NOISE = 0.05
_TRACE_NOISE = 0.01


_EMBED_PIXEL_RMS = 0.20
_TEXTURE_PIXEL_RMS = 0.06


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), salt)))


def gen_stimuli(count: int, side: int, seed: int, bank: Tensor | None = None) -> StimulusSet:
    """Synthetic stimuli around mid-gray.

    Without a bank, pixels are iid uniform in [0, 1].  With a bank, each
    stimulus embeds one archetype pattern (cycling through the bank-derived
    excitatory patterns and the smooth inhibitory patterns for the same
    seed) over a random smooth texture, so neurons tuned to an archetype
    respond selectively and their stimulus-weighted maps reconstruct it.
    """
    if count < 1 or side < 1:
        raise UsageError("count and side must be positive")
    rng = _rng(seed, _SALT_STIM)
    if bank is None:
        return StimulusSet(side=side, flattened=rng.uniform(0.0, 1.0, size=(count, side * side)))

    patterns = _archetype_patterns(bank, side, seed)
    images = np.empty((count, side * side))
    for i in range(count):
        texture = _unit_centered(_smooth_pattern(side, rng).ravel())
        pattern = patterns[i % len(patterns)]
        amplitude = rng.uniform(0.75, 1.25) * _EMBED_PIXEL_RMS * np.sqrt(pattern.size)
        tex_amp = _TEXTURE_PIXEL_RMS * np.sqrt(texture.size)
        images[i] = 0.5 + tex_amp * texture + amplitude * pattern
    return StimulusSet(side=side, flattened=np.clip(images, 0.0, 1.0))


def gen_kernel_bank(seed: int, n_filters: int = 5, side: int = 9) -> Tensor:
    """Gabor-like kernels [n_filters, 1, side, side] with distinct orientations."""
    rng = _rng(seed, _SALT_BANK)
    coords = (np.arange(side) - (side - 1) / 2.0) / side
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    envelope = np.exp(-(xs**2 + ys**2) / (2.0 * 0.3**2))
    kernels = np.empty((n_filters, 1, side, side))
    for m in range(n_filters):
        theta = np.pi * m / n_filters + rng.uniform(-0.1, 0.1)
        freq = rng.uniform(1.5, 3.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.cos(2.0 * np.pi * freq * (xs * np.cos(theta) + ys * np.sin(theta)) + phase)
        kernels[m, 0] = envelope * wave
    return Tensor(kernels, {"kind": "kernel_bank"})


def _smooth_pattern(side: int, rng: np.random.Generator) -> np.ndarray:
    ys, xs = np.mgrid[0:side, 0:side] / side
    pattern = np.zeros((side, side))
    for _ in range(4):
        theta = rng.uniform(0.0, np.pi)
        freq = rng.uniform(1.5, 5.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        pattern += np.sin(
            2.0 * np.pi * freq * (xs * np.cos(theta) + ys * np.sin(theta)) + phase
        )
    return pattern


def _unit_centered(flat: np.ndarray) -> np.ndarray:
    centered = flat - flat.mean()
    norm = np.linalg.norm(centered)
    if norm == 0:
        raise UsageError("archetype pattern is constant")
    return centered / norm


def _resize_flat(kernel: np.ndarray, side: int) -> np.ndarray:
    from .tensorio import Image, resize_bilinear

    return resize_bilinear(Image(kernel), side, side).data[0].ravel()


_BANK_BLEND = 0.5


def _exc_patterns(bank: Tensor, side: int) -> list:
    """One pattern per excitatory genotype: its kernel blended with the bank.

    The blend keeps every excitatory representation correlated with every
    bank kernel (not just its own), which is the intended contrast with the
    bank-independent inhibitory patterns.
    """
    n = min(len(EXC_GENOTYPES), bank.data.shape[0])
    units = [_unit_centered(_resize_flat(bank.data[g, 0], side)) for g in range(n)]
    if n == 1:
        return units
    patterns = []
    for g in range(n):
        rest = np.mean([units[h] for h in range(n) if h != g], axis=0)
        patterns.append(_unit_centered(units[g] + _BANK_BLEND * rest))
    return patterns


def _blob_pattern(side: int, rng: np.random.Generator, n_blobs: int = 8) -> np.ndarray:
    ys, xs = np.mgrid[0:side, 0:side] / side
    pattern = np.zeros((side, side))
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        width = rng.uniform(0.06, 0.14)
        sign = rng.choice((-1.0, 1.0))
        pattern += sign * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * width**2))
    return pattern


def _inh_patterns(side: int, seed: int, exc_patterns: list) -> list:
    """Blob-mosaic patterns, orthogonalized against the excitatory subspace.

    Projecting out the excitatory span makes "decorrelated" literal: every
    inhibitory tuning pattern has zero overlap with every bank-derived one.
    """
    rng = _rng(seed, _SALT_INH)
    basis, _ = np.linalg.qr(np.array(exc_patterns).T)
    patterns = []
    while len(patterns) < len(INH_GENOTYPES):
        blob = _unit_centered(_blob_pattern(side, rng).ravel())
        residual = blob - basis @ (basis.T @ blob)
        if np.linalg.norm(residual) < 0.5:
            continue  # blob fell mostly inside the excitatory span; redraw
        patterns.append(_unit_centered(residual))
    return patterns


def _archetype_patterns(bank: Tensor, side: int, seed: int) -> list:
    exc = _exc_patterns(bank, side)
    return exc + _inh_patterns(side, seed, exc)


def gen_neurons(
    stimuli: StimulusSet,
    bank: Tensor,
    seed: int,
    n_excitatory: int = 500,
    n_inhibitory: int = 500,
    trace_len: int = 30,
) -> list:
    """Synthesize tagged neurons with known tuning.

    Excitatory neurons are split over 5 genotypes, each tuned to one bank
    kernel: the response to a stimulus is the (centered) inner product of
    that stimulus with the kernel pattern.  Inhibitory neurons follow the
    same recipe but are tuned to smooth random patterns generated
    independently of the bank.  Responses are embedded as the peak of a
    bump-shaped trial trace, so peak reduction recovers them.
    """
    if bank.data.ndim != 4:
        raise UsageError("bank must be a rank-4 kernel tensor")
    if n_excitatory < 1 or n_inhibitory < 1:
        raise UsageError("need at least one neuron per cell class")
    rng = _rng(seed, _SALT_NEURONS)

    exc_patterns = _exc_patterns(bank, stimuli.side)
    inh_patterns = _inh_patterns(stimuli.side, seed, exc_patterns)
    n_exc_types = len(exc_patterns)

    centered_stimuli = stimuli.flattened - stimuli.flattened.mean(axis=0)
    peak_index = trace_len // 3
    bump = np.exp(-0.5 * ((np.arange(trace_len) - peak_index) / (trace_len / 8.0)) ** 2)

    def make(neuron_id, cell_class, genotype, region, pattern):
        raw = centered_stimuli @ pattern
        spread = raw.std()
        responses = raw / spread if spread > 0 else raw
        responses = responses - responses.min() + _TRACE_BASELINE
        responses = responses + rng.normal(0.0, _RESPONSE_NOISE, size=responses.shape)
        responses = np.maximum(responses, 0.01)
        traces = responses[:, None] * bump[None, :]
        traces = traces + rng.normal(0.0, _TRACE_NOISE, size=traces.shape)
        return TrialTraces(
            neuron_id=neuron_id,
            cell_class=cell_class,
            genotype=genotype,
            region=region,
            traces=traces,
        )

    neurons = []
    for j in range(n_excitatory):
        g = j % n_exc_types
        neurons.append(
            make(
                f"e{j:04d}",
                "excitatory",
                EXC_GENOTYPES[g],
                REGIONS[j % len(REGIONS)],
                exc_patterns[g],
            )
        )
    for j in range(n_inhibitory):
        g = j % len(INH_GENOTYPES)
        neurons.append(
            make(
                f"i{j:04d}",
                "inhibitory",
                INH_GENOTYPES[g],
                REGIONS[j % len(REGIONS)],
                inh_patterns[g],
            )
        )
    return neurons


def _class_strokes(class_index: int, n_strokes: int = 3, samples_per: int = 48) -> np.ndarray:
    """Fixed quadratic-curve skeleton for one digit class, in unit coordinates."""
    rng = np.random.default_rng(np.random.SeedSequence((_CLASS_GEOMETRY_SEED, class_index)))
    t = np.linspace(0.0, 1.0, samples_per)[:, None]
    points = []
    for _ in range(n_strokes):
        p0 = rng.uniform(0.2, 0.8, size=2)
        p1 = rng.uniform(0.2, 0.8, size=2)
        mid = (p0 + p1) / 2.0
        normal = np.array([-(p1 - p0)[1], (p1 - p0)[0]])
        ctrl = mid + rng.uniform(-0.45, 0.45) * normal
        curve = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * ctrl + t**2 * p1
        points.append(curve)
    return np.concatenate(points, axis=0)


_STYLE_PARAMS = {
    # thickness (fraction of side), digit scale in frame, gamma, background, noise
    "clean": {"thickness": 0.055, "scale": 1.0, "gamma": 1.0, "background": 0.0, "noise": 0.05},
    "bold": {"thickness": 0.085, "scale": 0.8, "gamma": 0.75, "background": 0.08, "noise": 0.08},
}


def _render_digit(
    strokes: np.ndarray, side: int, style: dict, shift: np.ndarray, scale_jitter: float
) -> np.ndarray:
    pts = (strokes - 0.5) * (style["scale"] * scale_jitter) + 0.5 + shift
    pts = pts * (side - 1)
    ys, xs = np.mgrid[0:side, 0:side]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    d2 = ((pixels[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    radius = style["thickness"] * side
    ink = np.exp(-d2.min(axis=1) / (2.0 * radius**2)).reshape(side, side)
    img = style["background"] + (1.0 - style["background"]) * ink ** style["gamma"]
    return img


def gen_digit_domain(
    name: str,
    count: int,
    side: int,
    seed: int,
    style: str = "clean",
    contrast_pairs: bool = False,
) -> DomainDataset:
    """Render ``count`` stroke-digit images (classes balanced) in one style.

    With ``contrast_pairs``, classes 0-4 and 5-9 share stroke shapes and
    differ only in ink contrast (full versus half).  Such a domain is
    deliberately hostile to intensity-normalizing preprocessing and
    deliberately fragile under intensity shifts: a gain-2 affine shift maps
    each half-contrast class onto its full-contrast twin's appearance.
    """
    if style not in DIGIT_STYLES:
        raise UsageError(f"style must be one of {DIGIT_STYLES}, got {style!r}")
    if count < 10:
        raise UsageError("need at least 10 samples (one per class)")
    params = _STYLE_PARAMS[style]
    rng = _rng(seed, _SALT_DOMAIN)
    labels = rng.permutation(np.arange(count) % 10)
    strokes = [_class_strokes(c) for c in range(10)]
    images = np.empty((count, side, side))
    for i in range(count):
        label = int(labels[i])
        if contrast_pairs:
            shape = strokes[label % 5]
            ink = (1.0 if label < 5 else 0.5) * rng.uniform(0.94, 1.0)
            noise = 0.03
        else:
            shape = strokes[label]
            ink = rng.uniform(0.85, 1.0)
            noise = params["noise"]
        shift = rng.uniform(-0.06, 0.06, size=2)
        scale_jitter = rng.uniform(0.9, 1.1)
        img = _render_digit(shape, side, params, shift, scale_jitter)
        img = img * ink + rng.normal(0.0, noise, size=img.shape)
        images[i] = np.clip(img, 0.0, 1.0)
    return DomainDataset(name=name, images=images, labels=labels, domain_tag=f"synth-{style}")
