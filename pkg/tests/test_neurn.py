import numpy as np
import pytest

from neurnkit.errors import UsageError
from neurnkit.neurn import NeurnConfig, neurn_apply, neurn_apply_stack, patch_stats
from neurnkit.tensorio import Image

from oracles import neurn_oracle, patch_stats_oracle


def test_config_validation():
    with pytest.raises(UsageError):
        NeurnConfig(k=4)
    with pytest.raises(UsageError):
        NeurnConfig(k=1)
    with pytest.raises(UsageError):
        NeurnConfig(padding="wrap")
    with pytest.raises(UsageError):
        NeurnConfig(epsilon=0.0)


def test_patch_stats_constant_image():
    img = Image(np.full((1, 5, 5), 0.7))
    stats = patch_stats(img, NeurnConfig(k=3))
    assert np.max(np.abs(stats.mean_map.data - 0.7)) < 1e-15
    assert np.max(np.abs(stats.std_map.data)) < 1e-15


def test_patch_stats_delta_image_center_values():
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    stats = patch_stats(Image(img), NeurnConfig(k=3, padding="replicate"))
    assert abs(stats.mean_map.data[0, 1, 1] - 1.0 / 9.0) < 1e-15
    assert abs(stats.std_map.data[0, 1, 1] - np.sqrt(8.0 / 81.0)) < 1e-15
    # full maps against the per-pixel oracle
    mean, std = patch_stats_oracle(img, 3, "replicate")
    assert np.max(np.abs(stats.mean_map.data[0] - mean)) < 1e-12
    assert np.max(np.abs(stats.std_map.data[0] - std)) < 1e-12


def test_patch_stats_shift_invariance_of_std():
    rng = np.random.default_rng(4)
    img = rng.uniform(0, 1, (1, 9, 7))
    cfg = NeurnConfig(k=5)
    base = patch_stats(Image(img), cfg)
    shifted = patch_stats(Image(img + 0.37), cfg)
    assert np.max(np.abs(shifted.mean_map.data - base.mean_map.data - 0.37)) < 1e-12
    assert np.max(np.abs(shifted.std_map.data - base.std_map.data)) < 1e-12


@pytest.mark.parametrize("k", [3, 5, 7])
@pytest.mark.parametrize("padding", ["replicate", "reflect"])
def test_patch_stats_matches_oracle(k, padding):
    rng = np.random.default_rng(100 * k + (padding == "reflect"))
    img = rng.uniform(0, 1, (13, 11))
    stats = patch_stats(Image(img), NeurnConfig(k=k, padding=padding))
    mean, std = patch_stats_oracle(img, k, padding)
    assert np.max(np.abs(stats.mean_map.data[0] - mean)) < 1e-12
    assert np.max(np.abs(stats.std_map.data[0] - std)) < 1e-12


def test_apply_constant_image_is_zero():
    out = neurn_apply(Image(np.full((1, 6, 6), 0.42)), NeurnConfig())
    assert np.array_equal(out.data, np.zeros((1, 6, 6)))


def test_apply_max_is_one_per_channel():
    rng = np.random.default_rng(9)
    img = Image(rng.uniform(0, 1, (3, 10, 10)))
    out = neurn_apply(img, NeurnConfig())
    for c in range(3):
        assert out.data[c].max() == 1.0
    assert out.data.min() >= 0.0


def test_apply_delta_image_matches_oracle():
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    out = neurn_apply(Image(img), NeurnConfig(k=3))
    assert np.max(np.abs(out.data[0] - neurn_oracle(img, 3, "replicate"))) < 1e-12


def test_apply_affine_invariance():
    rng = np.random.default_rng(21)
    cfg = NeurnConfig()
    for _ in range(10):
        img = rng.uniform(0, 1, (1, 12, 12))
        base = neurn_apply(Image(img), cfg).data
        for _ in range(5):
            a = rng.uniform(0.1, 3.0) * rng.choice([-1.0, 1.0])
            b = rng.uniform(-0.5, 0.5)
            out = neurn_apply(Image(a * img + b), cfg).data
            assert np.max(np.abs(out - base)) <= 1e-9


def test_apply_locality():
    # a single-pixel edit moves the std map only inside its (2k-1) window;
    # outside that window the normalized outputs differ only by the global
    # rescale of the per-channel peak
    rng = np.random.default_rng(33)
    k = 3
    cfg = NeurnConfig(k=k)
    img = rng.uniform(0, 1, (16, 16))
    edited = img.copy()
    edited[8, 8] += 0.5
    base = patch_stats(Image(img), cfg).std_map.data[0]
    changed = patch_stats(Image(edited), cfg).std_map.data[0]
    half = k - 1  # (2k-1) window around the edit
    mask = np.zeros_like(base, dtype=bool)
    mask[8 - half : 8 + half + 1, 8 - half : 8 + half + 1] = True
    assert np.max(np.abs(base[~mask] - changed[~mask])) < 1e-15
    # with the divisor held fixed, partial recomputation equals the full one
    out_full = neurn_apply(Image(edited), cfg).data[0]
    assert np.max(np.abs(out_full - changed / changed.max())) < 1e-15


@pytest.mark.parametrize("padding", ["replicate", "reflect"])
def test_apply_matches_oracle_small_images(padding):
    rng = np.random.default_rng(77)
    for _ in range(5):
        h, w = rng.integers(8, 20, size=2)
        img = rng.uniform(0, 1, (int(h), int(w)))
        for k in (3, 5):
            cfg = NeurnConfig(k=k, padding=padding)
            out = neurn_apply(Image(img), cfg).data[0]
            assert np.max(np.abs(out - neurn_oracle(img, k, padding))) < 1e-12


def test_apply_channels_normalized_independently():
    rng = np.random.default_rng(13)
    a = rng.uniform(0, 1, (5, 5))
    b = 3.0 * a + 0.1  # same structure, different contrast
    both = neurn_apply(Image(np.stack([a, b])), NeurnConfig())
    assert np.max(np.abs(both.data[0] - both.data[1])) < 1e-9


def test_apply_stack_matches_per_image():
    rng = np.random.default_rng(14)
    stack = rng.uniform(0, 1, (4, 8, 8))
    cfg = NeurnConfig()
    batched = neurn_apply_stack(stack, cfg)
    for i in range(4):
        single = neurn_apply(Image(stack[i]), cfg).data[0]
        assert np.array_equal(batched[i], single)


def test_reflect_padding_needs_margin():
    with pytest.raises(UsageError):
        patch_stats(Image(np.zeros((1, 2, 8))), NeurnConfig(k=5, padding="reflect"))
