"""Walkthrough of the NeuRN transform on synthetic images.

The transform replaces every pixel with the standard deviation of its
k x k neighborhood, scaled so each channel's peak contrast is 1.  Because
patch std is blind to additive offsets and scales linearly with gain, the
output is invariant to affine intensity changes of the input: that is the
property that makes the encoding domain-agnostic.
"""

import os

import numpy as np

from neurnkit import Image, NeurnConfig, Tensor, neurn_apply, patch_stats, save_ntf

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

rng = np.random.default_rng(0)

# A toy "scene": smooth gradient + a bright square + noise.
img = np.linspace(0.2, 0.5, 32)[None, :] * np.ones((32, 1))
img[8:16, 8:16] += 0.4
img += rng.normal(0.0, 0.02, img.shape)
img = np.clip(img, 0.0, 1.0)

cfg = NeurnConfig(k=3, padding="replicate")
stats = patch_stats(Image(img), cfg)
normalized = neurn_apply(Image(img), cfg)

print("input range:          [%.3f, %.3f]" % (img.min(), img.max()))
print("patch std range:      [%.4f, %.4f]" % (stats.std_map.data.min(), stats.std_map.data.max()))
print("normalized range:     [%.3f, %.3f]  (peak contrast is always 1)"
      % (normalized.data.min(), normalized.data.max()))

# The square's edges are the high-contrast pixels.
edge_response = normalized.data[0, 8, 8:16].mean()
interior_response = normalized.data[0, 12, 10:14].mean()
print("edge response %.3f vs interior response %.3f" % (edge_response, interior_response))

# Affine invariance: brightening or rescaling the image changes nothing.
for gain, bias in [(2.0, 0.2), (0.5, -0.1), (-1.5, 0.9)]:
    shifted = neurn_apply(Image(gain * img + bias), cfg)
    deviation = np.max(np.abs(shifted.data - normalized.data))
    print(f"gain={gain:+.1f} bias={bias:+.1f}: max output deviation {deviation:.2e}")

save_ntf(Tensor(img), os.path.join(OUT, "scene.ntf"))
save_ntf(Tensor(normalized.data[0]), os.path.join(OUT, "scene_normalized.ntf"))
print("wrote", os.path.join(OUT, "scene.ntf"), "and scene_normalized.ntf")
