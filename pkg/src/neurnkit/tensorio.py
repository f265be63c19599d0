"""Canonical numeric containers and the bit-exact file formats built on them.

Two in-memory types are shared by every other module:

* :class:`Image` — a channel-major ``(channels, height, width)`` grid of
  finite reals, nominally in [0, 1] (shift probes may exceed the nominal
  range; only finiteness is enforced).
* :class:`Tensor` — an arbitrary-shape row-major array plus a string-keyed
  string metadata map.

Two on-disk formats:

* NTF — the toolkit's native container.  Layout::

      bytes 0..3    magic b"NTF1"
      bytes 4..7    header length, 4-byte little-endian unsigned
      bytes 8..     UTF-8 JSON header {"dtype": "f32"|"f64",
                                       "shape": [...], "meta": {...}}
      then          payload, little-endian row-major values

  Files are written as f64; f32 is accepted on read and widened.

* IDX — the standard MNIST layout (big-endian magic 0x00000803 for image
  sets and 0x00000801 for label sets, 4-byte big-endian dimension sizes,
  raw unsigned bytes).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, UsageError

NTF_MAGIC = b"NTF1"
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_NTF_DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


def _as_f64(values, name: str) -> np.ndarray:
    # Always copy so freezing the buffer never touches caller-owned memory.
    arr = np.array(values, dtype=np.float64, order="C")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Image:
    """A single image, stored channel-major as ``(channels, height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_f64(self.data, "image")
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3:
            raise UsageError(f"image data must be 2-D or 3-D, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise UsageError(f"image dimensions must be positive, got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Tensor:
    """A row-major numeric array with string-to-string metadata."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = _as_f64(self.data, "tensor")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        for k, v in self.meta.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise UsageError(f"tensor meta must map str to str, got {k!r}: {v!r}")

    @property
    def shape(self) -> tuple:
        return self.data.shape


def save_ntf(t: Tensor, path) -> None:
    """Write ``t`` to ``path`` in the NTF container format (f64 payload)."""
    header = {
        "dtype": "f64",
        "shape": list(t.data.shape),
        "meta": dict(sorted(t.meta.items())),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(NTF_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    except OSError as e:
        raise DataFormatError(f"cannot write {path}: {e}") from e


def load_ntf(path) -> Tensor:
    """Read an NTF file; inverse of :func:`save_ntf`.

    Rejects wrong magic, truncated headers or payloads, unknown dtypes,
    and shape/payload mismatches, reporting the offending byte offset.
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e

    if raw[:4] != NTF_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {raw[:4]!r} at byte offset 0 (expected {NTF_MAGIC!r})"
        )
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated header length field at byte offset 4")
    (header_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + header_len:
        raise DataFormatError(
            f"{path}: truncated header at byte offset 8 "
            f"(declared {header_len} bytes, file holds {len(raw) - 8})"
        )
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path}: malformed header at byte offset 8: {e}") from e

    dtype_name = header.get("dtype")
    if dtype_name not in _NTF_DTYPES:
        raise DataFormatError(
            f"{path}: unknown dtype {dtype_name!r} in header at byte offset 8"
        )
    shape = header.get("shape")
    if not isinstance(shape, list) or not all(
        isinstance(s, int) and s >= 0 for s in shape
    ):
        raise DataFormatError(f"{path}: invalid shape {shape!r} in header")
    meta = header.get("meta", {})
    if not isinstance(meta, dict):
        raise DataFormatError(f"{path}: invalid meta in header")

    dtype = _NTF_DTYPES[dtype_name]
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload_offset = 8 + header_len
    expected = count * dtype.itemsize
    actual = len(raw) - payload_offset
    if actual != expected:
        raise DataFormatError(
            f"{path}: payload at byte offset {payload_offset} holds {actual} bytes, "
            f"shape {shape} requires {expected}"
        )
    values = np.frombuffer(raw, dtype=dtype, count=count, offset=payload_offset)
    values = values.astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{path}: payload contains non-finite values")
    return Tensor(values, {str(k): str(v) for k, v in meta.items()})


def _read_be32(raw: bytes, offset: int, path, what: str) -> int:
    if len(raw) < offset + 4:
        raise DataFormatError(f"{path}: truncated {what} at byte offset {offset}")
    return struct.unpack(">I", raw[offset : offset + 4])[0]


def load_idx(path) -> Tensor:
    """Read an IDX (MNIST-layout) file.

    Image sets come back with shape ``[count, rows, cols]`` rescaled from
    byte range to [0, 1]; label sets with shape ``[count]``.
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e

    magic = _read_be32(raw, 0, path, "magic")
    if magic == IDX_IMAGE_MAGIC:
        count = _read_be32(raw, 4, path, "item count")
        rows = _read_be32(raw, 8, path, "row count")
        cols = _read_be32(raw, 12, path, "column count")
        expected = count * rows * cols
        payload = raw[16:]
        if len(payload) != expected:
            raise DataFormatError(
                f"{path}: image payload holds {len(payload)} bytes, "
                f"{count}x{rows}x{cols} requires {expected}"
            )
        data = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
        return Tensor(data.astype(np.float64) / 255.0, {"source": "idx", "kind": "images"})
    if magic == IDX_LABEL_MAGIC:
        count = _read_be32(raw, 4, path, "item count")
        payload = raw[8:]
        if len(payload) != count:
            raise DataFormatError(
                f"{path}: label payload holds {len(payload)} bytes, requires {count}"
            )
        data = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        return Tensor(data, {"source": "idx", "kind": "labels"})
    raise DataFormatError(
        f"{path}: unknown magic 0x{magic:08x} at byte offset 0 "
        f"(expected 0x{IDX_IMAGE_MAGIC:08x} or 0x{IDX_LABEL_MAGIC:08x})"
    )


def save_idx_images(values: np.ndarray, path) -> None:
    """Write a ``[count, rows, cols]`` array in [0, 1] as an IDX image file."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise UsageError(f"idx image array must be 3-D, got ndim={arr.ndim}")
    quantized = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *quantized.shape))
        f.write(quantized.tobytes())


def save_idx_labels(labels: np.ndarray, path) -> None:
    """Write an integer class vector in 0..255 as an IDX label file."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise UsageError(f"idx label array must be 1-D, got ndim={arr.ndim}")
    quantized = arr.astype(np.int64)
    if np.any(quantized < 0) or np.any(quantized > 255):
        raise UsageError("idx labels must lie in 0..255")
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, len(quantized)))
        f.write(quantized.astype(np.uint8).tobytes())


def _axis_coords(n_out: int, n_in: int):
    # Corner-aligned sampling: first and last output samples map onto the
    # image corners; a single output sample maps to coordinate 0.
    if n_out == 1:
        pos = np.zeros(1)
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.floor(pos).astype(np.int64)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    """Per-channel bilinear resize with corner-aligned sample coordinates."""
    if out_w < 1 or out_h < 1:
        raise UsageError(f"target dimensions must be positive, got {out_w}x{out_h}")
    x0, x1, tx = _axis_coords(out_w, img.width)
    y0, y1, ty = _axis_coords(out_h, img.height)

    src = img.data
    top = src[:, y0[:, None], x0[None, :]] * (1 - tx) + src[:, y0[:, None], x1[None, :]] * tx
    bottom = src[:, y1[:, None], x0[None, :]] * (1 - tx) + src[:, y1[:, None], x1[None, :]] * tx
    out = top * (1 - ty[:, None]) + bottom * ty[:, None]
    return Image(out)


def to_grayscale(img: Image) -> Image:
    """Combine a 3-channel image with luma weights 0.299/0.587/0.114.

    Single-channel input passes through unchanged.
    """
    if img.channels == 1:
        return Image(img.data)
    if img.channels != 3:
        raise UsageError(f"grayscale conversion needs 1 or 3 channels, got {img.channels}")
    r, g, b = GRAY_WEIGHTS
    gray = r * img.data[0] + g * img.data[1] + b * img.data[2]
    return Image(gray[None, :, :])
