"""Build 2-D representations from neural trial traces and from stored kernels.

A neuron's representation is the stimulus set weighted by that neuron's
responses: with trial traces stacked as rows per stimulus and stimuli
flattened to rows, the full product

    reps = traces^T @ flattened_stimuli

gives one map per trace position; reducing each trace to its peak (or mean)
first gives a single map per neuron.  An artificial feature representation
is one channel of one convolution filter, read straight out of a rank-4
kernel tensor.

Representation sets are stored on disk as an NTF tensor of shape
``[n, h, w]`` plus a JSON sidecar ``<path>.meta.json`` holding the per-map
metadata records.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, UsageError
from .tensorio import Tensor, load_ntf, save_ntf

CELL_CLASSES = ("excitatory", "inhibitory")
REP_MODES = ("peak", "mean", "full")

NEURON_META_KEYS = ("neuron_id", "cell_class", "genotype", "region")


@dataclass(frozen=True)
class StimulusSet:
    """Stimuli resized to ``side`` x ``side`` and flattened to rows in [0, 1]."""

    side: int
    flattened: np.ndarray

    def __post_init__(self):
        arr = np.array(self.flattened, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr.reshape(arr.shape[0], -1)
        if arr.ndim != 2:
            raise UsageError(f"stimuli must be [count, side^2], got ndim={arr.ndim}")
        if self.side < 1 or arr.shape[1] != self.side * self.side:
            raise UsageError(
                f"stimulus rows have {arr.shape[1]} entries, side={self.side} needs {self.side ** 2}"
            )
        if arr.shape[0] < 1:
            raise UsageError("stimulus set is empty")
        if not np.all(np.isfinite(arr)):
            raise UsageError("stimuli contain non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise UsageError("stimulus values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "flattened", arr)

    @property
    def count(self) -> int:
        return self.flattened.shape[0]


@dataclass(frozen=True)
class TrialTraces:
    """One neuron's DF/F trial traces, one row per stimulus presentation."""

    neuron_id: str
    cell_class: str
    genotype: str
    region: str
    traces: np.ndarray

    def __post_init__(self):
        if self.cell_class not in CELL_CLASSES:
            raise UsageError(
                f"cell_class must be one of {CELL_CLASSES}, got {self.cell_class!r}"
            )
        arr = np.array(self.traces, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UsageError(
                f"traces must be a non-empty [count, trace_len] matrix, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise UsageError(f"neuron {self.neuron_id}: traces contain non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "traces", arr)

    @property
    def count(self) -> int:
        return self.traces.shape[0]

    def meta(self) -> dict:
        return {
            "neuron_id": self.neuron_id,
            "cell_class": self.cell_class,
            "genotype": self.genotype,
            "region": self.region,
        }


@dataclass
class RepresentationSet:
    """A bag of same-sized 2-D maps with one metadata record per map."""

    maps: np.ndarray
    meta: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.maps, dtype=np.float64)
        if arr.ndim != 3:
            raise UsageError(f"maps must be stacked [n, h, w], got ndim={arr.ndim}")
        if len(self.meta) != arr.shape[0]:
            raise UsageError(
                f"{arr.shape[0]} maps but {len(self.meta)} metadata records"
            )
        if not np.all(np.isfinite(arr)):
            raise UsageError("maps contain non-finite values")
        self.maps = arr

    def __len__(self) -> int:
        return self.maps.shape[0]

    def take(self, indices) -> "RepresentationSet":
        idx = np.asarray(indices, dtype=np.int64)
        return RepresentationSet(
            self.maps[idx], [self.meta[i] for i in idx], dict(self.info)
        )


def build_neural_rep(
    traces: TrialTraces, stimuli: StimulusSet, mode: str = "peak"
) -> RepresentationSet:
    """Weight the flattened stimuli by one neuron's responses.

    ``peak`` and ``mean`` reduce each trace to a scalar first, producing a
    single map; ``full`` keeps every trace position, producing one map per
    position (the transposed-traces @ stimuli product).
    """
    if mode not in REP_MODES:
        raise UsageError(f"mode must be one of {REP_MODES}, got {mode!r}")
    if traces.count != stimuli.count:
        raise UsageError(
            f"neuron {traces.neuron_id}: {traces.count} traces vs "
            f"{stimuli.count} stimuli"
        )
    if mode == "peak":
        weights = traces.traces.max(axis=1)[None, :]
    elif mode == "mean":
        weights = traces.traces.mean(axis=1)[None, :]
    else:
        weights = traces.traces.T
    product = weights @ stimuli.flattened
    maps = product.reshape(-1, stimuli.side, stimuli.side)
    base = traces.meta()
    if mode == "full":
        meta = [{**base, "trace_index": int(i)} for i in range(maps.shape[0])]
    else:
        meta = [dict(base)]
    return RepresentationSet(maps, meta)


def build_neural_reps(
    neurons: list, stimuli: StimulusSet, mode: str = "peak", threads: int = 1
) -> RepresentationSet:
    """Concatenate :func:`build_neural_rep` over many neurons, in list order.

    Per-neuron builds are independent; ``threads`` > 1 runs them on a pool
    without affecting the (neuron-order) result.
    """
    from .parallel import parallel_map

    if not neurons:
        raise UsageError("no neurons given")
    parts = parallel_map(lambda n: build_neural_rep(n, stimuli, mode), neurons, threads)
    maps = np.concatenate([p.maps for p in parts], axis=0)
    meta = [m for p in parts for m in p.meta]
    return RepresentationSet(maps, meta)


def extract_feature_reps(kernels: Tensor, meta: dict) -> RepresentationSet:
    """Split a ``[filters, channels, h, w]`` kernel tensor into 2-D maps.

    Maps come out in filter-outer row-major order; each record carries the
    base artificial metadata (model, layer, neurn flag) plus its filter and
    channel indices.
    """
    if kernels.data.ndim != 4:
        raise UsageError(
            f"kernel tensor must have rank 4 [F, C, H, W], got rank {kernels.data.ndim}"
        )
    n_filters, n_channels, h, w = kernels.data.shape
    maps = kernels.data.reshape(n_filters * n_channels, h, w)
    records = []
    for f in range(n_filters):
        for c in range(n_channels):
            records.append({**meta, "filter": f, "channel": c})
    return RepresentationSet(maps, records)


def ingest_neuron_dir(directory) -> list:
    """Load every per-neuron NTF file in ``directory``, sorted by neuron id.

    Each file must hold a ``[count, trace_len]`` tensor and carry the meta
    keys ``neuron_id``, ``cell_class``, ``genotype``, ``region``.
    """
    try:
        names = sorted(n for n in os.listdir(directory) if n.endswith(".ntf"))
    except OSError as e:
        raise DataFormatError(f"cannot list {directory}: {e}") from e
    neurons = []
    for name in names:
        path = os.path.join(directory, name)
        tensor = load_ntf(path)
        for key in NEURON_META_KEYS:
            if key not in tensor.meta:
                raise DataFormatError(f"{path}: missing required meta key {key!r}")
        if tensor.data.ndim != 2:
            raise DataFormatError(
                f"{path}: traces must be [count, trace_len], got shape {tensor.data.shape}"
            )
        if tensor.meta["cell_class"] not in CELL_CLASSES:
            raise DataFormatError(
                f"{path}: cell_class must be one of {CELL_CLASSES}, "
                f"got {tensor.meta['cell_class']!r}"
            )
        neurons.append(
            TrialTraces(
                neuron_id=tensor.meta["neuron_id"],
                cell_class=tensor.meta["cell_class"],
                genotype=tensor.meta["genotype"],
                region=tensor.meta["region"],
                traces=tensor.data,
            )
        )
    neurons.sort(key=lambda n: n.neuron_id)
    return neurons


def save_rep_set(reps: RepresentationSet, path) -> None:
    """Write maps as NTF plus a ``<path>.meta.json`` sidecar."""
    save_ntf(Tensor(reps.maps, {"kind": "representation_set"}), path)
    sidecar = {"meta": reps.meta, "info": reps.info}
    with open(f"{path}.meta.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_rep_set(path) -> RepresentationSet:
    """Inverse of :func:`save_rep_set`; validates sidecar consistency."""
    tensor = load_ntf(path)
    if tensor.data.ndim != 3:
        raise DataFormatError(
            f"{path}: representation maps must be [n, h, w], got shape {tensor.data.shape}"
        )
    sidecar_path = f"{path}.meta.json"
    try:
        with open(sidecar_path, "r", encoding="utf-8") as f:
            sidecar = json.load(f)
    except OSError as e:
        raise DataFormatError(f"cannot read sidecar {sidecar_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{sidecar_path}: malformed JSON: {e}") from e
    meta = sidecar.get("meta")
    if not isinstance(meta, list) or len(meta) != tensor.data.shape[0]:
        raise DataFormatError(
            f"{sidecar_path}: expected {tensor.data.shape[0]} metadata records, "
            f"got {len(meta) if isinstance(meta, list) else type(meta).__name__}"
        )
    return RepresentationSet(tensor.data, meta, sidecar.get("info", {}))
