"""Run configuration: defaults, strict validation, and run manifests.

A run config is a JSON document with one section per pipeline stage plus
global settings.  Unknown keys are rejected so typos cannot silently fall
back to defaults.  Every CLI run writes a manifest next to its primary
output echoing the effective configuration, its hash, and the checksums of
all input files; manifests contain nothing time- or host-dependent, so
identical runs produce identical bytes.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .errors import DataFormatError, UsageError

DEFAULTS = {
    "seed": 0,
    "out_dir": ".",
    "threads": 0,  # 0 = use available parallelism
    "neurn": {
        "k": 3,
        "padding": "replicate",
        "epsilon": 1e-12,
    },
    "embed": {
        "method": "pca",
        "out_dims": 2,
        "n_neighbors": 15,
        "min_dist": 0.1,
        "metric": "euclidean",
    },
    "kmeans": {
        "k": 10,
        "per_cluster": 50,
    },
    "rsa": {
        "common_side": 28,
        "normalize": True,
    },
    "kde": {
        "bandwidth": "auto",
        "grid_size": 512,
        "subsample_limit": 1000000,
    },
    "bench": {
        "side": 16,
        "arch": "mlp",
        "hidden": 128,
        "learning_rate": 0.001,
        "batch_size": 256,
        "max_epochs": 50,
        "patience": 5,
        "optimizer": "adam",
        "val_fraction": 0.1,
    },
}


def _check_keys(given: dict, allowed: dict, path: str) -> None:
    for key, value in given.items():
        if key not in allowed:
            raise UsageError(f"unknown config key {path}{key!r}")
        if isinstance(allowed[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config section {path}{key!r} must be an object")
            _check_keys(value, allowed[key], f"{path}{key}.")


def merge_config(overrides: dict | None) -> dict:
    """Defaults overlaid with ``overrides``; unknown keys rejected."""
    merged = copy.deepcopy(DEFAULTS)
    if overrides is None:
        return merged
    if not isinstance(overrides, dict):
        raise UsageError("config document must be a JSON object")
    _check_keys(overrides, DEFAULTS, "")
    for key, value in overrides.items():
        if isinstance(value, dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def load_config(path) -> dict:
    """Read a JSON config file and merge it over the defaults."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as e:
        raise DataFormatError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: malformed JSON: {e}") from e
    return merge_config(document)


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    path, command: list, cfg: dict, inputs: list, outputs: list, notes: dict | None = None
) -> None:
    """Echo the effective run configuration next to an output file.

    ``inputs`` are paths whose content is checksummed; ``outputs`` are the
    names of files the run produced.  Nothing time- or host-dependent goes
    in, so identical runs write identical manifests.
    """
    manifest = {
        "command": [str(c) for c in command],
        "config": cfg,
        "config_hash": config_hash(cfg),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": [str(o) for o in outputs],
    }
    if notes:
        manifest["notes"] = notes
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
