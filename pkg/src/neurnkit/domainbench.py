"""Desk-scale domain-generalization harness.

Datasets are single-channel image stacks with 10-way class labels.  Domain
shifts (affine intensity changes, inversion, textured backgrounds) probe
how much a classifier's accuracy degrades away from its training domain,
and how much of that degradation the NeuRN input transform removes.

The classifier is a softmax regression or a one-hidden-layer ReLU MLP
trained with mini-batch cross-entropy (Adam by default), seeded shuffling,
and early stopping on validation accuracy.  Everything is plain float64
numpy, deterministic given the config seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError
from .neurn import NeurnConfig, neurn_apply_stack

SHIFT_KINDS = ("affine", "invert", "background_blend")
ARCHS = ("softmax", "mlp")
OPTIMIZERS = ("adam", "sgd")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

N_CLASSES = 10

_EVAL_CHUNK = 8192


@dataclass
class DomainDataset:
    """Named stack of same-sized single-channel images with class labels."""

    name: str
    images: np.ndarray  # [n, side, side]
    labels: np.ndarray  # [n] ints in 0..9
    domain_tag: str = ""

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels)
        if images.ndim != 3 or images.shape[1] != images.shape[2]:
            raise UsageError(f"images must be [n, side, side], got shape {images.shape}")
        if labels.shape != (images.shape[0],):
            raise UsageError(
                f"{images.shape[0]} images but {labels.shape} labels"
            )
        if not np.all(np.isfinite(images)):
            raise UsageError("images contain non-finite values")
        labels = labels.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise UsageError(f"labels must lie in 0..{N_CLASSES - 1}")
        self.images = images
        self.labels = labels
        if not self.domain_tag:
            self.domain_tag = self.name

    @property
    def side(self) -> int:
        return self.images.shape[1]

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class ShiftSpec:
    """A pixel-space domain shift.

    ``affine`` maps pixels to gain*x + bias; ``invert`` to 1 - x;
    ``background_blend`` composites each image against a seeded smooth
    texture b via |x - b| (the absolute-difference rule used to fuse digits
    onto textured backgrounds), with the texture scaled by ``scale``.
    """

    kind: str
    gain: float = 1.0
    bias: float = 0.0
    texture_seed: int = 0
    scale: float = 1.0
    clamp: bool = False

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise UsageError(f"kind must be one of {SHIFT_KINDS}, got {self.kind!r}")
        if self.kind == "affine" and self.gain == 0.0:
            raise UsageError("affine gain must be nonzero")


@dataclass(frozen=True)
class ClassifierConfig:
    arch: str = "mlp"
    hidden: int = 128
    learning_rate: float = 0.001
    batch_size: int = 256
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise UsageError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.optimizer not in OPTIMIZERS:
            raise UsageError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        for name in ("hidden", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise UsageError("learning_rate must be positive")

    @property
    def arch_label(self) -> str:
        return "softmax" if self.arch == "softmax" else f"mlp{self.hidden}"


@dataclass
class MlpModel:
    """Trained weights plus the preprocessing contract they were fit under."""

    params: dict
    arch: str
    input_side: int
    neurn: NeurnConfig | None
    history: dict = field(default_factory=dict)


def _smooth_texture(side: int, rng: np.random.Generator) -> np.ndarray:
    """Sum of 3 random sinusoidal gratings, min-max normalized to [0, 1]."""
    ys, xs = np.mgrid[0:side, 0:side] / side
    tex = np.zeros((side, side))
    for _ in range(3):
        theta = rng.uniform(0.0, np.pi)
        freq = rng.uniform(1.0, 4.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        tex += np.sin(2.0 * np.pi * freq * (xs * np.cos(theta) + ys * np.sin(theta)) + phase)
    lo, hi = tex.min(), tex.max()
    if hi > lo:
        tex = (tex - lo) / (hi - lo)
    else:
        tex = np.zeros_like(tex)
    return tex


def apply_shift(ds: DomainDataset, spec: ShiftSpec, seed: int = 0) -> DomainDataset:
    """Shift every image; labels pass through, the domain tag records the shift."""
    images = ds.images
    if spec.kind == "affine":
        out = spec.gain * images + spec.bias
        tag = f"{ds.domain_tag}+affine({spec.gain:g},{spec.bias:g})"
    elif spec.kind == "invert":
        out = 1.0 - images
        tag = f"{ds.domain_tag}+invert"
    else:
        rng = np.random.default_rng(np.random.SeedSequence((seed, spec.texture_seed)))
        out = np.empty_like(images)
        for i in range(images.shape[0]):
            texture = spec.scale * _smooth_texture(ds.side, rng)
            out[i] = np.abs(images[i] - texture)
        tag = f"{ds.domain_tag}+blend({spec.scale:g})"
    if spec.clamp:
        out = np.clip(out, 0.0, 1.0)
    return DomainDataset(name=ds.name, images=out, labels=ds.labels.copy(), domain_tag=tag)


def _init_params(cfg: ClassifierConfig, n_features: int, rng: np.random.Generator) -> dict:
    if cfg.arch == "softmax":
        return {
            "W": np.zeros((n_features, N_CLASSES)),
            "b": np.zeros(N_CLASSES),
        }
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_features), size=(n_features, cfg.hidden)),
        "b1": np.zeros(cfg.hidden),
        "W2": rng.normal(0.0, np.sqrt(1.0 / cfg.hidden), size=(cfg.hidden, N_CLASSES)),
        "b2": np.zeros(N_CLASSES),
    }


def _logits(params: dict, x: np.ndarray) -> np.ndarray:
    if "W" in params:
        return x @ params["W"] + params["b"]
    hidden = np.maximum(x @ params["W1"] + params["b1"], 0.0)
    return hidden @ params["W2"] + params["b2"]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_grads(params: dict, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy over a batch, with analytic gradients."""
    n = x.shape[0]
    probs_grad = None
    if "W" in params:
        logits = x @ params["W"] + params["b"]
        probs = _softmax(logits)
        loss = -np.log(probs[np.arange(n), y] + 1e-300).mean()
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        grads = {"W": x.T @ dlogits, "b": dlogits.sum(axis=0)}
    else:
        pre = x @ params["W1"] + params["b1"]
        hidden = np.maximum(pre, 0.0)
        logits = hidden @ params["W2"] + params["b2"]
        probs = _softmax(logits)
        loss = -np.log(probs[np.arange(n), y] + 1e-300).mean()
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        dhidden = dlogits @ params["W2"].T
        dpre = dhidden * (pre > 0.0)
        grads = {
            "W1": x.T @ dpre,
            "b1": dpre.sum(axis=0),
            "W2": hidden.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
    return float(loss), grads


class _Adam:
    def __init__(self, params: dict, lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bias1 = 1.0 - ADAM_BETA1**self.t
        bias2 = 1.0 - ADAM_BETA2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * g * g
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


class _Sgd:
    def __init__(self, params: dict, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for k in params:
            params[k] -= self.lr * grads[k]


def _preprocess_flat(images: np.ndarray, neurn: NeurnConfig | None) -> np.ndarray:
    if neurn is not None:
        images = neurn_apply_stack(images, neurn)
    return images.reshape(images.shape[0], -1)


def train_classifier(
    train: DomainDataset,
    val: DomainDataset,
    cfg: ClassifierConfig,
    preprocess: NeurnConfig | None = None,
) -> MlpModel:
    """Fit the classifier with early stopping on validation accuracy.

    When ``preprocess`` is given, every image passes through the NeuRN
    transform before flattening, at train and evaluation time alike; the
    fitted model refuses evaluation under a different preprocessing setting.
    """
    if len(train) == 0 or len(val) == 0:
        raise UsageError("training and validation sets must be non-empty")
    if train.side != val.side:
        raise UsageError(f"side mismatch: train {train.side} vs val {val.side}")
    if set(np.unique(train.labels)) != set(np.unique(val.labels)):
        raise UsageError("train and validation class sets differ")

    x_train = _preprocess_flat(train.images, preprocess)
    x_val = _preprocess_flat(val.images, preprocess)
    y_train, y_val = train.labels, val.labels

    rng = np.random.default_rng(cfg.seed)
    params = _init_params(cfg, x_train.shape[1], rng)
    optimizer = _Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(
        params, cfg.learning_rate
    )

    best_acc = -1.0
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = 0
    since_best = 0
    history = {"train_loss": [], "val_accuracy": []}

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(y_train))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            optimizer.step(params, grads)
            epoch_losses.append(loss)
        val_acc = float(
            (_predict_flat(params, x_val) == y_val).mean()
        )
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_accuracy"].append(val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = {k: v.copy() for k, v in params.items()}
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    history["best_epoch"] = best_epoch
    history["best_val_accuracy"] = best_acc
    return MlpModel(
        params=best_params,
        arch=cfg.arch_label,
        input_side=train.side,
        neurn=preprocess,
        history=history,
    )


def _predict_flat(params: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], _EVAL_CHUNK):
        block = x[start : start + _EVAL_CHUNK]
        out[start : start + block.shape[0]] = np.argmax(_logits(params, block), axis=1)
    return out


def _check_eval_contract(model: MlpModel, ds: DomainDataset, preprocess: NeurnConfig | None):
    if ds.side != model.input_side:
        raise UsageError(
            f"dataset side {ds.side} does not match model input side {model.input_side}"
        )
    if preprocess != model.neurn:
        raise UsageError(
            "preprocessing mismatch: model was trained with "
            f"{model.neurn!r}, evaluation requested {preprocess!r}"
        )


def predict(model: MlpModel, ds: DomainDataset, preprocess: NeurnConfig | None = None):
    """Argmax class predictions (ties resolve to the lowest class index)."""
    _check_eval_contract(model, ds, preprocess)
    return _predict_flat(model.params, _preprocess_flat(ds.images, preprocess))


def evaluate(model: MlpModel, ds: DomainDataset, preprocess: NeurnConfig | None = None) -> float:
    """Prediction accuracy on a dataset, in [0, 1]."""
    if len(ds) == 0:
        raise UsageError("dataset is empty")
    return float((predict(model, ds, preprocess) == ds.labels).mean())


@dataclass(frozen=True)
class TransferRow:
    source: str
    target: str
    arch: str
    neurn_flag: bool
    accuracy: float
    seed: int


@dataclass
class TransferReport:
    """Accuracy grid over (source, target, normalization flag) cells."""

    rows: list = field(default_factory=list)

    def accuracy(self, source: str, target: str, neurn_flag: bool, seed=None) -> float:
        for row in self.rows:
            if (
                row.source == source
                and row.target == target
                and row.neurn_flag == neurn_flag
                and (seed is None or row.seed == seed)
            ):
                return row.accuracy
        raise UsageError(f"no row for {source}->{target} neurn={neurn_flag}")


def stratified_holdout(ds: DomainDataset, fraction: float, seed: int):
    """Split off a per-class seeded fraction as a validation holdout."""
    if not 0.0 < fraction < 1.0:
        raise UsageError(f"holdout fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    val_idx = []
    for cls in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == cls)
        members = members[rng.permutation(members.size)]
        n_val = max(1, int(round(members.size * fraction)))
        if n_val >= members.size:
            raise UsageError(f"class {cls} too small for a {fraction:.0%} holdout")
        val_idx.append(members[:n_val])
    val_idx = np.sort(np.concatenate(val_idx))
    mask = np.zeros(len(ds), dtype=bool)
    mask[val_idx] = True
    train = DomainDataset(ds.name, ds.images[~mask], ds.labels[~mask], ds.domain_tag)
    val = DomainDataset(ds.name, ds.images[mask], ds.labels[mask], ds.domain_tag)
    return train, val


def run_transfer_matrix(
    domains: list,
    cfg: ClassifierConfig,
    neurn: NeurnConfig | None = None,
    val_fraction: float = 0.1,
) -> TransferReport:
    """Train on every source domain and evaluate on every domain.

    Per source and normalization flag, the classifier trains once on the
    source (10% seeded stratified holdout as validation) and is evaluated
    on each target's full image set; the source->source cell reports
    accuracy on the full source set.  Rows come out in fixed
    (source, target, flag) order, so reruns with the same seed are
    byte-identical when serialized.
    """
    if len(domains) < 1:
        raise UsageError("need at least one domain")
    side = domains[0].side
    class_set = set(np.unique(domains[0].labels))
    for ds in domains[1:]:
        if ds.side != side:
            raise UsageError(f"domain {ds.name} side {ds.side} differs from {side}")
        if set(np.unique(ds.labels)) != class_set:
            raise UsageError(f"domain {ds.name} has a different class set")
    neurn_cfg = neurn if neurn is not None else NeurnConfig()

    accuracies = {}
    for si, source in enumerate(domains):
        train, val = stratified_holdout(
            source, val_fraction, np.random.SeedSequence((cfg.seed, si)).generate_state(1)[0]
        )
        for flag in (False, True):
            model = train_classifier(train, val, cfg, neurn_cfg if flag else None)
            for target in domains:
                acc = evaluate(model, target, neurn_cfg if flag else None)
                accuracies[(source.name, target.name, flag)] = acc

    report = TransferReport()
    for source in domains:
        for target in domains:
            for flag in (False, True):
                report.rows.append(
                    TransferRow(
                        source=source.name,
                        target=target.name,
                        arch=cfg.arch_label,
                        neurn_flag=flag,
                        accuracy=accuracies[(source.name, target.name, flag)],
                        seed=cfg.seed,
                    )
                )
    return report


def resize_dataset(ds: DomainDataset, side: int) -> DomainDataset:
    """Bilinearly resize every image to ``side`` x ``side``."""
    from .tensorio import Image, resize_bilinear

    if side == ds.side:
        return ds
    resized = np.stack(
        [resize_bilinear(Image(img), side, side).data[0] for img in ds.images]
    )
    return DomainDataset(ds.name, resized, ds.labels.copy(), ds.domain_tag)


def save_domain(ds: DomainDataset, images_path, labels_path) -> None:
    """Write a domain as an NTF image stack plus an NTF label vector."""
    from .tensorio import Tensor, save_ntf

    save_ntf(
        Tensor(ds.images, {"kind": "domain_images", "name": ds.name, "domain_tag": ds.domain_tag}),
        images_path,
    )
    save_ntf(
        Tensor(ds.labels.astype(np.float64), {"kind": "domain_labels", "name": ds.name}),
        labels_path,
    )


def load_domain(images_path, labels_path, name: str | None = None) -> DomainDataset:
    """Load a domain from IDX or NTF files (format sniffed from the magic)."""
    from .errors import DataFormatError
    from .tensorio import NTF_MAGIC, load_idx, load_ntf

    def load_any(path):
        with open(path, "rb") as f:
            magic = f.read(4)
        return load_ntf(path) if magic == NTF_MAGIC else load_idx(path)

    images_t = load_any(images_path)
    labels_t = load_any(labels_path)
    if images_t.data.ndim != 3 or images_t.data.shape[1] != images_t.data.shape[2]:
        raise DataFormatError(
            f"{images_path}: expected an [n, side, side] image stack, got {images_t.shape}"
        )
    if labels_t.data.ndim != 1:
        raise DataFormatError(f"{labels_path}: expected a 1-D label vector, got {labels_t.shape}")
    labels = labels_t.data
    if np.any(labels != np.rint(labels)):
        raise DataFormatError(f"{labels_path}: labels must be integers")
    resolved = name or images_t.meta.get("name") or "domain"
    return DomainDataset(
        name=resolved,
        images=images_t.data,
        labels=labels.astype(np.int64),
        domain_tag=images_t.meta.get("domain_tag", resolved),
    )


def write_transfer_csv(rows: list, path) -> None:
    """Serialize transfer rows as CSV: source, target, arch, neurn, accuracy, seed."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["source", "target", "arch", "neurn", "accuracy", "seed"])
        for row in rows:
            writer.writerow(
                [
                    row.source,
                    row.target,
                    row.arch,
                    str(row.neurn_flag).lower(),
                    repr(float(row.accuracy)),
                    row.seed,
                ]
            )
