"""Representational similarity via RMSE between flattened 2-D maps.

Dissimilarity between two same-sized maps is the root mean squared error
over their flattened entries,

    rmse = sqrt((1/mn) * sum((b_i - a_i)^2))

Pairwise matrices between a feature set and a neural set are built after
resizing every map to a common side (and, by default, min-max scaling each
map so the score reflects pattern mismatch rather than amplitude mismatch).
Grouped means over the matrix reproduce the per-genotype / per-region /
per-model summary analyses, and the paired plain-vs-normalized summaries
feed the below-diagonal scatter comparison.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, UsageError
from .reprs import RepresentationSet
from .tensorio import Image, resize_bilinear


@dataclass
class RmseMatrix:
    """Pairwise RMSE values plus the metadata of both axes."""

    rows: list  # feature-side metadata records
    cols: list  # neural-side metadata records
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.rows), len(self.cols)):
            raise UsageError(
                f"value grid {vals.shape} does not match {len(self.rows)} rows "
                f"x {len(self.cols)} cols"
            )
        if not np.all(np.isfinite(vals)) or (vals < 0).any():
            raise UsageError("rmse values must be finite and non-negative")
        self.values = vals


@dataclass(frozen=True)
class GroupSummary:
    group: object
    mean_rmse: float
    std_rmse: float
    count: int


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference of two equal-shaped maps; symmetric."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise UsageError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise UsageError("maps are empty")
    return float(np.sqrt(np.mean((y - x) ** 2)))


def _minmax(rows: np.ndarray) -> np.ndarray:
    lo = rows.min(axis=1, keepdims=True)
    hi = rows.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(rows)
    nonconst = span[:, 0] > 0
    out[nonconst] = (rows[nonconst] - lo[nonconst]) / span[nonconst]
    return out


def _prepare(reps: RepresentationSet, common_side: int, normalize: bool) -> np.ndarray:
    flat = np.empty((len(reps), common_side * common_side))
    for i in range(len(reps)):
        resized = resize_bilinear(Image(reps.maps[i]), common_side, common_side)
        flat[i] = resized.data[0].ravel()
    return _minmax(flat) if normalize else flat


def compare_sets(
    features: RepresentationSet,
    neurals: RepresentationSet,
    common_side: int = 28,
    normalize: bool = True,
    threads: int = 1,
) -> RmseMatrix:
    """All pairwise RMSE between feature maps (rows) and neural maps (cols).

    Every map is bilinearly resized to ``common_side`` squared first; with
    ``normalize`` each map is then independently min-max scaled to [0, 1]
    (constant maps become all zeros).  Rows are independent, so ``threads``
    only changes wall time, never values.
    """
    from .parallel import parallel_map

    if len(features) == 0 or len(neurals) == 0:
        raise UsageError("representation sets must be non-empty")
    if common_side < 1:
        raise UsageError(f"common_side must be positive, got {common_side}")
    f = _prepare(features, common_side, normalize)
    n = _prepare(neurals, common_side, normalize)
    rows = parallel_map(
        lambda i: np.sqrt(np.mean((n - f[i]) ** 2, axis=1)), range(f.shape[0]), threads
    )
    values = np.stack(rows)
    return RmseMatrix(rows=list(features.meta), cols=list(neurals.meta), values=values)


def _grouping_axis(m: RmseMatrix, group_by: str) -> str:
    on_cols = all(group_by in rec for rec in m.cols)
    on_rows = all(group_by in rec for rec in m.rows)
    if on_cols:
        return "cols"  # neural side wins when the key lives on both axes
    if on_rows:
        return "rows"
    raise UsageError(f"metadata key {group_by!r} is not present on either axis")


def aggregate(m: RmseMatrix, group_by: str) -> list:
    """Mean/std/count of matrix entries per value of a metadata key.

    The key selects columns when it lives on the neural-side records and
    rows when it lives on the model-side records; groups come back in
    lexicographic order.  Std is the population standard deviation.
    """
    axis = _grouping_axis(m, group_by)
    records = m.cols if axis == "cols" else m.rows
    groups = {}
    for idx, rec in enumerate(records):
        groups.setdefault(rec[group_by], []).append(idx)
    summaries = []
    for value in sorted(groups, key=lambda v: str(v)):
        block = m.values[:, groups[value]] if axis == "cols" else m.values[groups[value], :]
        summaries.append(
            GroupSummary(
                group=value,
                mean_rmse=float(block.mean()),
                std_rmse=float(block.std()),
                count=int(block.size),
            )
        )
    return summaries


def neurn_scatter(m_neurn: RmseMatrix, m_plain: RmseMatrix, group_by: str) -> list:
    """Per group, pair the plain and normalized mean RMSE.

    Returns one record per group value with a flag marking groups where the
    normalized models sit below the identity line (lower mean RMSE than
    plain).  Both matrices must share their neural columns.
    """
    if m_neurn.cols != m_plain.cols:
        raise UsageError("matrices do not share neural columns")
    neurn_summaries = aggregate(m_neurn, group_by)
    plain_summaries = aggregate(m_plain, group_by)
    if [s.group for s in neurn_summaries] != [s.group for s in plain_summaries]:
        raise UsageError(f"grouping by {group_by!r} disagrees between the matrices")
    pairs = []
    for s_n, s_p in zip(neurn_summaries, plain_summaries):
        pairs.append(
            {
                "group": s_n.group,
                "plain_mean_rmse": s_p.mean_rmse,
                "neurn_mean_rmse": s_n.mean_rmse,
                "below_diagonal": s_n.mean_rmse < s_p.mean_rmse,
            }
        )
    return pairs


def write_matrix_csv(m: RmseMatrix, path) -> None:
    """One line per matrix entry: JSON row meta, JSON col meta, rmse."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["row_meta", "col_meta", "rmse"])
        for i, row_rec in enumerate(m.rows):
            row_json = json.dumps(row_rec, sort_keys=True, separators=(",", ":"))
            for j, col_rec in enumerate(m.cols):
                col_json = json.dumps(col_rec, sort_keys=True, separators=(",", ":"))
                writer.writerow([row_json, col_json, repr(float(m.values[i, j]))])


def read_matrix_csv(path) -> RmseMatrix:
    """Inverse of :func:`write_matrix_csv`."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != ["row_meta", "col_meta", "rmse"]:
                raise DataFormatError(f"{path}: not an rmse matrix CSV (header {header})")
            entries = list(reader)
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e

    rows, cols = [], []
    row_index, col_index = {}, {}
    try:
        triples = [(r, c, float(v)) for r, c, v in entries]
    except ValueError as e:
        raise DataFormatError(f"{path}: malformed matrix entry: {e}") from e
    for row_json, col_json, _ in triples:
        if row_json not in row_index:
            row_index[row_json] = len(rows)
            rows.append(json.loads(row_json))
        if col_json not in col_index:
            col_index[col_json] = len(cols)
            cols.append(json.loads(col_json))
    values = np.full((len(rows), len(cols)), np.nan)
    for row_json, col_json, value in triples:
        values[row_index[row_json], col_index[col_json]] = value
    if np.isnan(values).any():
        raise DataFormatError(f"{path}: matrix entries are incomplete")
    return RmseMatrix(rows=rows, cols=cols, values=values)


def write_summaries_csv(summaries: list, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["group", "mean_rmse", "std_rmse", "count"])
        for s in summaries:
            writer.writerow([s.group, repr(float(s.mean_rmse)), repr(float(s.std_rmse)), s.count])


def write_scatter_csv(pairs: list, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["group", "plain_mean_rmse", "neurn_mean_rmse", "below_diagonal"])
        for p in pairs:
            writer.writerow(
                [
                    p["group"],
                    repr(float(p["plain_mean_rmse"])),
                    repr(float(p["neurn_mean_rmse"])),
                    str(p["below_diagonal"]).lower(),
                ]
            )
