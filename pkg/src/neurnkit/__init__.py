"""NeuRN toolkit: patch-statistics normalization, representation building,
RMSE-based representational similarity, KDE/IoU distribution comparison,
and a desk-scale domain-generalization benchmark."""

from .errors import DataFormatError, NumericError, ToolkitError, UsageError
from .kdeiou import KdeCurve, iou, kde_fit, pool_activations
from .neurn import NeurnConfig, PatchStats, neurn_apply, patch_stats
from .reprs import (
    RepresentationSet,
    StimulusSet,
    TrialTraces,
    build_neural_rep,
    build_neural_reps,
    extract_feature_reps,
    ingest_neuron_dir,
    load_rep_set,
    save_rep_set,
)
from .rsa import GroupSummary, RmseMatrix, aggregate, compare_sets, neurn_scatter, rmse
from .select import ClusterResult, EmbedConfig, embed, kmeans, sample_central
from .tensorio import (
    Image,
    Tensor,
    load_idx,
    load_ntf,
    resize_bilinear,
    save_ntf,
    to_grayscale,
)

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "NumericError",
    "ToolkitError",
    "UsageError",
    "KdeCurve",
    "iou",
    "kde_fit",
    "pool_activations",
    "NeurnConfig",
    "PatchStats",
    "neurn_apply",
    "patch_stats",
    "RepresentationSet",
    "StimulusSet",
    "TrialTraces",
    "build_neural_rep",
    "build_neural_reps",
    "extract_feature_reps",
    "ingest_neuron_dir",
    "load_rep_set",
    "save_rep_set",
    "GroupSummary",
    "RmseMatrix",
    "aggregate",
    "compare_sets",
    "neurn_scatter",
    "rmse",
    "ClusterResult",
    "EmbedConfig",
    "embed",
    "kmeans",
    "sample_central",
    "Image",
    "Tensor",
    "load_idx",
    "load_ntf",
    "resize_bilinear",
    "save_ntf",
    "to_grayscale",
    "__version__",
]
