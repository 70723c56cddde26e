"""Manifold-feature augmentation and EdgeConv point cloud classification in NumPy."""

from .errors import (
    CheckpointError,
    ContractError,
    DataError,
    FormatError,
    InsufficientPointsError,
    InvalidInputError,
    InvalidStateError,
    MissingCacheError,
    NumericalError,
    ParseError,
    PointManifoldError,
    UsageError,
)
from .estimator import PointManifoldClassifier
from .manifold import (
    EmbeddingCache,
    EmbeddingResult,
    FeatureMatrix,
    LleWeights,
    LocallyLinearFeatures,
    PCAFeatures,
    augment_lle,
    lle_embed,
    lle_weights,
    neighborhood_overlap,
    pca_embed,
)
from .neighbors import NeighborGraph, batched_knn, knn
from .network import ArchitectureSpec, PointManifoldNet, build_model, load_checkpoint, save_checkpoint
from .pointset import (
    SHAPE_CLASSES,
    Dataset,
    PointCloud,
    generate_shape,
    load_cloud,
    load_dataset,
    read_manifest,
    save_cloud,
    standardize,
    synthetic_dataset,
    write_manifest,
)
from .projection import Plane, axis_planes, linear_projection_features, project_point, project_points
from .training import MetricsReport, TrainConfig, TrainResult, cosine_lr, evaluate, sgd_momentum_step, train

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "CheckpointError",
    "ContractError",
    "DataError",
    "Dataset",
    "EmbeddingCache",
    "EmbeddingResult",
    "FeatureMatrix",
    "FormatError",
    "InsufficientPointsError",
    "InvalidInputError",
    "InvalidStateError",
    "LleWeights",
    "LocallyLinearFeatures",
    "MetricsReport",
    "MissingCacheError",
    "NeighborGraph",
    "NumericalError",
    "PCAFeatures",
    "ParseError",
    "Plane",
    "PointCloud",
    "PointManifoldClassifier",
    "PointManifoldError",
    "PointManifoldNet",
    "SHAPE_CLASSES",
    "TrainConfig",
    "TrainResult",
    "UsageError",
    "augment_lle",
    "axis_planes",
    "batched_knn",
    "build_model",
    "cosine_lr",
    "evaluate",
    "generate_shape",
    "knn",
    "linear_projection_features",
    "lle_embed",
    "lle_weights",
    "load_checkpoint",
    "load_cloud",
    "load_dataset",
    "neighborhood_overlap",
    "pca_embed",
    "project_point",
    "project_points",
    "read_manifest",
    "save_checkpoint",
    "save_cloud",
    "sgd_momentum_step",
    "standardize",
    "synthetic_dataset",
    "train",
    "write_manifest",
]
