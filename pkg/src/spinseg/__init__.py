"""Vocabulary-free 3D instance segmentation over geometric superpoints.

Pipeline: oversegment the point cloud into superpoints, score their overlap
with grounded 2D masks across posed frames, combine mask/semantic/spatial
coherence into an affinity matrix, merge superpoints by spectral clustering,
and label the resulting instances against the grounded scene vocabulary.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, SuperpointParams, load_config
from .pcio import (
    Dataset,
    EmbeddingTable,
    FeatureMatrix,
    Frame,
    Mask2D,
    PointCloud,
    load_dataset,
    validate_dataset,
)
from .pipeline import PipelineResult, run_segmentation

__all__ = [
    "Dataset",
    "EmbeddingTable",
    "FeatureMatrix",
    "Frame",
    "Mask2D",
    "PipelineConfig",
    "PipelineResult",
    "PointCloud",
    "SuperpointParams",
    "load_config",
    "load_dataset",
    "run_segmentation",
    "validate_dataset",
]
