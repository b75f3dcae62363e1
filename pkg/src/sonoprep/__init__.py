"""Ultrasound pre-training data curation toolkit.

Progressive frame screening (structural + semantic dedup), acoustic sector
ROI extraction, and polar/texture-weighted mask-plan sampling, plus a batch
CLI that emits framework-neutral mask-plan files.
"""

from .errors import (
    ConfigError,
    DegeneratePriorError,
    EmbeddingFormatError,
    EmptyRoiError,
    FrameReadError,
    InvalidInputError,
    InvalidMaskRatioError,
    ManifestError,
    SonoprepError,
)
from .imaging import PatchGrid, ResizedImage, UltrasoundFrame, load_frame, patchify, resize_area
from .dedup import (
    DedupEntry,
    DedupReport,
    cosine_similarity,
    dct_feature,
    load_embeddings,
    semantic_screen,
    stub_embedding,
    visual_screen,
    write_embeddings_binary,
    write_embeddings_json,
)
from .region import (
    CoverageGrid,
    PolarGeometry,
    RoiMask,
    detect_roi,
    patch_coverage,
    polar_landmarks,
)
from .masking import (
    MaskingConfig,
    MaskPlan,
    ScoreMaps,
    compute_score_maps,
    hog_distribution,
    hog_scores,
    joint_distribution,
    polar_coords,
    polar_distribution,
    polar_terms,
    reconstruction_loss,
    sample_mask_plan,
    sample_without_replacement,
)
from .pipeline import (
    Manifest,
    ManifestEntry,
    PipelineConfig,
    PipelineSummary,
    build_mask_plan,
    emit_heatmap,
    load_plan_file,
    run_pipeline,
    run_screening,
    verify_plan_dict,
    write_plan_file,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CoverageGrid",
    "DedupEntry",
    "DedupReport",
    "DegeneratePriorError",
    "EmbeddingFormatError",
    "EmptyRoiError",
    "FrameReadError",
    "InvalidInputError",
    "InvalidMaskRatioError",
    "Manifest",
    "ManifestEntry",
    "ManifestError",
    "MaskPlan",
    "MaskingConfig",
    "PatchGrid",
    "PipelineConfig",
    "PipelineSummary",
    "PolarGeometry",
    "ResizedImage",
    "RoiMask",
    "ScoreMaps",
    "SonoprepError",
    "UltrasoundFrame",
    "build_mask_plan",
    "compute_score_maps",
    "cosine_similarity",
    "dct_feature",
    "detect_roi",
    "emit_heatmap",
    "hog_distribution",
    "hog_scores",
    "joint_distribution",
    "load_embeddings",
    "load_frame",
    "load_plan_file",
    "patch_coverage",
    "patchify",
    "polar_coords",
    "polar_distribution",
    "polar_landmarks",
    "polar_terms",
    "reconstruction_loss",
    "resize_area",
    "run_pipeline",
    "run_screening",
    "sample_mask_plan",
    "sample_without_replacement",
    "semantic_screen",
    "stub_embedding",
    "verify_plan_dict",
    "visual_screen",
    "write_embeddings_binary",
    "write_embeddings_json",
    "write_plan_file",
]
