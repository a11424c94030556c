"""Binding diagnostics for multi-subject image generation."""

from .errors import (
    AggregationError,
    CalibrationError,
    FeatureError,
    GeometryError,
    IngestError,
    MultibindError,
    ValidationError,
)
from .geometry import BBox, BitMask, centroid, mask_iou, mask_overlap_min
from .model import (
    DIMENSIONS,
    Detection,
    Dimension,
    EmbeddingVector,
    FeatureRecord,
    GtSlot,
    HumanLabel,
    InstanceManifest,
    KeypointSet,
    ThresholdTable,
)
from .matching import Assignment, MatchConfig, assign_slots, dedup_detections, filter_detections, match_instance
from .similarity import SimilarityBundle, SimilarityConfig, build_bundle, cosine_sim, oks_sim
from .diagnostics import (
    ContinuousDiagnostics,
    PatternFlags,
    RowOutcome,
    binarize,
    continuous_metrics,
    diagnose,
    image_patterns,
    js_shift,
    subject_outcomes,
)
from .calibration import CalibrationResult, ScoredLabel, calibrate_threshold, collect_scores, roc_auc
from .ingest import builtin_thresholds, load_labels, load_manifest, load_thresholds

__version__ = "0.1.0"
