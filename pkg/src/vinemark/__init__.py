"""Detection post-processing and evaluation toolkit for single-bud images.

Turns per-pixel bud-probability maps into detected components and scores
them against ground truth along three axes: segmentation quality,
correspondence identification, and localization. Also ships a
sliding-windows baseline detector, a synthetic-scene generator with a
brute-force scoring oracle, and error estimators for downstream plant
variables.
"""

from .agrovars import (
    AreaErrorBreakdown,
    BudCountError,
    PlantAssumptions,
    area_error,
    bud_count_error,
    internode_error,
)
from .errors import (
    EmptyComponentError,
    EmptyTruthError,
    InconsistentConfigError,
    InconsistentInputError,
    InvalidParameterError,
    ManifestError,
    MultipleBudsError,
    OracleSizeError,
    UndefinedCountError,
    VinemarkError,
    WindowTooLargeError,
)
from .harness import (
    DetectorSpec,
    FalseAlarmStats,
    HistogramSpec,
    ImageError,
    ManifestEntry,
    MetricSelection,
    PoolStats,
    ScatterPoint,
    Stat,
    SweepSummary,
    best_per_metric,
    evaluate_detector,
    evaluate_entries,
    evaluate_image,
    histogram,
    histogram_from_values,
    markdown_table,
    read_manifest,
    scatter_csv,
    scatter_data,
    summarize,
)
from .metrics import (
    Category,
    ComponentAssessment,
    DetectionCounts,
    ImageEvaluation,
    assess_component,
    classify_components,
    detection_counts,
    iou_from_precision_recall,
    overlap_area,
)
from .raster import (
    Component,
    GroundTruth,
    binarize,
    centroid,
    connected_components,
    diameter,
    load_mask,
    load_probability_map,
    load_votes,
    read_pgm,
    resize_bilinear,
    write_mask,
    write_pgm,
)
from .swdetect import (
    ConstantClassifier,
    CsvClassifier,
    OracleClassifier,
    PatchGrid,
    build_grid,
    read_patch_labels,
    run_detector,
    threshold_votes,
    vote,
)
from .synth import (
    BudSpec,
    FalseAlarmSpec,
    PerturbationSpec,
    PerturbResult,
    SceneSpec,
    SynthCase,
    generate_case,
    make_truth,
    oracle_metrics,
    perturb,
    rectangle_shift_iou,
)

__version__ = "0.1.0"
