"""Per-component scoring and detection bookkeeping for single-bud images.

Each detected component is scored against the image's one true bud and
sorted into a category by overlap: a true positive covers the bud well
enough, a split overlaps it insufficiently, and a false alarm misses it
entirely. Counts pooled over many images yield detection precision,
recall, and F1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentConfigError, InconsistentInputError
from .raster import Component, GroundTruth, euclidean

DEFAULT_ALPHA = 0.5


class Category(enum.Enum):
    """Detection category of one component relative to the true bud."""

    TRUE_POSITIVE = "true_positive"
    SPLIT = "split"
    FALSE_ALARM = "false_alarm"


def overlap_area(component: Component, truth: GroundTruth) -> int:
    """Number of pixels shared by a component and the true bud."""
    h, w = truth.mask.shape
    min_r, min_c, max_r, max_c = component.bbox
    if min_r < 0 or min_c < 0 or max_r >= h or max_c >= w:
        raise InconsistentInputError(
            f"component bbox {component.bbox} exceeds truth mask shape {truth.mask.shape}"
        )
    rows = component.pixels[:, 0]
    cols = component.pixels[:, 1]
    return int(truth.mask[rows, cols].sum())


def iou_from_precision_recall(precision: float, recall: float) -> float:
    """Intersection-over-union implied by a component's precision and recall.

    For sets, |c∩t| / |c∪t| equals p*r / (p + r - p*r); both 0 when the
    overlap is empty.
    """
    if precision == 0.0 or recall == 0.0:
        return 0.0
    return precision * recall / (precision + recall - precision * recall)


@dataclass(frozen=True)
class ComponentAssessment:
    """Scores for one detected component against the image's true bud.

    ``precision`` is the fraction of the component inside the bud,
    ``recall`` the fraction of the bud covered by the component, and
    ``iou`` their intersection-over-union. ``normalized_area`` is the
    component's area over the bud's area; ``normalized_distance`` is the
    centroid distance over the bud's diameter (over 1.0 if the bud is a
    single pixel).
    """

    component_id: int
    category: Category
    area: int
    centroid: tuple[float, float]
    overlap: int
    precision: float
    recall: float
    iou: float
    normalized_area: float
    normalized_distance: float


@dataclass(frozen=True)
class ImageEvaluation:
    """All component assessments for one image at one overlap threshold."""

    image_id: str
    alpha: float
    assessments: tuple[ComponentAssessment, ...]
    truth_area: int
    truth_diameter: float
    truth_centroid: tuple[float, float]
    degenerate_diameter: bool

    @property
    def true_positives(self) -> tuple[ComponentAssessment, ...]:
        return tuple(a for a in self.assessments if a.category is Category.TRUE_POSITIVE)

    @property
    def splits(self) -> tuple[ComponentAssessment, ...]:
        return tuple(a for a in self.assessments if a.category is Category.SPLIT)

    @property
    def false_alarms(self) -> tuple[ComponentAssessment, ...]:
        return tuple(a for a in self.assessments if a.category is Category.FALSE_ALARM)

    @property
    def missed(self) -> bool:
        """True when no component qualifies as a true positive."""
        return not self.true_positives


def assess_component(component: Component, truth: GroundTruth, alpha: float) -> ComponentAssessment:
    """Score one component against the true bud and assign its category."""
    if not (0.0 < alpha <= 1.0):
        raise InconsistentConfigError(f"alpha must be in (0, 1], got {alpha}")
    inter = overlap_area(component, truth)
    precision = inter / component.area
    recall = inter / truth.area
    union = component.area + truth.area - inter
    iou = inter / union
    if iou >= alpha:
        category = Category.TRUE_POSITIVE
    elif iou > 0.0:
        category = Category.SPLIT
    else:
        category = Category.FALSE_ALARM
    denom = truth.diameter if truth.diameter > 0.0 else 1.0
    return ComponentAssessment(
        component_id=component.id,
        category=category,
        area=component.area,
        centroid=component.centroid,
        overlap=inter,
        precision=precision,
        recall=recall,
        iou=iou,
        normalized_area=component.area / truth.area,
        normalized_distance=euclidean(component.centroid, truth.centroid) / denom,
    )


def classify_components(
    components: list[Component],
    truth: GroundTruth,
    alpha: float = DEFAULT_ALPHA,
    image_id: str = "",
) -> ImageEvaluation:
    """Assess every detected component of one image against its true bud."""
    assessments = tuple(assess_component(c, truth, alpha) for c in components)
    return ImageEvaluation(
        image_id=image_id,
        alpha=alpha,
        assessments=assessments,
        truth_area=truth.area,
        truth_diameter=truth.diameter,
        truth_centroid=truth.centroid,
        degenerate_diameter=truth.degenerate_diameter,
    )


@dataclass(frozen=True)
class DetectionCounts:
    """Detection tallies pooled over a set of single-bud images.

    ``false_positives`` counts both splits and false alarms; ``misses``
    counts images whose bud attracted no true positive.
    """

    true_positives: int
    splits: int
    false_alarms: int
    misses: int
    n_images: int

    @property
    def false_positives(self) -> int:
        return self.splits + self.false_alarms

    @property
    def precision(self) -> float:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.true_positives + self.misses
        return self.true_positives / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


def detection_counts(evaluations: list[ImageEvaluation]) -> DetectionCounts:
    """Pool per-image assessments into detection tallies.

    All evaluations must share the same overlap threshold; mixing
    thresholds silently skews the counts, so it is an error.
    """
    alphas = {e.alpha for e in evaluations}
    if len(alphas) > 1:
        raise InconsistentConfigError(f"evaluations mix overlap thresholds {sorted(alphas)}")
    tp = sum(len(e.true_positives) for e in evaluations)
    splits = sum(len(e.splits) for e in evaluations)
    fa = sum(len(e.false_alarms) for e in evaluations)
    fn = sum(1 for e in evaluations if e.missed)
    return DetectionCounts(
        true_positives=tp,
        splits=splits,
        false_alarms=fa,
        misses=fn,
        n_images=len(evaluations),
    )
