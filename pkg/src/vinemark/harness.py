"""Batch evaluation of detectors: sweeps, pooled statistics, and report data.

A detector variant (a probability-map network at some binarization
threshold, or a sliding-windows run at some vote threshold) is evaluated
over a manifest of (prediction, truth) image pairs. Component scores are
pooled across all images of a run, never averaged per image first. The
resulting summaries feed a Markdown table, per-metric winner selection,
and CSV emitters for scatter plots and histograms.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    InvalidParameterError,
    ManifestError,
    VinemarkError,
)
from .metrics import (
    DetectionCounts,
    ImageEvaluation,
    classify_components,
    detection_counts,
)
from .raster import (
    binarize,
    connected_components,
    GroundTruth,
    load_mask,
    load_probability_map,
    load_votes,
)
from .swdetect import MAX_NU, MIN_NU, threshold_votes

FCN = "FCN"
SW = "SW"

MANIFEST_HEADER = ["image_id", "prediction_path", "truth_path"]


def format_threshold(value) -> str:
    """Render a detector threshold the way labels spell it (0.6, or 3 for votes)."""
    if isinstance(value, int):
        return str(value)
    return f"{value:g}"


@dataclass(frozen=True)
class DetectorSpec:
    """One detector variant: family, variant label, threshold, match threshold.

    ``variant`` names the network architecture for the FCN family and the
    window size for the SW family. ``threshold`` is the binarization
    threshold (FCN, in [0, 1]) or the minimum vote count (SW, integer
    1..4). ``alpha`` is the overlap threshold used to score detections.
    """

    family: str
    variant: str
    threshold: float | int
    alpha: float = 0.5

    def __post_init__(self):
        if self.family not in (FCN, SW):
            raise InvalidParameterError(f"family must be {FCN} or {SW}, got {self.family!r}")
        if self.family == FCN:
            if not (0.0 <= float(self.threshold) <= 1.0):
                raise InvalidParameterError(f"{FCN} threshold must be in [0, 1], got {self.threshold}")
        else:
            if not isinstance(self.threshold, int) or not (MIN_NU <= self.threshold <= MAX_NU):
                raise InvalidParameterError(
                    f"{SW} threshold must be an integer in [{MIN_NU}, {MAX_NU}], got {self.threshold!r}"
                )
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidParameterError(f"alpha must be in (0, 1], got {self.alpha}")

    @property
    def label(self) -> str:
        return f"{self.family}_{self.variant}^{format_threshold(self.threshold)}"

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "variant": self.variant,
            "threshold": self.threshold,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorSpec":
        threshold = data["threshold"]
        if data["family"] == SW:
            threshold = int(threshold)
        return cls(
            family=data["family"],
            variant=str(data["variant"]),
            threshold=threshold,
            alpha=float(data.get("alpha", 0.5)),
        )


@dataclass(frozen=True)
class Stat:
    """Mean and sample standard deviation of a pool of values.

    ``mean`` is None for an empty pool; ``std`` is None whenever the pool
    has fewer than two values. ``n`` is None only for keyed-in summaries
    whose pool sizes are unknown.
    """

    mean: float | None
    std: float | None
    n: int | None

    @classmethod
    def from_values(cls, values: list[float]) -> "Stat":
        n = len(values)
        if n == 0:
            return cls(mean=None, std=None, n=0)
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if n >= 2 else None
        return cls(mean=mean, std=std, n=n)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}

    @classmethod
    def from_dict(cls, data: dict) -> "Stat":
        return cls(mean=data.get("mean"), std=data.get("std"), n=data.get("n"))


@dataclass(frozen=True)
class PoolStats:
    """Pixel-score statistics over one category's component pool."""

    precision: Stat
    recall: Stat
    iou: Stat

    def to_dict(self) -> dict:
        return {"precision": self.precision.to_dict(), "recall": self.recall.to_dict(), "iou": self.iou.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "PoolStats":
        return cls(
            precision=Stat.from_dict(data["precision"]),
            recall=Stat.from_dict(data["recall"]),
            iou=Stat.from_dict(data["iou"]),
        )


@dataclass(frozen=True)
class FalseAlarmStats:
    """Size and distance statistics over the false-alarm component pool."""

    na: Stat
    nd: Stat

    def to_dict(self) -> dict:
        return {"na": self.na.to_dict(), "nd": self.nd.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "FalseAlarmStats":
        return cls(na=Stat.from_dict(data["na"]), nd=Stat.from_dict(data["nd"]))


@dataclass(frozen=True)
class ImageError:
    """One image that could not be evaluated, and why."""

    image_id: str
    message: str


@dataclass(frozen=True)
class SweepSummary:
    """Everything reported about one detector variant over one dataset.

    Detection rates are stored as fractions. ``counts`` carries the raw
    tallies for computed summaries and is None for summaries keyed in
    from an external report that only states the rates. Segmentation
    stats pool true-positive and split components across all images;
    ``fa_stats`` pools normalized area and distance over false alarms.
    """

    spec: DetectorSpec
    n_images: int
    p_d: float
    r_d: float
    f1: float
    images_with_splits: int
    split_count: int | None
    fa_count: int | None
    tp_stats: PoolStats
    split_stats: PoolStats
    fa_stats: FalseAlarmStats
    counts: DetectionCounts | None
    errors: tuple[ImageError, ...] = ()

    @property
    def label(self) -> str:
        return self.spec.label

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "label": self.label,
            "n_images": self.n_images,
            "p_d": self.p_d,
            "r_d": self.r_d,
            "f1": self.f1,
            "images_with_splits": self.images_with_splits,
            "split_count": self.split_count,
            "fa_count": self.fa_count,
            "counts": None
            if self.counts is None
            else {
                "true_positives": self.counts.true_positives,
                "splits": self.counts.splits,
                "false_alarms": self.counts.false_alarms,
                "misses": self.counts.misses,
                "n_images": self.counts.n_images,
            },
            "tp": self.tp_stats.to_dict(),
            "split": self.split_stats.to_dict(),
            "fa": self.fa_stats.to_dict(),
            "errors": [{"image_id": e.image_id, "message": e.message} for e in self.errors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSummary":
        counts = data.get("counts")
        return cls(
            spec=DetectorSpec.from_dict(data["spec"]),
            n_images=int(data["n_images"]),
            p_d=float(data["p_d"]),
            r_d=float(data["r_d"]),
            f1=float(data["f1"]),
            images_with_splits=int(data["images_with_splits"]),
            split_count=None if data.get("split_count") is None else int(data["split_count"]),
            fa_count=None if data.get("fa_count") is None else int(data["fa_count"]),
            tp_stats=PoolStats.from_dict(data["tp"]),
            split_stats=PoolStats.from_dict(data["split"]),
            fa_stats=FalseAlarmStats.from_dict(data["fa"]),
            counts=None
            if counts is None
            else DetectionCounts(
                true_positives=int(counts["true_positives"]),
                splits=int(counts["splits"]),
                false_alarms=int(counts["false_alarms"]),
                misses=int(counts["misses"]),
                n_images=int(counts["n_images"]),
            ),
            errors=tuple(ImageError(e["image_id"], e["message"]) for e in data.get("errors", [])),
        )


# ---------------------------------------------------------------------------
# Manifest reading and per-image evaluation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset row: an image id plus its prediction and truth files."""

    image_id: str
    prediction_path: str
    truth_path: str


def read_manifest(path) -> list[ManifestEntry]:
    """Read a dataset manifest: CSV with header image_id,prediction_path,truth_path.

    Relative paths are resolved against the manifest's directory.
    """
    base = Path(path).parent
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ManifestError(f"{path}: expected header {','.join(MANIFEST_HEADER)}, got {header}")
        entries = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            image_id, pred, truth = (f.strip() for f in fields)
            if not image_id or not pred or not truth:
                raise ManifestError(f"{path}:{lineno}: empty field")
            entries.append(
                ManifestEntry(
                    image_id=image_id,
                    prediction_path=str((base / pred).resolve()) if not Path(pred).is_absolute() else pred,
                    truth_path=str((base / truth).resolve()) if not Path(truth).is_absolute() else truth,
                )
            )
    if not entries:
        raise ManifestError(f"{path}: manifest has no data rows")
    return entries


def evaluate_image(entry: ManifestEntry, spec: DetectorSpec, connectivity: int = 8) -> ImageEvaluation:
    """Load, binarize, and score one image pair for one detector variant."""
    truth_mask = load_mask(entry.truth_path)
    truth = GroundTruth.from_mask(truth_mask, connectivity=connectivity)
    if spec.family == FCN:
        prediction = binarize(load_probability_map(entry.prediction_path), float(spec.threshold))
    else:
        prediction = threshold_votes(load_votes(entry.prediction_path), int(spec.threshold))
    if prediction.shape != truth_mask.shape:
        raise InvalidParameterError(
            f"prediction shape {prediction.shape} does not match truth shape {truth_mask.shape}"
        )
    components = connected_components(prediction, connectivity=connectivity)
    return classify_components(components, truth, alpha=spec.alpha, image_id=entry.image_id)


def _evaluate_entry_task(args) -> tuple[int, ImageEvaluation | None, str | None]:
    index, entry, spec, connectivity = args
    try:
        return index, evaluate_image(entry, spec, connectivity), None
    except (VinemarkError, OSError, ValueError) as exc:
        return index, None, str(exc)


def evaluate_entries(
    spec: DetectorSpec,
    entries: list[ManifestEntry],
    connectivity: int = 8,
    jobs: int = 1,
) -> tuple[list[ImageEvaluation], list[ImageError]]:
    """Evaluate every manifest row; unreadable rows become error records."""
    tasks = [(i, entry, spec, connectivity) for i, entry in enumerate(entries)]
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_entry_task, tasks))
    else:
        results = [_evaluate_entry_task(t) for t in tasks]
    evaluations = []
    errors = []
    for index, evaluation, message in results:
        if evaluation is not None:
            evaluations.append(evaluation)
        else:
            errors.append(ImageError(image_id=entries[index].image_id, message=message))
    return evaluations, errors


def summarize(
    spec: DetectorSpec,
    evaluations: list[ImageEvaluation],
    errors: list[ImageError] = (),
) -> SweepSummary:
    """Pool per-image evaluations into one detector summary."""
    counts = detection_counts(evaluations)
    tp_p, tp_r, tp_i = [], [], []
    sp_p, sp_r, sp_i = [], [], []
    fa_na, fa_nd = [], []
    for evaluation in evaluations:
        for a in evaluation.true_positives:
            tp_p.append(a.precision)
            tp_r.append(a.recall)
            tp_i.append(a.iou)
        for a in evaluation.splits:
            sp_p.append(a.precision)
            sp_r.append(a.recall)
            sp_i.append(a.iou)
        for a in evaluation.false_alarms:
            fa_na.append(a.normalized_area)
            fa_nd.append(a.normalized_distance)
    return SweepSummary(
        spec=spec,
        n_images=len(evaluations),
        p_d=counts.precision,
        r_d=counts.recall,
        f1=counts.f1,
        images_with_splits=sum(1 for e in evaluations if e.splits),
        split_count=counts.splits,
        fa_count=counts.false_alarms,
        tp_stats=PoolStats(Stat.from_values(tp_p), Stat.from_values(tp_r), Stat.from_values(tp_i)),
        split_stats=PoolStats(Stat.from_values(sp_p), Stat.from_values(sp_r), Stat.from_values(sp_i)),
        fa_stats=FalseAlarmStats(Stat.from_values(fa_na), Stat.from_values(fa_nd)),
        counts=counts,
        errors=tuple(errors),
    )


def evaluate_detector(
    spec: DetectorSpec,
    manifest_path,
    connectivity: int = 8,
    jobs: int = 1,
) -> SweepSummary:
    """Evaluate one detector variant over a whole manifest."""
    entries = read_manifest(manifest_path)
    evaluations, errors = evaluate_entries(spec, entries, connectivity=connectivity, jobs=jobs)
    return summarize(spec, evaluations, errors)


# ---------------------------------------------------------------------------
# Winner selection, Markdown table, scatter and histogram emitters.
# ---------------------------------------------------------------------------


def _round_or_none(value: float | None, digits: int) -> float | None:
    return None if value is None else round(value, digits)


# Column catalog: key, header, better direction, and the value compared for
# winner selection (rounded to the precision the table displays).
_PERCENT = lambda v: None if v is None else round(v * 100.0, 1)  # noqa: E731


def _column_value(summary: SweepSummary, key: str) -> float | None:
    if key == "p_d":
        return _PERCENT(summary.p_d)
    if key == "r_d":
        return _PERCENT(summary.r_d)
    if key == "f1":
        return _PERCENT(summary.f1)
    if key == "s":
        return float(summary.images_with_splits)
    if key == "tp_precision":
        return _PERCENT(summary.tp_stats.precision.mean)
    if key == "tp_recall":
        return _PERCENT(summary.tp_stats.recall.mean)
    if key == "tp_iou":
        return _PERCENT(summary.tp_stats.iou.mean)
    if key == "split_precision":
        return _PERCENT(summary.split_stats.precision.mean)
    if key == "split_recall":
        return _PERCENT(summary.split_stats.recall.mean)
    if key == "split_iou":
        return _PERCENT(summary.split_stats.iou.mean)
    if key == "na":
        return _round_or_none(summary.fa_stats.na.mean, 2)
    if key == "nd":
        return _round_or_none(summary.fa_stats.nd.mean, 2)
    raise InvalidParameterError(f"unknown metric {key!r}")


COLUMNS: tuple[tuple[str, str, str], ...] = (
    ("p_d", "P_D", "max"),
    ("r_d", "R_D", "max"),
    ("f1", "F1", "max"),
    ("s", "S", "min"),
    ("tp_precision", "P_S^TP", "max"),
    ("tp_recall", "R_S^TP", "max"),
    ("tp_iou", "IoU^TP", "max"),
    ("split_precision", "P_S^S", "max"),
    ("split_recall", "R_S^S", "max"),
    ("split_iou", "IoU^S", "max"),
    ("na", "NA", "min"),
    ("nd", "ND", "min"),
)

METRIC_KEYS = tuple(key for key, _, _ in COLUMNS)


@dataclass(frozen=True)
class MetricSelection:
    """Winning detector labels for one metric: per family and overall.

    Ties are all flagged. Winners compare the values as displayed (one
    decimal for percentages, two for size and distance), so detectors
    indistinguishable in the table tie.
    """

    metric: str
    direction: str
    per_family: dict[str, tuple[str, ...]]
    overall: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "direction": self.direction,
            "per_family": {k: list(v) for k, v in sorted(self.per_family.items())},
            "overall": list(self.overall),
        }


def _winners(candidates: list[tuple[str, float]], direction: str) -> tuple[str, ...]:
    if not candidates:
        return ()
    best = min(v for _, v in candidates) if direction == "min" else max(v for _, v in candidates)
    return tuple(sorted(label for label, v in candidates if v == best))


def best_per_metric(summaries: list[SweepSummary]) -> list[MetricSelection]:
    """Flag, per metric, the best detector within each family and overall."""
    if not summaries:
        raise InvalidParameterError("best_per_metric needs at least one summary")
    selections = []
    for key, _, direction in COLUMNS:
        scored = [(s.label, _column_value(s, key)) for s in summaries]
        scored = [(label, v) for label, v in scored if v is not None]
        families: dict[str, list[tuple[str, float]]] = {}
        for summary in summaries:
            value = _column_value(summary, key)
            if value is not None:
                families.setdefault(summary.spec.family, []).append((summary.label, value))
        selections.append(
            MetricSelection(
                metric=key,
                direction=direction,
                per_family={family: _winners(rows, direction) for family, rows in families.items()},
                overall=_winners(scored, direction),
            )
        )
    return selections


def _format_stat(stat: Stat, percent: bool) -> str:
    if stat.mean is None:
        # An empty pool: the table convention is a zero score for the
        # percentage columns and a dash for size and distance.
        return "0.0(--)" if percent else "--"
    if percent:
        mean = f"{stat.mean * 100.0:.1f}"
        std = "--" if stat.std is None else f"{stat.std * 100.0:.1f}"
    else:
        mean = f"{stat.mean:.2f}"
        std = "--" if stat.std is None else f"{stat.std:.2f}"
    return f"{mean}({std})"


def _cell_text(summary: SweepSummary, key: str) -> str:
    if key in ("p_d", "r_d", "f1"):
        return f"{getattr(summary, key) * 100.0:.1f}"
    if key == "s":
        return str(summary.images_with_splits)
    if key == "tp_precision":
        return _format_stat(summary.tp_stats.precision, percent=True)
    if key == "tp_recall":
        return _format_stat(summary.tp_stats.recall, percent=True)
    if key == "tp_iou":
        return _format_stat(summary.tp_stats.iou, percent=True)
    if key == "split_precision":
        return _format_stat(summary.split_stats.precision, percent=True)
    if key == "split_recall":
        return _format_stat(summary.split_stats.recall, percent=True)
    if key == "split_iou":
        return _format_stat(summary.split_stats.iou, percent=True)
    if key == "na":
        return _format_stat(summary.fa_stats.na, percent=False)
    if key == "nd":
        return _format_stat(summary.fa_stats.nd, percent=False)
    raise InvalidParameterError(f"unknown metric {key!r}")


def markdown_table(summaries: list[SweepSummary], selections: list[MetricSelection] | None = None) -> str:
    """Render summaries as a Markdown table with winners marked.

    Family winners are bold; the overall winner of a column is bold
    italic. Percentages show one decimal; size and distance two.
    """
    if selections is None and summaries:
        selections = best_per_metric(summaries)
    by_metric = {sel.metric: sel for sel in (selections or [])}
    lines = ["| Detector | " + " | ".join(header for _, header, _ in COLUMNS) + " |"]
    lines.append("|" + " --- |" * (len(COLUMNS) + 1))
    for summary in summaries:
        cells = [summary.label]
        for key, _, _ in COLUMNS:
            text = _cell_text(summary, key)
            sel = by_metric.get(key)
            if sel is not None:
                if summary.label in sel.overall:
                    text = f"**_{text}_**"
                elif summary.label in sel.per_family.get(summary.spec.family, ()):
                    text = f"**{text}**"
            cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


SCATTER_KINDS = ("detection-pr", "seg-pr-tp", "seg-pr-split")


@dataclass(frozen=True)
class ScatterPoint:
    """One detector's dot: x is a recall, y is a precision."""

    family: str
    label: str
    x: float | None
    y: float | None
    x_std: float | None
    y_std: float | None


def scatter_data(summaries: list[SweepSummary], which: str) -> list[ScatterPoint]:
    """Plot-ready points: detection rates, or pooled pixel scores with spreads."""
    if which not in SCATTER_KINDS:
        raise InvalidParameterError(f"scatter kind must be one of {SCATTER_KINDS}, got {which!r}")
    points = []
    for summary in summaries:
        if which == "detection-pr":
            points.append(ScatterPoint(summary.spec.family, summary.label, summary.r_d, summary.p_d, None, None))
        else:
            pool = summary.tp_stats if which == "seg-pr-tp" else summary.split_stats
            points.append(
                ScatterPoint(
                    summary.spec.family,
                    summary.label,
                    pool.recall.mean,
                    pool.precision.mean,
                    pool.recall.std,
                    pool.precision.std,
                )
            )
    return points


def scatter_csv(points: list[ScatterPoint]) -> str:
    """Serialize scatter points; undefined values are left blank."""
    out = ["family,label,x,y,x_std,y_std"]
    for p in points:
        fields = [p.family, p.label] + ["" if v is None else repr(float(v)) for v in (p.x, p.y, p.x_std, p.y_std)]
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class HistogramBin:
    """One unit interval [lo, lo+1) and the fraction of detectors inside it."""

    lo: int
    proportion: float


@dataclass(frozen=True)
class HistogramSpec:
    """Unit-bin histogram over detectors' pooled means.

    Bins run contiguously from [0, 1) through the interval holding the
    largest value, empty bins included, so proportions sum to 1 whenever
    any detector contributed a value.
    """

    bin_width: float
    bins: tuple[HistogramBin, ...]
    n_values: int

    def proportions(self) -> list[float]:
        return [b.proportion for b in self.bins]


def histogram_from_values(values: list[float]) -> HistogramSpec:
    defined = [v for v in values if v is not None]
    if any(v < 0 for v in defined):
        raise InvalidParameterError("histogram values must be nonnegative")
    if not defined:
        return HistogramSpec(bin_width=1.0, bins=(), n_values=0)
    top = int(math.floor(max(defined)))
    counts = [0] * (top + 1)
    for v in defined:
        counts[min(int(math.floor(v)), top)] += 1
    n = len(defined)
    return HistogramSpec(
        bin_width=1.0,
        bins=tuple(HistogramBin(lo=k, proportion=c / n) for k, c in enumerate(counts)),
        n_values=n,
    )


def histogram(summaries: list[SweepSummary], metric: str) -> HistogramSpec:
    """Distribution of detectors by pooled false-alarm size or distance."""
    if metric == "na":
        values = [s.fa_stats.na.mean for s in summaries]
    elif metric == "nd":
        values = [s.fa_stats.nd.mean for s in summaries]
    else:
        raise InvalidParameterError(f"histogram metric must be na or nd, got {metric!r}")
    return histogram_from_values(values)


def histogram_csv(spec: HistogramSpec) -> str:
    """Serialize a histogram as bin_lo,bin_hi,proportion rows."""
    out = ["bin_lo,bin_hi,proportion"]
    for b in spec.bins:
        out.append(f"{b.lo},{b.lo + 1},{b.proportion!r}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON round-trip for summary lists.
# ---------------------------------------------------------------------------


def dump_summaries(summaries: list[SweepSummary]) -> str:
    """Serialize summaries deterministically (stable key order, full precision)."""
    return json.dumps([s.to_dict() for s in summaries], sort_keys=True, indent=2) + "\n"


def load_summaries(text: str) -> list[SweepSummary]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise InvalidParameterError("summaries JSON must be a list")
    return [SweepSummary.from_dict(item) for item in data]
