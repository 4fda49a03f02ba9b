"""Error estimators for bud-derived plant variables.

Detection and segmentation quality numbers translate into errors on the
quantities a viticulturist actually measures: how many buds a plant has,
how much area a bud covers, and how long the internode between two buds
is. The formulas here are coarse worst-case propagation, not botanical
models.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParameterError, UndefinedCountError

AREA_ERROR_NOTE = (
    "false-negative pixel rate assumed 0; the summed terms normalize by "
    "bud area (false-alarm term) and by detected-component area "
    "(precision complements), so the total is an approximation"
)


@dataclass(frozen=True)
class PlantAssumptions:
    """Typical plant geometry used to convert rates into per-plant errors."""

    buds_per_plant: float = 240.0
    bud_diameter_mm: float = 5.0
    internode_mm: float = 150.0

    def __post_init__(self):
        if self.buds_per_plant <= 0 or self.bud_diameter_mm <= 0 or self.internode_mm <= 0:
            raise InvalidParameterError(f"plant assumptions must be positive, got {self}")


@dataclass(frozen=True)
class BudCountError:
    """Per-plant bud-count error implied by detection precision and recall."""

    excess: float
    omitted: float

    @property
    def net(self) -> float:
        return self.excess - self.omitted


def bud_count_error(assumptions: PlantAssumptions, p_d: float, r_d: float) -> BudCountError:
    """Expected buds counted in excess and omitted per plant.

    A detector with recall r_d finds N*r_d of the plant's N buds and
    misses the rest; with precision p_d those detections drag along
    N*r_d*(1/p_d - 1) spurious ones. When precision equals recall the
    two errors cancel exactly.
    """
    if p_d == 0.0:
        raise UndefinedCountError("excess count is undefined for a detector with precision 0")
    if not (0.0 < p_d <= 1.0) or not (0.0 < r_d <= 1.0):
        raise InvalidParameterError(f"p_d and r_d must be in (0, 1], got {p_d}, {r_d}")
    detected = assumptions.buds_per_plant * r_d
    return BudCountError(
        excess=detected * (1.0 / p_d - 1.0),
        omitted=assumptions.buds_per_plant * (1.0 - r_d),
    )


@dataclass(frozen=True)
class AreaErrorBreakdown:
    """Spurious-pixel rate decomposed by where the pixels come from.

    ``fa_na_mean`` counts false-alarm area (in units of true bud area);
    the two complements count non-bud pixels inside true positives and
    splits (in units of detected-component area). ``fnx`` is the missed-
    pixel rate, taken as 0. ``note`` records the normalization caveat.
    """

    fa_na_mean: float
    tp_precision_complement: float
    split_precision_complement: float
    fnx: float = 0.0
    note: str = AREA_ERROR_NOTE

    @property
    def fpx(self) -> float:
        return self.fa_na_mean + self.tp_precision_complement + self.split_precision_complement


def area_error(na_mean: float, p_s_tp: float, p_s_split: float) -> AreaErrorBreakdown:
    """Spurious-pixel rate from false-alarm size and segmentation precisions."""
    if na_mean < 0.0:
        raise InvalidParameterError(f"na_mean must be >= 0, got {na_mean}")
    if not (0.0 <= p_s_tp <= 1.0) or not (0.0 <= p_s_split <= 1.0):
        raise InvalidParameterError(f"precisions must be in [0, 1], got {p_s_tp}, {p_s_split}")
    return AreaErrorBreakdown(
        fa_na_mean=na_mean,
        tp_precision_complement=1.0 - p_s_tp,
        split_precision_complement=1.0 - p_s_split,
    )


def internode_error(assumptions: PlantAssumptions, nd_mean: float) -> float:
    """Worst-case relative error of an internode length measured bud to bud.

    Each endpoint can be displaced by nd_mean bud diameters, and in the
    worst case the two displacements point away from each other.
    """
    if nd_mean < 0.0:
        raise InvalidParameterError(f"nd_mean must be >= 0, got {nd_mean}")
    return 2.0 * nd_mean * assumptions.bud_diameter_mm / assumptions.internode_mm
