"""Synthetic single-bud scenes, controlled detection defects, and a naive oracle.

Scenes place one bud of known geometry in an empty image. Perturbations
turn the true mask into a plausible detector output with known defects:
a shift, a dilation or erosion, a split into pieces, and disjoint false
alarms at controlled distance and size. The oracle re-derives every score
by exhaustive pixel-set arithmetic so the fast implementations can be
checked against it on thousands of generated cases.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyTruthError,
    InvalidParameterError,
    MultipleBudsError,
    OracleSizeError,
)
from .metrics import Category, ComponentAssessment, ImageEvaluation
from .raster import GroundTruth, validate_mask

ORACLE_MAX_DIM = 128

SHAPES = ("disk", "ellipse", "rectangle")


@dataclass(frozen=True)
class BudSpec:
    """Geometry of one synthetic bud.

    A pixel belongs to the bud iff its center falls inside the shape:
    within ``radius`` of the center for a disk, inside the axis-aligned
    ellipse with row semi-axis ``radius`` and column semi-axis
    ``radius * aspect``, or inside the rectangle with half-extents
    ``radius`` (rows) and round(radius * aspect) (columns).
    """

    center: tuple[int, int]
    radius: int
    shape: str = "disk"
    aspect: float = 1.0


@dataclass(frozen=True)
class SceneSpec:
    """One synthetic image: dimensions plus its single bud."""

    width: int
    height: int
    bud: BudSpec
    rng_seed: int = 0


@dataclass(frozen=True)
class FalseAlarmSpec:
    """A spurious square component: where (in bud diameters) and how big (in bud areas)."""

    offset_diameters: float
    area_fraction: float


@dataclass(frozen=True)
class PerturbationSpec:
    """Defects applied to a true mask to fake a detector output.

    ``shift`` moves the bud; ``dilate_or_erode`` grows (positive) or
    shrinks (negative) it by that many steps; ``split_into`` cuts it into
    vertical pieces by clearing separator columns; ``false_alarms`` adds
    disjoint squares far from the bud.
    """

    shift: tuple[int, int] = (0, 0)
    dilate_or_erode: int = 0
    split_into: int = 1
    false_alarms: tuple[FalseAlarmSpec, ...] = ()


@dataclass(frozen=True)
class ExpectedFalseAlarm:
    """Exact scores of one placed false alarm, known at construction time."""

    normalized_area: float
    normalized_distance: float


@dataclass(frozen=True)
class PerturbResult:
    """A perturbed mask plus whatever scores are known analytically.

    ``main_iou`` is the exact overlap score of the displaced bud when a
    closed form exists (identity, or a pure shift of a rectangle); None
    otherwise. Placed false alarms never overlap the bud, so each carries
    exact normalized area and distance with an implied overlap of zero.
    """

    mask: np.ndarray
    main_iou: float | None
    false_alarms: tuple[ExpectedFalseAlarm, ...]

    def expected_main_category(self, alpha: float) -> Category | None:
        if self.main_iou is None:
            return None
        if self.main_iou >= alpha:
            return Category.TRUE_POSITIVE
        if self.main_iou > 0.0:
            return Category.SPLIT
        return Category.FALSE_ALARM


def _half_extents(bud: BudSpec) -> tuple[int, int]:
    if bud.shape == "disk":
        return bud.radius, bud.radius
    if bud.shape == "ellipse":
        return bud.radius, int(math.floor(bud.radius * bud.aspect + 1e-9))
    if bud.shape == "rectangle":
        return bud.radius, int(round(bud.radius * bud.aspect))
    raise InvalidParameterError(f"unknown bud shape {bud.shape!r}")


def rectangle_shift_iou(width: int, height: int, shift: tuple[int, int]) -> float:
    """Exact overlap score of a width x height rectangle against its shifted copy."""
    dr, dc = abs(shift[0]), abs(shift[1])
    if dr >= height or dc >= width:
        return 0.0
    inter = (height - dr) * (width - dc)
    return inter / (2 * width * height - inter)


def make_truth(spec: SceneSpec) -> GroundTruth:
    """Rasterize the scene's bud into a ground-truth mask."""
    if spec.width < 1 or spec.height < 1:
        raise InvalidParameterError(f"scene dimensions must be >= 1, got {spec.width}x{spec.height}")
    bud = spec.bud
    if bud.radius < 1:
        raise InvalidParameterError(f"bud radius must be >= 1, got {bud.radius}")
    if bud.aspect <= 0.0:
        raise InvalidParameterError(f"bud aspect must be > 0, got {bud.aspect}")
    cr, cc = bud.center
    hr, hc = _half_extents(bud)
    if cr - hr < 0 or cc - hc < 0 or cr + hr >= spec.height or cc + hc >= spec.width:
        raise InvalidParameterError(f"bud {bud} does not fit inside {spec.width}x{spec.height}")
    rows = np.arange(spec.height)[:, None] - cr
    cols = np.arange(spec.width)[None, :] - cc
    if bud.shape == "disk":
        mask = rows * rows + cols * cols <= bud.radius * bud.radius
    elif bud.shape == "ellipse":
        mask = (rows / bud.radius) ** 2 + (cols / (bud.radius * bud.aspect)) ** 2 <= 1.0
    else:
        mask = (np.abs(rows) <= hr) & (np.abs(cols) <= hc)
    return GroundTruth.from_mask(mask)


def _place_false_alarm(
    working: np.ndarray,
    truth: GroundTruth,
    spec: FalseAlarmSpec,
) -> tuple[np.ndarray, ExpectedFalseAlarm]:
    if spec.area_fraction <= 0.0:
        raise InvalidParameterError(f"area_fraction must be > 0, got {spec.area_fraction}")
    if spec.offset_diameters <= 0.0:
        raise InvalidParameterError(f"offset_diameters must be > 0, got {spec.offset_diameters}")
    h, w = working.shape
    side = max(1, int(round(math.sqrt(spec.area_fraction * truth.area))))
    denom = truth.diameter if truth.diameter > 0.0 else 1.0
    reach = spec.offset_diameters * denom
    half = (side - 1) / 2.0
    for step in range(16):
        theta = step * (2.0 * math.pi / 16.0)
        center_r = truth.centroid[0] + reach * math.sin(theta)
        center_c = truth.centroid[1] + reach * math.cos(theta)
        r0 = int(round(center_r - half))
        c0 = int(round(center_c - half))
        if r0 < 0 or c0 < 0 or r0 + side > h or c0 + side > w:
            continue
        block = (slice(r0, r0 + side), slice(c0, c0 + side))
        if truth.mask[block].any():
            continue
        # Leave a one-pixel moat so the square stays its own component.
        moat = (slice(max(r0 - 1, 0), min(r0 + side + 1, h)), slice(max(c0 - 1, 0), min(c0 + side + 1, w)))
        if working[moat].any():
            continue
        placed = working.copy()
        placed[block] = True
        actual = math.dist((r0 + half, c0 + half), truth.centroid)
        expected = ExpectedFalseAlarm(
            normalized_area=side * side / truth.area,
            normalized_distance=actual / denom,
        )
        return placed, expected
    raise InvalidParameterError(f"false alarm {spec} does not fit in the scene")


def perturb(truth: GroundTruth, p: PerturbationSpec) -> PerturbResult:
    """Apply the spec's defects to the true mask and report known scores."""
    if p.split_into < 1:
        raise InvalidParameterError(f"split_into must be >= 1, got {p.split_into}")
    h, w = truth.mask.shape
    dr, dc = p.shift
    rows, cols = np.nonzero(truth.mask)
    nr, nc = rows + dr, cols + dc
    if nr.min() < 0 or nc.min() < 0 or nr.max() >= h or nc.max() >= w:
        raise InvalidParameterError(f"shift {p.shift} pushes the bud out of bounds")
    working = np.zeros_like(truth.mask)
    working[nr, nc] = True

    if p.dilate_or_erode > 0:
        working = ndimage.binary_dilation(working, iterations=p.dilate_or_erode)
    elif p.dilate_or_erode < 0:
        working = ndimage.binary_erosion(working, iterations=-p.dilate_or_erode)

    if p.split_into > 1 and working.any():
        wr, wc = np.nonzero(working)
        span = wc.max() - wc.min() + 1
        if span < 2 * p.split_into - 1:
            raise InvalidParameterError(
                f"cannot split a {span}-column bud into {p.split_into} pieces"
            )
        for i in range(1, p.split_into):
            working[:, wc.min() + round(i * span / p.split_into)] = False

    pure_shift = p.dilate_or_erode == 0 and p.split_into == 1
    main_iou = None
    if pure_shift and (dr, dc) == (0, 0):
        main_iou = 1.0
    elif pure_shift and truth.mask[rows.min() : rows.max() + 1, cols.min() : cols.max() + 1].all():
        main_iou = rectangle_shift_iou(cols.max() - cols.min() + 1, rows.max() - rows.min() + 1, p.shift)

    expected = []
    for fa in p.false_alarms:
        working, exp = _place_false_alarm(working, truth, fa)
        expected.append(exp)
    return PerturbResult(mask=working, main_iou=main_iou, false_alarms=tuple(expected))


# ---------------------------------------------------------------------------
# Brute-force oracle: everything by explicit pixel sets, no shared code paths.
# ---------------------------------------------------------------------------


def _neighbors(connectivity: int) -> tuple[tuple[int, int], ...]:
    if connectivity == 4:
        return ((-1, 0), (1, 0), (0, -1), (0, 1))
    if connectivity == 8:
        return ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    raise InvalidParameterError(f"connectivity must be 4 or 8, got {connectivity}")


def _flood_components(pixels: set[tuple[int, int]], connectivity: int) -> list[set[tuple[int, int]]]:
    offsets = _neighbors(connectivity)
    remaining = set(pixels)
    groups = []
    for seed in sorted(pixels):
        if seed not in remaining:
            continue
        group = {seed}
        remaining.discard(seed)
        stack = [seed]
        while stack:
            r, c = stack.pop()
            for dr, dc in offsets:
                nb = (r + dr, c + dc)
                if nb in remaining:
                    remaining.discard(nb)
                    group.add(nb)
                    stack.append(nb)
        groups.append(group)
    groups.sort(key=lambda g: (min(r for r, _ in g), min(c for _, c in g),
                               max(r for r, _ in g), max(c for _, c in g), min(g)))
    return groups


def _set_centroid(pixels: set[tuple[int, int]]) -> tuple[float, float]:
    n = len(pixels)
    return (sum(r for r, _ in pixels) / n, sum(c for _, c in pixels) / n)


def _set_diameter(pixels: set[tuple[int, int]]) -> float:
    if len(pixels) < 2:
        return 0.0
    best = 0
    for (r1, c1), (r2, c2) in itertools.combinations(pixels, 2):
        d = (r1 - r2) ** 2 + (c1 - c2) ** 2
        if d > best:
            best = d
    return math.sqrt(best)


def oracle_metrics(
    prediction_mask: np.ndarray,
    truth_mask: np.ndarray,
    alpha: float,
    connectivity: int = 8,
    image_id: str = "",
) -> ImageEvaluation:
    """Score a predicted mask the slow way: flood fill and set arithmetic.

    Deliberately naive and capped at 128x128 so it stays an independent
    check on the array implementations rather than a usable code path.
    """
    pred = validate_mask(prediction_mask)
    tr = validate_mask(truth_mask)
    if pred.shape != tr.shape:
        raise InvalidParameterError(f"mask shapes differ: {pred.shape} vs {tr.shape}")
    if max(pred.shape) > ORACLE_MAX_DIM:
        raise OracleSizeError(f"oracle accepts at most {ORACLE_MAX_DIM}x{ORACLE_MAX_DIM}, got {pred.shape}")

    truth_pixels = {(int(r), int(c)) for r, c in zip(*np.nonzero(tr))}
    if not truth_pixels:
        raise EmptyTruthError("ground-truth mask has no positive pixel")
    if len(_flood_components(truth_pixels, connectivity)) != 1:
        raise MultipleBudsError("ground-truth mask has more than one connected region")
    truth_centroid = _set_centroid(truth_pixels)
    truth_diameter = _set_diameter(truth_pixels)
    denom = truth_diameter if truth_diameter > 0.0 else 1.0

    pred_pixels = {(int(r), int(c)) for r, c in zip(*np.nonzero(pred))}
    assessments = []
    for comp_id, group in enumerate(_flood_components(pred_pixels, connectivity), start=1):
        inter = len(group & truth_pixels)
        union = len(group | truth_pixels)
        iou = inter / union
        if iou >= alpha:
            category = Category.TRUE_POSITIVE
        elif iou > 0.0:
            category = Category.SPLIT
        else:
            category = Category.FALSE_ALARM
        cg = _set_centroid(group)
        assessments.append(
            ComponentAssessment(
                component_id=comp_id,
                category=category,
                area=len(group),
                centroid=cg,
                overlap=inter,
                precision=inter / len(group),
                recall=inter / len(truth_pixels),
                iou=iou,
                normalized_area=len(group) / len(truth_pixels),
                normalized_distance=math.dist(cg, truth_centroid) / denom,
            )
        )
    return ImageEvaluation(
        image_id=image_id,
        alpha=alpha,
        assessments=tuple(assessments),
        truth_area=len(truth_pixels),
        truth_diameter=truth_diameter,
        truth_centroid=truth_centroid,
        degenerate_diameter=truth_diameter == 0.0,
    )


# ---------------------------------------------------------------------------
# Random cases for property and equivalence testing.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthCase:
    """One generated scene with its truth, perturbed mask, and known scores."""

    scene: SceneSpec
    perturbation: PerturbationSpec
    truth: GroundTruth
    result: PerturbResult


def _draw_case(rng: random.Random, seed: int) -> tuple[SceneSpec, PerturbationSpec]:
    dim_h = rng.randrange(48, 65)
    dim_w = rng.randrange(48, 65)
    shape = rng.choice(SHAPES)
    radius = rng.randrange(2, 6)
    aspect = 1.0 if shape == "disk" else rng.uniform(0.6, 1.4)
    center = (
        dim_h // 2 + rng.randrange(-4, 5),
        dim_w // 2 + rng.randrange(-4, 5),
    )
    scene = SceneSpec(width=dim_w, height=dim_h, bud=BudSpec(center, radius, shape, aspect), rng_seed=seed)

    roll = rng.random()
    if roll < 0.15:
        # Pure shift of a rectangle: overlap score has a closed form.
        scene = SceneSpec(
            width=dim_w,
            height=dim_h,
            bud=BudSpec(center, radius, "rectangle", aspect if shape != "disk" else 1.0),
            rng_seed=seed,
        )
        shift = (rng.randrange(-4, 5), rng.randrange(-4, 5))
        return scene, PerturbationSpec(shift=shift)
    if roll < 0.23:
        # Erode to nothing: the bud goes undetected.
        return scene, PerturbationSpec(dilate_or_erode=-(radius + 2))
    shift = (rng.randrange(-3, 4), rng.randrange(-3, 4))
    grow = rng.randrange(-2, 3)
    split = rng.choice((1, 1, 1, 2, 3))
    n_fa = rng.choice((0, 0, 1, 1, 2))
    fas = tuple(
        FalseAlarmSpec(
            offset_diameters=rng.uniform(1.2, 2.4),
            area_fraction=rng.uniform(0.05, 0.3),
        )
        for _ in range(n_fa)
    )
    return scene, PerturbationSpec(shift=shift, dilate_or_erode=grow, split_into=split, false_alarms=fas)


def generate_case(seed: int, max_attempts: int = 50) -> SynthCase:
    """Deterministically generate one scene; retries draws that do not fit."""
    for attempt in range(max_attempts):
        rng = random.Random(seed * max_attempts + attempt)
        scene, perturbation = _draw_case(rng, seed)
        try:
            truth = make_truth(scene)
            result = perturb(truth, perturbation)
        except InvalidParameterError:
            continue
        return SynthCase(scene=scene, perturbation=perturbation, truth=truth, result=result)
    raise InvalidParameterError(f"no valid scene found for seed {seed} in {max_attempts} attempts")
