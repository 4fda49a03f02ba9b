"""Sliding-windows baseline detector.

The image is scanned with squared windows displaced by half the window
size per step; each window is classified bud / non-bud by a pluggable
patch classifier, every pixel collects one vote per positive window
containing it, and pixels with at least a given number of votes form the
output mask. With half-size displacement every interior pixel lies in
exactly 4 windows, so vote counts run 0..4 away from the borders.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import (
    InconsistentInputError,
    InvalidParameterError,
    ManifestError,
    WindowTooLargeError,
)
from .raster import validate_mask

MIN_NU = 1
MAX_NU = 4
DEFAULT_MIN_BUD_FRACTION = 0.2


@dataclass(frozen=True)
class PatchGrid:
    """All window placements for one image and window size.

    ``patches`` holds (row, col, size) origins, row-major. The grid tiles
    the image at ``stride`` = floor(size / 2); when the tiling stops short
    of a border, one extra window is anchored flush against it, so every
    pixel is covered. Pixels at distance >= size from all borders are
    covered by exactly 4 windows; border pixels may see fewer or more.
    """

    width: int
    height: int
    window_size: int
    stride: int
    patches: tuple[tuple[int, int, int], ...]


def _axis_origins(dimension: int, size: int, stride: int) -> list[int]:
    origins = list(range(0, dimension - size + 1, stride))
    if origins[-1] + size < dimension:
        origins.append(dimension - size)
    return origins


def build_grid(width: int, height: int, size: int) -> PatchGrid:
    """Place squared windows of side ``size`` over a width x height image."""
    if width < 1 or height < 1:
        raise InvalidParameterError(f"image dimensions must be >= 1, got {width}x{height}")
    if size < 1:
        raise InvalidParameterError(f"window size must be >= 1, got {size}")
    if size > min(width, height):
        raise WindowTooLargeError(f"window size {size} exceeds image dimensions {width}x{height}")
    stride = max(size // 2, 1)
    patches = tuple(
        (r, c, size)
        for r in _axis_origins(height, size, stride)
        for c in _axis_origins(width, size, stride)
    )
    return PatchGrid(width=width, height=height, window_size=size, stride=stride, patches=patches)


class PatchClassifier(Protocol):
    """Binary bud / non-bud decision for one window of an image."""

    def classify(self, region: np.ndarray, row: int, col: int, size: int) -> bool: ...


class ConstantClassifier:
    """Answers the same label for every patch. Useful for tests."""

    def __init__(self, label: bool):
        self.label = bool(label)

    def classify(self, region: np.ndarray, row: int, col: int, size: int) -> bool:
        return self.label


class OracleClassifier:
    """Labels a patch by how much of its area the true bud occupies.

    A patch is positive when it contains at least one bud pixel and bud
    pixels make up at least ``min_fraction`` of the patch area. With the
    0.2 default, positives are the patches a size-robust classifier could
    be expected to get right; with 0.0, any patch touching the bud is
    positive.
    """

    def __init__(self, truth_mask: np.ndarray, min_fraction: float = DEFAULT_MIN_BUD_FRACTION):
        if not (0.0 <= min_fraction <= 1.0):
            raise InvalidParameterError(f"min_fraction must be in [0, 1], got {min_fraction}")
        mask = validate_mask(truth_mask)
        self.min_fraction = min_fraction
        self.shape = mask.shape
        # Summed-area table padded with a zero row/col: counts via 4 lookups.
        self._integral = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(mask, axis=0), axis=1, out=self._integral[1:, 1:])

    def bud_pixels_in(self, row: int, col: int, size: int) -> int:
        if row < 0 or col < 0 or row + size > self.shape[0] or col + size > self.shape[1]:
            raise InconsistentInputError(f"patch ({row}, {col}, {size}) exceeds truth extent {self.shape}")
        sat = self._integral
        return int(sat[row + size, col + size] - sat[row, col + size] - sat[row + size, col] + sat[row, col])

    def classify(self, region: np.ndarray, row: int, col: int, size: int) -> bool:
        count = self.bud_pixels_in(row, col, size)
        return count > 0 and count >= self.min_fraction * size * size


class CsvClassifier:
    """Replays precomputed per-patch labels keyed by (row, col, size).

    Patches absent from the table are treated as negative; ``missing_count``
    tallies how many lookups fell through so callers can warn.
    """

    def __init__(self, labels: dict[tuple[int, int, int], int]):
        self.labels = dict(labels)
        self.missing_count = 0

    def classify(self, region: np.ndarray, row: int, col: int, size: int) -> bool:
        label = self.labels.get((row, col, size))
        if label is None:
            self.missing_count += 1
            return False
        return bool(label)


def read_patch_labels(path) -> dict[tuple[int, int, int], int]:
    """Read a patch-label table: CSV with header row,col,size,label and label in {0,1}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty patch-label file") from None
        if [h.strip() for h in header] != ["row", "col", "size", "label"]:
            raise ManifestError(f"{path}: expected header row,col,size,label, got {header}")
        labels: dict[tuple[int, int, int], int] = {}
        for lineno, fields in enumerate(reader, start=2):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != 4:
                raise ManifestError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                row, col, size, label = (int(f) for f in fields)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: non-integer field in {fields}") from None
            if label not in (0, 1):
                raise ManifestError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
            labels[(row, col, size)] = label
    return labels


def vote(grid: PatchGrid, classifier: PatchClassifier, image: np.ndarray) -> np.ndarray:
    """Accumulate one vote per positive patch onto every pixel it covers."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InconsistentInputError(f"image must be 2-D, got shape {arr.shape}")
    if arr.shape != (grid.height, grid.width):
        raise InconsistentInputError(
            f"grid built for {grid.width}x{grid.height} but image is {arr.shape[1]}x{arr.shape[0]}"
        )
    votes = np.zeros(arr.shape, dtype=np.int64)
    for row, col, size in grid.patches:
        if classifier.classify(arr[row : row + size, col : col + size], row, col, size):
            votes[row : row + size, col : col + size] += 1
    return votes


def threshold_votes(votes: np.ndarray, nu: int) -> np.ndarray:
    """Keep pixels whose vote count reaches ``nu`` (inclusive)."""
    if not isinstance(nu, (int, np.integer)) or isinstance(nu, bool) or not (MIN_NU <= nu <= MAX_NU):
        raise InvalidParameterError(f"nu must be an integer in [{MIN_NU}, {MAX_NU}], got {nu!r}")
    arr = np.asarray(votes)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise InvalidParameterError("vote map must be a 2-D integer array")
    if arr.size and arr.min() < 0:
        raise InvalidParameterError("vote counts must be nonnegative")
    return arr >= nu


def run_detector(image: np.ndarray, classifier: PatchClassifier, size: int, nu: int) -> np.ndarray:
    """Full pipeline for one image: grid, votes, threshold. Returns the mask."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InconsistentInputError(f"image must be 2-D, got shape {arr.shape}")
    grid = build_grid(arr.shape[1], arr.shape[0], size)
    return threshold_votes(vote(grid, classifier, arr), nu)
