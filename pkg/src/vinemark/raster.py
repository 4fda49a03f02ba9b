"""Rasters, binarization, connected components, and component geometry.

Probability maps are 2-D float arrays with values in [0, 1]; binary masks
are 2-D bool arrays. Both use (row, col) indexing with pixel centers at
integer coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyComponentError,
    EmptyTruthError,
    InvalidParameterError,
    MultipleBudsError,
)

# Neighborhood footprints for connected-component labeling.
_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}

DEFAULT_CONNECTIVITY = 8


def validate_probability_map(values: np.ndarray) -> np.ndarray:
    """Check that an array is a valid probability map and return it as float64."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidParameterError(f"probability map must be 2-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidParameterError("probability map values must be finite and within [0, 1]")
    return arr


def validate_mask(values: np.ndarray) -> np.ndarray:
    """Check that an array is a valid binary mask and return it as bool."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidParameterError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
    return arr.astype(bool)


def binarize(values: np.ndarray, tau: float) -> np.ndarray:
    """Threshold a probability map: a pixel is positive iff its value exceeds tau.

    The comparison is strict, so a pixel exactly at the threshold is negative.
    """
    if not (0.0 <= tau <= 1.0):
        raise InvalidParameterError(f"tau must be in [0, 1], got {tau}")
    arr = validate_probability_map(values)
    return arr > tau


@dataclass(frozen=True, eq=False)
class Component:
    """One connected region of positive pixels.

    ``pixels`` is an (n, 2) int array of (row, col) coordinates in row-major
    order; ``centroid`` is the arithmetic mean of those coordinates; ``bbox``
    is (min_row, min_col, max_row, max_col), inclusive.
    """

    id: int
    pixels: np.ndarray
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]

    @classmethod
    def from_pixels(cls, comp_id: int, rows: np.ndarray, cols: np.ndarray) -> "Component":
        if rows.size == 0:
            raise EmptyComponentError("component must contain at least one pixel")
        order = np.lexsort((cols, rows))
        pixels = np.column_stack([rows[order], cols[order]]).astype(np.int64)
        pixels.setflags(write=False)
        return cls(
            id=comp_id,
            pixels=pixels,
            area=int(rows.size),
            centroid=(float(rows.mean()), float(cols.mean())),
            bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
        )

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.pixels}


def connected_components(mask: np.ndarray, connectivity: int = DEFAULT_CONNECTIVITY) -> list[Component]:
    """Extract connected regions of positive pixels from a binary mask.

    Components are returned with ids 1..n assigned in deterministic order,
    sorted by bounding box (min_row, min_col) with the remaining bbox corners
    as tie-breakers. An all-negative mask yields an empty list.
    """
    if connectivity not in _STRUCTURES:
        raise InvalidParameterError(f"connectivity must be 4 or 8, got {connectivity}")
    arr = validate_mask(mask)
    labels, count = ndimage.label(arr, structure=_STRUCTURES[connectivity])
    raw = []
    for index, sl in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = np.nonzero(labels[sl] == index)
        raw.append((rows + sl[0].start, cols + sl[1].start))
    raw.sort(key=lambda rc: (rc[0].min(), rc[1].min(), rc[0].max(), rc[1].max(), rc[0][0], rc[1][0]))
    return [Component.from_pixels(i, rows, cols) for i, (rows, cols) in enumerate(raw, start=1)]


def centroid(pixels) -> tuple[float, float]:
    """Arithmetic mean of a set of (row, col) pixel coordinates."""
    arr = np.asarray(list(pixels) if isinstance(pixels, (set, frozenset)) else pixels, dtype=np.float64)
    if arr.size == 0:
        raise EmptyComponentError("centroid of an empty pixel set is undefined")
    arr = arr.reshape(-1, 2)
    return (float(arr[:, 0].mean()), float(arr[:, 1].mean()))


def diameter(mask: np.ndarray) -> float:
    """Maximum Euclidean distance between the centers of any two positive pixels.

    Exact: only per-row extreme pixels can realize the maximum, so the
    all-pairs search is restricted to the leftmost and rightmost positive
    pixel of each row. A single positive pixel has diameter 0.
    """
    arr = validate_mask(mask)
    rows, cols = np.nonzero(arr)
    if rows.size == 0:
        raise EmptyTruthError("diameter of an empty mask is undefined")
    if rows.size == 1:
        return 0.0
    candidates = []
    for r in np.unique(rows):
        cs = cols[rows == r]
        candidates.append((r, cs.min()))
        candidates.append((r, cs.max()))
    pts = np.array(candidates, dtype=np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2).max()))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """The single true bud of one image: its mask and geometry.

    ``diameter`` is the maximum pairwise distance between bud pixel centers
    and is 0 for a single-pixel bud; consumers that normalize by it clamp
    zero to 1.0 and flag the image as degenerate.
    """

    mask: np.ndarray
    area: int
    centroid: tuple[float, float]
    diameter: float

    @property
    def degenerate_diameter(self) -> bool:
        return self.diameter == 0.0

    @classmethod
    def from_mask(
        cls,
        mask: np.ndarray,
        connectivity: int = DEFAULT_CONNECTIVITY,
        require_single_component: bool = True,
    ) -> "GroundTruth":
        arr = validate_mask(mask)
        rows, cols = np.nonzero(arr)
        if rows.size == 0:
            raise EmptyTruthError("ground-truth mask has no positive pixel")
        if require_single_component:
            _, count = ndimage.label(arr, structure=_STRUCTURES[connectivity])
            if count != 1:
                raise MultipleBudsError(f"ground-truth mask has {count} connected regions, expected 1")
        frozen = arr.copy()
        frozen.setflags(write=False)
        return cls(
            mask=frozen,
            area=int(rows.size),
            centroid=(float(rows.mean()), float(cols.mean())),
            diameter=diameter(arr),
        )


def resize_bilinear(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize a probability map with bilinear interpolation.

    Uses half-pixel-center alignment: output pixel j samples the source at
    (j + 0.5) * in/out - 0.5, clamped to the source extent. Output values
    stay within the input's [min, max] range.
    """
    if out_w < 1 or out_h < 1:
        raise InvalidParameterError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    arr = validate_probability_map(values)
    in_h, in_w = arr.shape

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        x = np.clip(x, 0.0, n_in - 1)
        lo = np.minimum(np.floor(x).astype(np.int64), max(n_in - 2, 0))
        return lo, x - lo

    r0, fr = axis_coords(in_h, out_h)
    c0, fc = axis_coords(in_w, out_w)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)

    fr = fr[:, None]
    fc = fc[None, :]
    top = arr[np.ix_(r0, c0)] * (1 - fc) + arr[np.ix_(r0, c1)] * fc
    bot = arr[np.ix_(r1, c0)] * (1 - fc) + arr[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


# ---------------------------------------------------------------------------
# File formats: binary PGM (P5, 8/16-bit) and 8-bit grayscale PNG.
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG"


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary (P5) PGM file. Returns (uint array, maxval)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise InvalidParameterError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval, separated by whitespace/comments.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        m = re.match(rb"\d+", data[pos:])
        if m is None:
            raise InvalidParameterError(f"{path}: malformed PGM header")
        fields.append(int(m.group()))
        pos += m.end()
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields[0], fields[1], fields[2]
    if width < 1 or height < 1 or not (1 <= maxval <= 65535):
        raise InvalidParameterError(f"{path}: bad PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expected = width * height * dtype.itemsize
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise InvalidParameterError(f"{path}: truncated PGM raster")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_pgm(path, values: np.ndarray, maxval: int | None = None) -> None:
    """Write an integer array as a binary (P5) PGM file."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise InvalidParameterError("PGM output must be 2-D")
    if maxval is None:
        maxval = max(1, int(arr.max())) if arr.size else 1
    if not (1 <= maxval <= 65535) or int(arr.min()) < 0 or int(arr.max()) > maxval:
        raise InvalidParameterError("PGM values must lie in [0, maxval] with maxval in [1, 65535]")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(dtype).tobytes())


def _read_gray(path) -> tuple[np.ndarray, int]:
    """Read PGM or 8-bit grayscale PNG; returns (uint array, maxval)."""
    head = Path(path).read_bytes()[:4]
    if head.startswith(_PNG_MAGIC):
        from PIL import Image

        with Image.open(path) as img:
            if img.mode != "L":
                raise InvalidParameterError(f"{path}: PNG must be 8-bit grayscale (mode L), got {img.mode}")
            return np.asarray(img, dtype=np.uint8), 255
    return read_pgm(path)


def load_probability_map(path) -> np.ndarray:
    """Load a grayscale image as a probability map.

    8-bit values map to v/255 and 16-bit values to v/65535, regardless of
    the file's declared maxval.
    """
    arr, maxval = _read_gray(path)
    scale = 65535.0 if maxval > 255 else 255.0
    return validate_probability_map(arr.astype(np.float64) / scale)


def load_mask(path) -> np.ndarray:
    """Load a grayscale image as a binary mask: 0 is background, any other value is bud."""
    arr, _ = _read_gray(path)
    return arr > 0


def load_votes(path) -> np.ndarray:
    """Load a grayscale image as raw integer vote counts."""
    arr, _ = _read_gray(path)
    return arr.astype(np.int64)


def write_mask(path, mask: np.ndarray) -> None:
    """Write a binary mask as an 8-bit PGM with positives at 255."""
    arr = validate_mask(mask)
    write_pgm(path, arr.astype(np.uint8) * 255, maxval=255)


def euclidean(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Distance between two (row, col) points."""
    return math.dist(a, b)
