"""Shared data model: grid cells, RSSI blocks, image groups, likelihood vectors.

All types are immutable after construction (frozen dataclasses with
read-only numpy arrays), so they can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_SUM_TOL = 1e-6

LIKELIHOOD_SOURCES = ("wifi", "visual", "joint", "hadamard", "final")


class OutOfMapError(ValueError):
    """A queried point lies outside every grid cell."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CellGrid:
    """Partition of the floor plan into N disjoint axis-aligned rectangles.

    Cell i is the class label i; ``centres[i]`` is its centre (x, y) in
    meters and ``half_sizes[i]`` its (half_width, half_height).
    """

    centres: np.ndarray     # (N, 2)
    half_sizes: np.ndarray  # (N, 2)

    def __post_init__(self):
        centres = _freeze(self.centres)
        half_sizes = _freeze(self.half_sizes)
        object.__setattr__(self, "centres", centres)
        object.__setattr__(self, "half_sizes", half_sizes)
        if centres.ndim != 2 or centres.shape[1] != 2 or centres.shape != half_sizes.shape:
            raise ValueError("centres and half_sizes must both be (N, 2)")
        n = centres.shape[0]
        if n < 2:
            raise ValueError(f"grid needs at least 2 cells, got {n}")
        if np.any(half_sizes <= 0):
            raise ValueError("cell half sizes must be positive")
        lo = centres - half_sizes
        hi = centres + half_sizes
        # pairwise interior disjointness (boundaries may touch)
        for i in range(n):
            overlap = (lo[i] < hi) & (hi[i] > lo)
            overlap = overlap.all(axis=1)
            overlap[i] = False
            if overlap.any():
                j = int(np.flatnonzero(overlap)[0])
                raise ValueError(f"cells {i} and {j} overlap")

    @classmethod
    def regular(cls, rows: int, cols: int, cell_width: float, cell_height: float,
                origin: tuple[float, float] = (0.0, 0.0)) -> "CellGrid":
        """Row-major rows×cols grid anchored at origin (cell 0 at the origin corner)."""
        ox, oy = origin
        centres = np.array([
            (ox + (c + 0.5) * cell_width, oy + (r + 0.5) * cell_height)
            for r in range(rows) for c in range(cols)
        ])
        half = np.tile([cell_width / 2.0, cell_height / 2.0], (rows * cols, 1))
        return cls(centres, half)

    @property
    def n_cells(self) -> int:
        return self.centres.shape[0]

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the union of cells."""
        lo = (self.centres - self.half_sizes).min(axis=0)
        hi = (self.centres + self.half_sizes).max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def diameter(self) -> float:
        """Diagonal extent of the map bounding box in meters."""
        x0, y0, x1, y1 = self.bounds()
        return float(np.hypot(x1 - x0, y1 - y0))


def label_to_centre(grid: CellGrid, label: int) -> tuple[float, float]:
    """Centre coordinates of the cell with the given class label."""
    if not 0 <= label < grid.n_cells:
        raise IndexError(f"label {label} out of range [0, {grid.n_cells})")
    x, y = grid.centres[label]
    return float(x), float(y)


def point_to_label(grid: CellGrid, x: float, y: float) -> int:
    """Label of the cell containing (x, y); shared edges go to the smaller label."""
    lo = grid.centres - grid.half_sizes
    hi = grid.centres + grid.half_sizes
    inside = (lo[:, 0] <= x) & (x <= hi[:, 0]) & (lo[:, 1] <= y) & (y <= hi[:, 1])
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        raise OutOfMapError(f"point ({x}, {y}) lies outside the map")
    return int(hits[0])


@dataclass(frozen=True)
class RssiBlock:
    """One localization's M×K RSSI matrix (dBm raw, dimensionless standardized)."""

    values: np.ndarray        # (M, K)
    ap_ids: tuple[str, ...]
    standardized: bool = False

    def __post_init__(self):
        values = _freeze(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ap_ids", tuple(self.ap_ids))
        if values.ndim != 2:
            raise ValueError("RSSI block must be a 2-D matrix")
        m, k = values.shape
        if m < 2 or k < 2:
            raise ValueError(f"RSSI block needs M >= 2 and K >= 2, got {m}x{k}")
        if len(self.ap_ids) != k:
            raise ValueError(f"{len(self.ap_ids)} ap_ids for {k} columns")
        if self.standardized:
            zero_col = np.all(values == 0.0, axis=0)
            mu = values.mean(axis=0)
            sd = values.std(axis=0)
            bad = ~zero_col & ((np.abs(mu) > 1e-9) | (np.abs(sd - 1.0) > 1e-6))
            if bad.any():
                raise ValueError(f"column {int(np.flatnonzero(bad)[0])} is not standardized")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ImageGroup:
    """The S grayscale views taken at one position, with their camera headings."""

    images: np.ndarray   # (S, H, W), pixel values in [0, 1]
    headings: tuple[float, ...]

    def __post_init__(self):
        images = _freeze(self.images)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "headings", tuple(float(h) for h in self.headings))
        if images.ndim != 3:
            raise ValueError("images must be (S, H, W)")
        s = images.shape[0]
        if s < 1:
            raise ValueError("image group needs at least one image")
        if len(self.headings) != s:
            raise ValueError(f"{len(self.headings)} headings for {s} images")
        if images.min() < 0.0 or images.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        # headings strictly increasing modulo 360 (no full wrap)
        if s > 1:
            diffs = np.diff(self.headings) % 360.0
            if np.any(diffs <= 0.0) or diffs.sum() >= 360.0:
                raise ValueError("headings must be strictly increasing modulo 360")

    @property
    def n_images(self) -> int:
        return self.images.shape[0]

    @property
    def image_size(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]


@dataclass(frozen=True)
class LikelihoodVector:
    """Length-N probability vector over grid cells."""

    probs: np.ndarray
    source: str
    flagged: bool = False   # set by degenerate fusion paths

    def __post_init__(self):
        probs = _freeze(self.probs)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("probs must be a non-empty vector")
        if self.source not in LIKELIHOOD_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class Sample:
    """One WiFi-Visual training/test sample with its ground-truth position."""

    cell_label: int
    rssi: RssiBlock
    images: ImageGroup
    true_x: float
    true_y: float
