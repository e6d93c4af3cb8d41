"""Shared domain types and the voxel/millimetre coordinate conventions.

Arrays are stored slice-major: ``voxels[z, y, x]`` where ``x`` is the image
column and ``y`` the image row, origin at the top-left of each slice. In-plane
geometry is done in millimetres, ``(x * sx, y * sy)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WARNING_CODES = (
    "SLICE_CONF_CBD",
    "SLICE_CONF_TCD",
    "ORIENT_INCONSISTENT",
    "MSL_ROUGH",
    "BBD_UNSTABLE",
    "TCD_ANGLES",
)

BACKGROUND, LEFT, RIGHT, CEREBELLUM = 0, 1, 2, 3
LABEL_NAMES = {
    BACKGROUND: "background",
    LEFT: "left_hemisphere",
    RIGHT: "right_hemisphere",
    CEREBELLUM: "cerebellum",
}

MEASUREMENT_KINDS = ("CBD", "BBD", "TCD")


class DimensionMismatch(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.flags.writeable:
        arr = arr.view()
        arr.flags.writeable = False
    return arr


def _check_spacing(spacing) -> tuple:
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != 3 or min(spacing) <= 0:
        raise ValueError(f"spacing must be three positive values, got {spacing}")
    return spacing


@dataclass(frozen=True)
class Volume:
    """A scan: ``voxels`` has shape ``(nz, ny, nx)``."""

    voxels: np.ndarray
    spacing_mm: tuple

    def __post_init__(self):
        vox = np.asarray(self.voxels)
        if vox.ndim != 3 or min(vox.shape) < 1:
            raise ValueError(f"volume must be a non-empty 3D array, got shape {vox.shape}")
        object.__setattr__(self, "voxels", _frozen(vox))
        object.__setattr__(self, "spacing_mm", _check_spacing(self.spacing_mm))

    @property
    def dims(self) -> tuple:
        nz, ny, nx = self.voxels.shape
        return (nx, ny, nz)

    @property
    def n_slices(self) -> int:
        return self.voxels.shape[0]

    @property
    def in_plane_spacing(self) -> tuple:
        return self.spacing_mm[:2]

    def slice(self, k: int) -> np.ndarray:
        return self.voxels[k]


@dataclass(frozen=True)
class LabelMap:
    """Per-voxel classes: 0 background, 1 left, 2 right hemisphere, 3 cerebellum."""

    labels: np.ndarray
    spacing_mm: tuple

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 3:
            raise ValueError(f"label map must be 3D, got shape {lab.shape}")
        if lab.size and (lab.min() < 0 or lab.max() > 3):
            raise ValueError("label values must lie in {0, 1, 2, 3}")
        object.__setattr__(self, "labels", _frozen(lab.astype(np.uint8, copy=False)))
        object.__setattr__(self, "spacing_mm", _check_spacing(self.spacing_mm))

    @property
    def dims(self) -> tuple:
        nz, ny, nx = self.labels.shape
        return (nx, ny, nz)

    def slice(self, k: int) -> np.ndarray:
        return self.labels[k]

    def check_matches(self, volume: Volume) -> None:
        if self.dims != volume.dims:
            raise DimensionMismatch(
                f"label map dims {self.dims} do not match volume dims {volume.dims}"
            )


@dataclass(frozen=True)
class RoiBox:
    """Inclusive voxel-index box, ``lo`` and ``hi`` given as ``(x, y, z)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> int:
        return self.hi[0] - self.lo[0] + 1

    @property
    def height(self) -> int:
        return self.hi[1] - self.lo[1] + 1

    def within(self, dims) -> bool:
        return all(0 <= a and b < n for a, b, n in zip(self.lo, self.hi, dims))

    def in_plane_rect_mm(self, spacing) -> tuple:
        """(xmin, ymin, xmax, ymax) through the outermost pixel centres."""
        sx, sy = spacing[0], spacing[1]
        return (self.lo[0] * sx, self.lo[1] * sy, self.hi[0] * sx, self.hi[1] * sy)


@dataclass(frozen=True)
class Line2D:
    """Undirected line ``a*x + b*y + c = 0`` with ``a**2 + b**2 == 1``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        norm = math.hypot(self.a, self.b)
        if norm == 0 or not math.isfinite(norm):
            raise ValueError("line normal must be non-zero")
        object.__setattr__(self, "a", float(self.a) / norm)
        object.__setattr__(self, "b", float(self.b) / norm)
        object.__setattr__(self, "c", float(self.c) / norm)

    @classmethod
    def through(cls, point, direction) -> "Line2D":
        dx, dy = direction
        a, b = dy, -dx
        return cls(a, b, -(a * point[0] + b * point[1]))

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b])

    @property
    def direction(self) -> np.ndarray:
        return np.array([-self.b, self.a])

    @property
    def coefficients(self) -> tuple:
        return (self.a, self.b, self.c)

    def signed_distance(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.normal + self.c

    def foot(self) -> np.ndarray:
        """Point of the line closest to the origin."""
        return -self.c * self.normal

    def angle_deg(self) -> float:
        dx, dy = self.direction
        return fold_angle(math.degrees(math.atan2(dy, dx)))

    def same_as(self, other: "Line2D", atol: float = 1e-9) -> bool:
        mine = np.array(self.coefficients)
        theirs = np.array(other.coefficients)
        return bool(np.allclose(mine, theirs, atol=atol) or np.allclose(mine, -theirs, atol=atol))


@dataclass(frozen=True)
class Measurement:
    kind: str
    slice_index: int
    endpoint_a: tuple
    endpoint_b: tuple
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MEASUREMENT_KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        object.__setattr__(self, "endpoint_a", tuple(float(v) for v in self.endpoint_a))
        object.__setattr__(self, "endpoint_b", tuple(float(v) for v in self.endpoint_b))

    @property
    def value_mm(self) -> float:
        return length_mm(self.endpoint_a, self.endpoint_b)


@dataclass(frozen=True)
class ReliabilityWarning:
    code: str
    detail: str

    def __post_init__(self):
        if self.code not in WARNING_CODES:
            raise ValueError(f"unknown warning code {self.code!r}")


@dataclass(frozen=True)
class PipelineReport:
    measurements: dict  # kind -> Measurement or None
    selections: dict  # task -> Selection
    lines: tuple  # per slice: Line2D or None
    inferior_dirs: tuple  # per slice: (dx, dy) or None
    warnings: tuple
    errors: tuple = ()
    notes: tuple = ()
    provenance: dict = field(default_factory=dict)

    @property
    def warning_codes(self) -> set:
        return {w.code for w in self.warnings}


def voxel_to_mm(p, spacing: Sequence[float]) -> np.ndarray:
    """Scale in-plane voxel coordinates ``(x, y)`` (or an ``(n, 2)`` array) to mm."""
    sx, sy = spacing[0], spacing[1]
    if sx <= 0 or sy <= 0:
        raise ValueError("spacing must be positive")
    return np.asarray(p, dtype=float) * np.array([sx, sy])


def mm_to_voxel(p, spacing: Sequence[float]) -> np.ndarray:
    return np.asarray(p, dtype=float) / np.array([spacing[0], spacing[1]])


def length_mm(p0, p1) -> float:
    return float(math.hypot(p1[0] - p0[0], p1[1] - p0[1]))


def pixel_centers_mm(mask: np.ndarray, spacing) -> np.ndarray:
    """Millimetre coordinates ``(x, y)`` of the non-zero pixels of a 2D mask."""
    rows, cols = np.nonzero(mask)
    return np.column_stack([cols * float(spacing[0]), rows * float(spacing[1])])


def fold_angle(a: float) -> float:
    """Undirected angle in ``[0, 180)``."""
    a = a % 180.0
    # tiny negative inputs round up to exactly 180
    return 0.0 if a >= 180.0 else a


def fold_angle_diff(a1: float, a2: float) -> float:
    d = abs(a1 - a2) % 180.0
    return min(d, 180.0 - d)


