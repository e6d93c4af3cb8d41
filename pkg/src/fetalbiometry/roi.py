"""Brain bounding box and square ROI slice preparation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LabelMap, RoiBox, Volume
from .imageops import bilinear_resize

BRAIN_CLASSES = frozenset({1, 2, 3})


class NoForeground(ValueError):
    pass


def tight_bbox(labels: LabelMap, classes=BRAIN_CLASSES) -> RoiBox:
    sel = np.isin(labels.labels, list(classes))
    if not sel.any():
        raise NoForeground("no foreground")
    zs, ys, xs = (np.flatnonzero(sel.any(axis=ax)) for ax in ((1, 2), (0, 2), (0, 1)))
    return RoiBox((xs[0], ys[0], zs[0]), (xs[-1], ys[-1], zs[-1]))


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def square_window(roi: RoiBox, dims, factor: float = 1.5):
    """In-plane window ``(x0, y0, width, height)`` of side ``factor * max(h, w)``.

    The window is centred on the ROI and shifted inward at the volume border;
    it only becomes smaller than the requested side when the volume is.
    """
    side = _round_half_up(factor * max(roi.width, roi.height))
    out = []
    for axis in (0, 1):
        n = dims[axis]
        extent = min(side, n)
        center = (roi.lo[axis] + roi.hi[axis]) / 2.0
        start = _round_half_up(center - (extent - 1) / 2.0)
        out.append(min(max(start, 0), n - extent))
        out.append(extent)
    x0, width, y0, height = out
    return x0, y0, width, height


@dataclass(frozen=True)
class PreparedStack:
    images: np.ndarray  # (n, out, out), values in [0, 1]
    window: tuple  # (x0, y0, width, height) in voxels
    side: int

    @property
    def out(self) -> int:
        return self.images.shape[1]

    def _scale(self):
        x0, y0, w, h = self.window
        n = self.out
        sx = (w - 1) / (n - 1) if n > 1 else 0.0
        sy = (h - 1) / (n - 1) if n > 1 else 0.0
        return x0, y0, sx, sy

    def to_volume(self, u, v):
        """Prepared-image column/row to volume voxel column/row."""
        x0, y0, sx, sy = self._scale()
        return x0 + np.asarray(u) * sx, y0 + np.asarray(v) * sy

    def from_volume(self, x, y):
        x0, y0, sx, sy = self._scale()
        return (np.asarray(x) - x0) / sx, (np.asarray(y) - y0) / sy


def prepare_slices(vol: Volume, roi: RoiBox, factor: float = 1.5, out: int = 224) -> PreparedStack:
    if not roi.within(vol.dims):
        raise ValueError("ROI lies outside the volume")
    x0, y0, w, h = square_window(roi, vol.dims, factor)
    side = _round_half_up(factor * max(roi.width, roi.height))
    crop = vol.voxels[:, y0:y0 + h, x0:x0 + w]
    stack = np.stack([bilinear_resize(s, (out, out)) for s in crop])
    lo, hi = stack.min(), stack.max()
    stack = np.zeros_like(stack) if hi == lo else (stack - lo) / (hi - lo)
    return PreparedStack(stack, (x0, y0, w, h), side)
