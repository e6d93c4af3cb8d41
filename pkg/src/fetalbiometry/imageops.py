"""2D image primitives: resampling, intensity adjustments, CLAHE, ray profiles
and connected-component cleanup."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

LOGIT_EPS = 1e-6
CLAHE_BINS = 256


@dataclass(frozen=True)
class Profile:
    """Samples along a ray: ``positions`` in mm from the ray start."""

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.positions) != len(self.values):
            raise ValueError("positions and values differ in length")
        if len(self.positions) > 1 and np.any(np.diff(self.positions) <= 0):
            raise ValueError("profile positions must be strictly increasing")

    def __len__(self):
        return len(self.positions)


def bilinear_resize(img: np.ndarray, out_dims) -> np.ndarray:
    """Align-corners bilinear resampling of a 2D image to ``out_dims = (h, w)``."""
    img = np.asarray(img, dtype=float)
    h_out, w_out = int(out_dims[0]), int(out_dims[1])
    if h_out < 1 or w_out < 1:
        raise ValueError("output dims must be positive")
    h, w = img.shape

    def coords(n_in, n_out):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    rows = coords(h, h_out)
    cols = coords(w, w_out)
    return sample_bilinear(img, cols[None, :], rows[:, None])


def sample_bilinear(img: np.ndarray, x, y) -> np.ndarray:
    """Bilinear sample at fractional pixel coordinates (x = column, y = row).

    Coordinates must lie within ``[0, w-1] x [0, h-1]``; broadcasting applies.
    """
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    x0 = np.clip(np.floor(x).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(y).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def normalize01(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def _logit(p):
    p = np.clip(np.asarray(p, dtype=float), LOGIT_EPS, 1 - LOGIT_EPS)
    return np.log(p / (1 - p))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def adjust_brightness(img: np.ndarray, c: float) -> np.ndarray:
    """``sigmoid(logit(p) + logit(c))`` per pixel, for ``c`` in (0, 1)."""
    if not 0 < c < 1:
        raise ValueError("brightness amount must lie in (0, 1)")
    return _sigmoid(_logit(img) + np.log(c / (1 - c)))


def adjust_contrast(img: np.ndarray, c: float) -> np.ndarray:
    """``sigmoid(logit(p) * c)`` per pixel, for ``c > 0``."""
    if c <= 0:
        raise ValueError("contrast amount must be positive")
    return _sigmoid(_logit(img) * c)


def _tile_edges(n: int, t: int) -> np.ndarray:
    return np.append(np.arange(0, n, t), n)


def clahe_tile_maps(img: np.ndarray, tile=(20, 20), clip: float = 0.01) -> np.ndarray:
    """Per-tile lookup tables, shape ``(n_tile_rows, n_tile_cols, 256)``.

    A tile whose histogram occupies a single bin maps every bin to its own
    centre value (nothing to equalize).
    """
    th, tw = int(tile[0]), int(tile[1])
    bins = np.minimum((np.asarray(img) * CLAHE_BINS).astype(int), CLAHE_BINS - 1)
    r_edges = _tile_edges(bins.shape[0], th)
    c_edges = _tile_edges(bins.shape[1], tw)
    identity = (np.arange(CLAHE_BINS) + 0.5) / CLAHE_BINS
    maps = np.empty((len(r_edges) - 1, len(c_edges) - 1, CLAHE_BINS))
    for i in range(len(r_edges) - 1):
        for j in range(len(c_edges) - 1):
            block = bins[r_edges[i]:r_edges[i + 1], c_edges[j]:c_edges[j + 1]]
            hist = np.bincount(block.ravel(), minlength=CLAHE_BINS).astype(float)
            if np.count_nonzero(hist) == 1:
                maps[i, j] = identity
                continue
            limit = clip * block.size
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / CLAHE_BINS
            maps[i, j] = np.cumsum(hist) / block.size
    return np.clip(maps, 0.0, 1.0)


def _blend_axis(n: int, t: int):
    """Lower tile index and weight of the upper neighbour for each pixel."""
    edges = _tile_edges(n, t)
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(n, dtype=float)
    if len(centers) == 1:
        return np.zeros(n, dtype=int), np.zeros(n)
    lower = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, len(centers) - 2)
    frac = (pos - centers[lower]) / (centers[lower + 1] - centers[lower])
    return lower, np.clip(frac, 0.0, 1.0)


def clahe(img: np.ndarray, tile=(20, 20), clip: float = 0.01) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization of a [0, 1] image.

    ``tile`` is the tile size in pixels; ``clip`` is the per-bin clip limit as
    a fraction of the tile pixel count. Tile mappings are blended bilinearly
    between tile centres.
    """
    img = np.asarray(img, dtype=float)
    if tile[0] < 1 or tile[1] < 1:
        raise ValueError("tile dims must be positive")
    if not 0 < clip <= 1:
        raise ValueError("clip must lie in (0, 1]")
    if img.max() == img.min():
        return img.copy()
    maps = clahe_tile_maps(img, tile, clip)
    bins = np.minimum((img * CLAHE_BINS).astype(int), CLAHE_BINS - 1)
    r0, fr = _blend_axis(img.shape[0], int(tile[0]))
    c0, fc = _blend_axis(img.shape[1], int(tile[1]))
    r1 = np.minimum(r0 + 1, maps.shape[0] - 1)
    c1 = np.minimum(c0 + 1, maps.shape[1] - 1)
    R0, C0 = np.meshgrid(r0, c0, indexing="ij")
    R1, C1 = np.meshgrid(r1, c1, indexing="ij")
    FR, FC = np.meshgrid(fr, fc, indexing="ij")
    out = (
        maps[R0, C0, bins] * (1 - FR) * (1 - FC)
        + maps[R0, C1, bins] * (1 - FR) * FC
        + maps[R1, C0, bins] * FR * (1 - FC)
        + maps[R1, C1, bins] * FR * FC
    )
    return np.clip(out, 0.0, 1.0)


def line_intensity_derivative(img, p0, p1, step_mm: float, spacing=(1.0, 1.0)):
    """Intensity profile from ``p0`` towards ``p1`` (mm) and its derivative.

    Returns ``(profile, derivative)``. The derivative uses central differences,
    one-sided at both ends. Raises ``ValueError`` if the ray leaves the image.
    """
    if step_mm <= 0:
        raise ValueError("step must be positive")
    img = np.asarray(img, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    if length == 0:
        raise ValueError("ray has zero length")
    direction = (p1 - p0) / length
    n = int(np.floor(length / step_mm + 1e-9)) + 1
    if n < 2:
        raise ValueError("ray shorter than one step")
    pos = np.arange(n) * step_mm
    pts = p0 + pos[:, None] * direction
    x = pts[:, 0] / spacing[0]
    y = pts[:, 1] / spacing[1]
    h, w = img.shape
    tol = 1e-9
    if np.any((x < -tol) | (y < -tol) | (x > w - 1 + tol) | (y > h - 1 + tol)):
        raise ValueError("ray leaves the image domain")
    values = sample_bilinear(img, np.clip(x, 0, w - 1), np.clip(y, 0, h - 1))
    deriv = np.gradient(values, step_mm)
    return Profile(pos, values), Profile(pos, deriv)


_EIGHT = np.ones((3, 3), dtype=bool)


def keep_largest_components(mask: np.ndarray, k: int) -> np.ndarray:
    """Keep the ``k`` largest 8-connected components of a binary mask."""
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = np.asarray(mask).astype(bool)
    lab, n = ndimage.label(mask, structure=_EIGHT)
    if n <= k:
        return mask
    sizes = np.bincount(lab.ravel())[1:]
    # stable order: equal sizes keep the lower label
    keep = np.argsort(-sizes, kind="stable")[:k] + 1
    return np.isin(lab, keep)


def clean_label_slice(labels2d: np.ndarray, k: int = 3) -> np.ndarray:
    """Zero out label pixels outside the ``k`` largest foreground components."""
    keep = keep_largest_components(labels2d > 0, k)
    return np.where(keep, labels2d, 0).astype(labels2d.dtype)
