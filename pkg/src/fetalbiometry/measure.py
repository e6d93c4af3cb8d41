"""CBD, BBD and TCD computation on a reference slice.

* CBD: maximal cerebrum width perpendicular to the MSL, superior to the
  Sylvian fissure (the width-profile minimum nearest the mass centre on its
  superior side).
* BBD: the CBD line extended outward on both sides to the inner skull edge,
  found from the intensity derivative along each ray.
* TCD: convex-hull diameter of the cerebellum boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import CEREBELLUM, LEFT, RIGHT, Line2D, Measurement, fold_angle, pixel_centers_mm
from .imageops import line_intensity_derivative


class FissureNotFound(ValueError):
    pass


class SkullNotFound(ValueError):
    pass


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class WidthProfile:
    t: np.ndarray  # bin centres along the line direction (mm)
    extent: np.ndarray  # raw perpendicular extent per bin (mm)
    smoothed: np.ndarray
    bin_mm: float
    t_center: float  # projection of the mask centroid
    superior_sign: int  # +1: increasing t is superior
    # per-bin (index of min-offset pixel, index of max-offset pixel); -1 for empty bins
    extreme_pixels: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class OrientedRect:
    center: tuple
    half_extents: tuple  # (long, short)
    angle_deg: float  # long axis, in [0, 180)

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]


def _moving_average3(v: np.ndarray) -> np.ndarray:
    if len(v) < 3:
        return v.copy()
    padded = np.concatenate([[v[0]], v, [v[-1]]])
    out = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    # ends average only the bins that exist
    out[0] = (v[0] + v[1]) / 2.0
    out[-1] = (v[-1] + v[-2]) / 2.0
    return out


def _profile_coords(points: np.ndarray, line: Line2D):
    return points @ line.direction, line.signed_distance(points)


def width_profile(mask: np.ndarray, line: Line2D, spacing, bin_mm: Optional[float] = None,
                  superior_sign: int = 1) -> WidthProfile:
    """Perpendicular extent of ``mask`` in bins along ``line``."""
    pts = pixel_centers_mm(mask, spacing)
    if len(pts) == 0:
        raise MeasurementError("empty mask")
    if bin_mm is None:
        bin_mm = float(min(spacing[0], spacing[1]))
    t, d = _profile_coords(pts, line)
    t0 = t.min()
    idx = np.floor((t - t0) / bin_mm + 1e-9).astype(int)
    nb = idx.max() + 1
    lo = np.full(nb, np.inf)
    hi = np.full(nb, -np.inf)
    np.minimum.at(lo, idx, d)
    np.maximum.at(hi, idx, d)
    filled = np.isfinite(lo)
    centers = t0 + (np.arange(nb) + 0.5) * bin_mm
    extent = np.where(filled, hi - lo, np.nan)
    if not filled.all():
        extent = np.interp(centers, centers[filled], extent[filled])
    extremes = np.full((nb, 2), -1, dtype=int)
    order = np.lexsort((d, idx))
    first = np.searchsorted(idx[order], np.arange(nb), side="left")
    last = np.searchsorted(idx[order], np.arange(nb), side="right") - 1
    extremes[filled, 0] = order[first[filled]]
    extremes[filled, 1] = order[last[filled]]
    t_center = float(pts.mean(axis=0) @ line.direction)
    return WidthProfile(centers, extent, _moving_average3(extent), bin_mm, t_center,
                        1 if superior_sign >= 0 else -1, extremes)


def local_minima(v: np.ndarray) -> list:
    """Strict interior local minima; a flat-bottomed minimum reports its first index."""
    out = []
    n = len(v)
    i = 1
    while i < n - 1:
        if v[i] < v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] > v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return out


def locate_sylvian_fissure(profile: WidthProfile) -> int:
    """Bin index of the smoothed-profile minimum superior to and nearest the
    mass centre."""
    if len(profile) < 3:
        raise FissureNotFound("profile too short")
    s = profile.superior_sign
    cands = [i for i in local_minima(profile.smoothed)
             if s * (profile.t[i] - profile.t_center) > 0]
    if not cands:
        raise FissureNotFound("fissure not found")
    return min(cands, key=lambda i: (abs(profile.t[i] - profile.t_center), i))


def _superior_sign(line: Line2D, inferior_dir) -> int:
    return -1 if float(np.dot(line.direction, inferior_dir)) > 0 else 1


def compute_cbd(labels2d: np.ndarray, line: Line2D, inferior_dir, spacing,
                slice_index: int = 0) -> Measurement:
    left = labels2d == LEFT
    right = labels2d == RIGHT
    if not left.any() or not right.any():
        raise MeasurementError("both hemispheres are required for CBD")
    mask = left | right
    prof = width_profile(mask, line, spacing, superior_sign=_superior_sign(line, inferior_dir))
    note = None
    try:
        f = locate_sylvian_fissure(prof)
        sup = prof.superior_sign * (prof.t - prof.t[f]) > 0
    except FissureNotFound as exc:
        f = None
        sup = np.ones(len(prof), dtype=bool)
        note = f"{exc}; CBD taken at the global maximum width"
    valid = sup & (prof.extreme_pixels[:, 0] >= 0)
    cand = np.flatnonzero(valid)
    k = int(cand[np.argmax(prof.extent[cand])])
    pts = pixel_centers_mm(mask, spacing)
    t, d = _profile_coords(pts, line)
    i_lo, i_hi = prof.extreme_pixels[k]
    t_ref = 0.5 * (t[i_lo] + t[i_hi])
    base = t_ref * line.direction - line.c * line.normal
    ea = base + d[i_lo] * line.normal
    eb = base + d[i_hi] * line.normal
    aux = {
        "fissure_t_mm": None if f is None else float(prof.t[f]),
        "width_t_mm": float(prof.t[k]),
        "mass_center_t_mm": prof.t_center,
    }
    if note:
        aux["note"] = note
    return Measurement("CBD", slice_index, tuple(ea), tuple(eb), aux)


def ray_to_rect(p0, direction, rect) -> np.ndarray:
    """Where the ray from ``p0`` along ``direction`` leaves ``rect``."""
    xmin, ymin, xmax, ymax = rect
    dx, dy = direction
    ts = []
    if dx > 0:
        ts.append((xmax - p0[0]) / dx)
    elif dx < 0:
        ts.append((xmin - p0[0]) / dx)
    if dy > 0:
        ts.append((ymax - p0[1]) / dy)
    elif dy < 0:
        ts.append((ymin - p0[1]) / dy)
    return np.asarray(p0) + min(ts) * np.asarray(direction)


def _local_abs_maxima(a: np.ndarray) -> list:
    """Interior local maxima of ``a``; plateaus report their first index."""
    out = []
    n = len(a)
    i = 1
    while i < n - 1:
        if a[i] > a[i - 1]:
            j = i
            while j + 1 < n and a[j + 1] == a[i]:
                j += 1
            if j + 1 >= n or a[j + 1] < a[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return out


def _refine(deriv: np.ndarray, i: int) -> float:
    """Weighted centre (in samples) of the half-maximum run around extremum ``i``."""
    sign = np.sign(deriv[i])
    mag = np.abs(deriv)
    half = 0.5 * mag[i]
    lo = i
    while lo - 1 >= 0 and np.sign(deriv[lo - 1]) == sign and mag[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi + 1 < len(deriv) and np.sign(deriv[hi + 1]) == sign and mag[hi + 1] >= half:
        hi += 1
    w = mag[lo:hi + 1]
    return float(np.dot(np.arange(lo, hi + 1), w) / w.sum())


def skull_point_on_ray(deriv: np.ndarray, tau_rel: float = 0.2):
    """Pick the inner-skull sample on one outward ray.

    Among local maxima of ``|deriv|`` past the start that reach ``tau_rel``
    times the ray maximum, take the two nearest the start and keep the
    stronger. Returns ``(index, refined_position_in_samples)``.
    """
    mag = np.abs(deriv)
    top = mag.max()
    if top <= 0:
        raise SkullNotFound("skull not found: flat profile")
    ext = [i for i in _local_abs_maxima(mag) if i >= 1 and mag[i] >= tau_rel * top]
    if not ext:
        raise SkullNotFound("skull not found")
    near = ext[:2]
    i = max(near, key=lambda j: (mag[j], -j))
    return i, _refine(deriv, i)


def compute_bbd(image: np.ndarray, cbd: Measurement, spacing, tau_rel: float = 0.2,
                rect=None) -> Measurement:
    """Extend the CBD segment outward to the inner skull on both sides.

    ``rect`` bounds the rays in mm ``(xmin, ymin, xmax, ymax)``; by default
    the outermost pixel centres of ``image``.
    """
    h, w = image.shape
    if rect is None:
        rect = (0.0, 0.0, (w - 1) * spacing[0], (h - 1) * spacing[1])
    step = 0.5 * min(spacing[0], spacing[1])
    a = np.array(cbd.endpoint_a)
    b = np.array(cbd.endpoint_b)
    if np.allclose(a, b):
        raise MeasurementError("degenerate CBD segment")
    skull = []
    rays = {}
    for name, start, other in (("a", a, b), ("b", b, a)):
        direction = (start - other) / np.hypot(*(start - other))
        end = ray_to_rect(start, direction, rect)
        try:
            _, deriv = line_intensity_derivative(image, start, end, step, spacing)
        except ValueError as exc:
            raise SkullNotFound(f"skull not found on side {name}: {exc}") from exc
        try:
            i, pos = skull_point_on_ray(deriv.values, tau_rel)
        except SkullNotFound as exc:
            raise SkullNotFound(f"{exc} on side {name}") from exc
        skull.append(start + pos * step * direction)
        rays[name] = float(pos * step)
    aux = {"cbd_mm": cbd.value_mm, "offset_a_mm": rays["a"], "offset_b_mm": rays["b"]}
    return Measurement("BBD", cbd.slice_index, tuple(skull[0]), tuple(skull[1]), aux)


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and (
                (out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])
            ) <= 0:
                out.pop()
            out.append(tuple(p))
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


def _area2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_diameter(points):
    """Farthest pair ``(p, q, length)`` by rotating calipers over the hull."""
    hull = convex_hull(points)
    if len(hull) < 2:
        raise MeasurementError("need at least two distinct points")
    if len(hull) == 2:
        p, q = hull
        return p, q, float(np.hypot(*(p - q)))
    m = len(hull)
    best = (-1.0, 0, 0)
    j = 1
    for i in range(m):
        ni = (i + 1) % m
        # advance j while the triangle (i, i+1, j+1) grows
        while _area2(hull[i], hull[ni], hull[(j + 1) % m]) > _area2(hull[i], hull[ni], hull[j]):
            j = (j + 1) % m
        for a_idx in (i, ni):
            d2 = float(np.sum((hull[a_idx] - hull[j]) ** 2))
            if d2 > best[0]:
                best = (d2, a_idx, j)
    d2, i, j = best
    return hull[i], hull[j], math.sqrt(d2)


def min_area_rect(points) -> OrientedRect:
    """Minimum-area enclosing rectangle; one side is flush with a hull edge."""
    hull = convex_hull(points)
    if len(hull) < 2:
        raise MeasurementError("need at least two distinct points")
    if len(hull) == 2:
        p, q = hull
        v = q - p
        ang = fold_angle(math.degrees(math.atan2(v[1], v[0])))
        return OrientedRect(tuple((p + q) / 2), (float(np.hypot(*v)) / 2, 0.0), ang)
    best = None
    m = len(hull)
    for i in range(m):
        e = hull[(i + 1) % m] - hull[i]
        u = e / np.hypot(*e)
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        lu, hu_ = pu.min(), pu.max()
        lv, hv = pv.min(), pv.max()
        area = (hu_ - lu) * (hv - lv)
        if best is None or area < best[0] * (1 - 1e-12):
            best = (area, u, v, lu, hu_, lv, hv)
    _, u, v, lu, hu_, lv, hv = best
    center = u * (lu + hu_) / 2 + v * (lv + hv) / 2
    eu, ev = (hu_ - lu) / 2, (hv - lv) / 2
    axis = u if eu >= ev else v
    ang = fold_angle(math.degrees(math.atan2(axis[1], axis[0])))
    return OrientedRect(tuple(center), (float(max(eu, ev)), float(min(eu, ev))), ang)


_FOUR = ndimage.generate_binary_structure(2, 1)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one background 4-neighbour (image edge counts)."""
    mask = np.asarray(mask, dtype=bool)
    interior = ndimage.binary_erosion(mask, structure=_FOUR, border_value=0)
    return mask & ~interior


def compute_tcd(cerebellum: np.ndarray, spacing, slice_index: int = 0) -> Measurement:
    mask = np.asarray(cerebellum, dtype=bool)
    if mask.sum() < 2:
        raise MeasurementError("cerebellum too small for TCD")
    pts = pixel_centers_mm(boundary_pixels(mask), spacing)
    p, q, _ = convex_hull_diameter(pts)
    rect = min_area_rect(pts)
    hull_angle = fold_angle(math.degrees(math.atan2(q[1] - p[1], q[0] - p[0])))
    aux = {"hull_angle_deg": hull_angle, "rect_angle_deg": rect.angle_deg}
    return Measurement("TCD", slice_index, tuple(p), tuple(q), aux)


def cerebellum_mask(labels2d: np.ndarray) -> np.ndarray:
    return labels2d == CEREBELLUM
