"""Mid-sagittal line per slice and inferior/superior brain orientation.

The line is the soft-margin linear SVM separating left from right hemisphere
pixels. Orientation comes from the side of the line's perpendicular bisector
(inside the ROI) on which the cerebellum lies; slices without cerebellum
inherit it from the nearest slice that has one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .core import LEFT, RIGHT, Line2D, pixel_centers_mm


class NotSeparable(ValueError):
    pass


class MslError(RuntimeError):
    pass


class OrientationError(ValueError):
    pass


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 10.0
    max_iter: int = 100_000_000
    window: int = 1000
    min_iter: int = 100_000
    rel_tol: float = 1e-8
    seed: int = 0
    max_points_per_class: int = 2000
    min_points_per_class: int = 20


@dataclass(frozen=True)
class SvmResult:
    weights: tuple
    bias: float
    converged: bool
    iterations: int
    objective: float
    center: tuple = (0.0, 0.0)

    def line(self) -> Line2D:
        """``w . (x - center) - bias = 0`` as a normalized line."""
        w0, w1 = self.weights
        if w0 == 0 and w1 == 0:
            raise MslError("degenerate SVM weights")
        cx, cy = self.center
        return Line2D(w0, w1, -(self.bias + w0 * cx + w1 * cy))


@njit(cache=True, fastmath=True)
def _hinge_sum(x0, x1, y, w0, w1, b):
    s = 0.0
    for i in range(x0.shape[0]):
        s += max(1.0 - y[i] * (w0 * x0[i] + w1 * x1[i] - b), 0.0)
    return s


@njit(cache=True)
def _objective(X, y, w0, w1, b, lam):
    s = _hinge_sum(np.ascontiguousarray(X[:, 0]), np.ascontiguousarray(X[:, 1]), y, w0, w1, b)
    return s / X.shape[0] + lam * (w0 * w0 + w1 * w1)


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _splitmix64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _optimal_bias(scores, y):
    # Each sample's hinge has one kink in b: at s - 1 (y = +1, slope +1 to the
    # right of it) or s + 1 (y = -1, slope -1 to the left). The right slope at
    # b is therefore #{kinks <= b} - n_neg, so the flat minimum lies between
    # the n_neg-th and (n_neg + 1)-th smallest kink.
    v = np.empty(scores.shape[0])
    k = 0
    for i in range(scores.shape[0]):
        if y[i] > 0:
            v[i] = scores[i] - 1.0
        else:
            v[i] = scores[i] + 1.0
            k += 1
    p = np.partition(v, k - 1)
    lo = p[k - 1]
    hi = p[k]
    for i in range(k + 1, p.shape[0]):
        hi = min(hi, p[i])
    return 0.5 * (lo + hi)


@njit(cache=True)
def _sgd(X, y, lam, max_iter, window, min_iter, rel_tol, seed):
    state = np.uint64(seed)
    x0 = np.ascontiguousarray(X[:, 0])
    x1 = np.ascontiguousarray(X[:, 1])
    inv_n = 1.0 / X.shape[0]
    w0 = 0.0
    w1 = 0.0
    b = 0.0
    a0 = 0.0
    a1 = 0.0
    best = _hinge_sum(x0, x1, y, 0.0, 0.0, 0.0) * inv_n
    best_w0 = 0.0
    best_w1 = 0.0
    prev_best = best
    perm = np.arange(X.shape[0])
    pos = X.shape[0]
    t = 0
    converged = False
    while t < max_iter:
        stop = min(t + window, max_iter)
        while t < stop:
            t += 1
            if pos == perm.shape[0]:
                # new epoch: Fisher-Yates shuffle, multiply-shift index draws
                for j in range(perm.shape[0] - 1, 0, -1):
                    state, r = _splitmix64(state)
                    k = np.int64(((r >> np.uint64(32)) * np.uint64(j + 1)) >> np.uint64(32))
                    tmp = perm[j]
                    perm[j] = perm[k]
                    perm[k] = tmp
                pos = 0
            i = perm[pos]
            pos += 1
            eta = 1.0 / (lam * t)
            shrink = 1.0 - 2.0 * lam * eta
            yi = y[i]
            # branch-free: g is eta * y_i when the hinge is active, else 0
            g = eta * yi if yi * (w0 * x0[i] + w1 * x1[i] - b) < 1.0 else 0.0
            w0 = shrink * w0 + g * x0[i]
            w1 = shrink * w1 + g * x1[i]
            # iterate averaging with weights proportional to t
            rho = 2.0 / (t + 1.0)
            a0 += rho * (w0 - a0)
            a1 += rho * (w1 - a1)
        # b is unregularized and a 1/(lam t) step would barely move it, so it
        # is re-solved exactly once per window
        b = _optimal_bias(w0 * x0 + w1 * x1, y)
        ab = _optimal_bias(a0 * x0 + a1 * x1, y)
        obj = _hinge_sum(x0, x1, y, a0, a1, ab) * inv_n + lam * (a0 * a0 + a1 * a1)
        if obj < best:
            best = obj
            best_w0 = a0
            best_w1 = a1
        if t >= min_iter and prev_best - best < rel_tol * abs(prev_best):
            converged = True
            break
        prev_best = best
    return best_w0, best_w1, t, converged


def optimal_bias(scores: np.ndarray, y: np.ndarray) -> float:
    """Exact minimizer of the mean hinge loss over the bias for fixed scores.

    The loss is convex and piecewise linear in the bias; when the minimum is a
    flat interval its midpoint is returned.
    """
    return float(_optimal_bias(np.asarray(scores, dtype=float), np.asarray(y, dtype=float)))


def fit_linear_svm(points, labels, lam: float = 10.0, max_iter: int = 100_000_000,
                   seed: int = 0, *, window: int = 1000, min_iter: int = 100_000,
                   rel_tol: float = 1e-8) -> SvmResult:
    """Minimize ``mean(max(0, 1 - y (w.x - b))) + lam |w|^2``.

    Single-sample stochastic subgradient steps on ``w`` of size
    ``1 / (lam t)`` on centred points, samples drawn by seeded reshuffling,
    with weighted iterate averaging. The bias is re-solved exactly once per
    ``window`` iterations, and the averaged iterate's objective (at its own
    exact bias) is evaluated. After ``min_iter`` the run stops once the best
    objective improves by less than ``rel_tol`` (relative) over a window.
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) != len(y):
        raise ValueError("points must be (n, 2) with one label each")
    if len(X) < 2 or not (np.any(y > 0) and np.any(y < 0)):
        raise NotSeparable("not separatable task")
    if not np.all(np.abs(y) == 1):
        raise ValueError("labels must be +1 or -1")
    center = X.mean(axis=0)
    Xc = np.ascontiguousarray(X - center)
    w0, w1, iters, converged = _sgd(Xc, y, float(lam), int(max_iter), int(window),
                                    int(min_iter), float(rel_tol), int(seed))
    b = optimal_bias(Xc @ np.array([w0, w1]), y)
    obj = float(_objective(Xc, y, w0, w1, b, float(lam)))
    return SvmResult((float(w0), float(w1)), float(b), bool(converged), int(iters), obj,
                     (float(center[0]), float(center[1])))


def hemisphere_points(labels2d: np.ndarray, spacing, max_per_class: int = 2000, seed: int = 0):
    """Left (y = -1) and right (y = +1) pixel centres in mm, subsampled per class."""
    rng = np.random.default_rng(seed)
    pts, ys = [], []
    for cls, sign in ((LEFT, -1.0), (RIGHT, 1.0)):
        p = pixel_centers_mm(labels2d == cls, spacing)
        if len(p) > max_per_class:
            p = p[np.sort(rng.choice(len(p), max_per_class, replace=False))]
        pts.append(p)
        ys.append(np.full(len(p), sign))
    return pts, ys


def msl_for_slice(labels2d: np.ndarray, spacing, config: SvmConfig = SvmConfig()):
    """Fit the mid-sagittal line of one slice; returns ``(Line2D, SvmResult)``.

    Raises ``MslError`` when a hemisphere is missing (or smaller than
    ``config.min_points_per_class``) or when the SVM does not converge.
    """
    (left, right), (yl, yr) = hemisphere_points(labels2d, spacing, config.max_points_per_class,
                                                config.seed)
    if min(len(left), len(right)) < max(config.min_points_per_class, 1):
        raise MslError("missing hemisphere")
    res = fit_linear_svm(np.vstack([left, right]), np.concatenate([yl, yr]), config.lam,
                         config.max_iter, config.seed, window=config.window,
                         min_iter=config.min_iter, rel_tol=config.rel_tol)
    if not res.converged:
        raise MslError(f"SVM did not converge in {res.iterations} iterations")
    return res.line(), res


def line_angle_deg(line: Line2D) -> float:
    return line.angle_deg()


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def line_rect_intersections(line: Line2D, rect, tol: float = 1e-9):
    """The two points where ``line`` crosses the border of ``rect``.

    ``rect`` is ``(xmin, ymin, xmax, ymax)``. Points are returned sorted by
    ``(x, y)``.
    """
    xmin, ymin, xmax, ymax = rect
    a, b, c = line.coefficients
    hits = []
    if abs(b) > tol:
        for x in (xmin, xmax):
            y = -(a * x + c) / b
            if ymin - tol <= y <= ymax + tol:
                hits.append((x, min(max(y, ymin), ymax)))
    if abs(a) > tol:
        for y in (ymin, ymax):
            x = -(b * y + c) / a
            if xmin - tol <= x <= xmax + tol:
                hits.append((min(max(x, xmin), xmax), y))
    uniq = []
    for p in sorted(hits):
        if not uniq or math.hypot(p[0] - uniq[-1][0], p[1] - uniq[-1][1]) > 1e-6:
            uniq.append(p)
    if len(uniq) < 2:
        raise OrientationError("line does not cross the ROI")
    if len(uniq) > 2:
        # a corner counted twice with rounding noise: keep the two farthest apart
        pairs = [(math.dist(p, q), p, q) for i, p in enumerate(uniq) for q in uniq[i + 1:]]
        _, p, q = max(pairs)
        uniq = sorted([p, q])
    return np.array(uniq[0]), np.array(uniq[1])


@dataclass(frozen=True)
class Orientation:
    """Which way along the slice's MSL is inferior."""

    inferior_dir: tuple
    b0: tuple
    b1: tuple
    c: tuple
    q: tuple
    signs: tuple = ()
    consistent: bool = True
    source: Optional[int] = None  # slice the labelling came from (None: own cerebellum)

    @property
    def inferior_point(self) -> np.ndarray:
        """The border intersection on the inferior side."""
        c = np.array(self.c)
        for p in (self.b0, self.b1):
            if np.dot(np.array(p) - c, self.inferior_dir) > 0:
                return np.array(p)
        return np.array(self.b1)


def _anchor_points(line: Line2D, rect):
    b0, b1 = line_rect_intersections(line, rect)
    c = 0.5 * (b0 + b1)
    if math.dist(b0, b1) < 1e-6:
        raise OrientationError("degenerate ROI crossing")
    normal_line = Line2D.through(c, line.normal)
    n0, n1 = line_rect_intersections(normal_line, rect)
    # deterministic choice: the crossing with the larger x (then larger y)
    q = max((tuple(n0), tuple(n1)))
    return b0, b1, c, np.array(q)


def slice_orientation(line: Line2D, rect, cerebellum_points, k: int = 5, seed: int = 0):
    """Classify ``k`` sampled cerebellum points by ``sign(cross(C - Q, P - C))``.

    Returns an ``Orientation`` whose ``inferior_dir`` points along the MSL
    towards the majority side; ``consistent`` is false when the sampled
    signs disagree.
    """
    pts = np.asarray(cerebellum_points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise OrientationError("empty cerebellum")
    b0, b1, c, q = _anchor_points(line, rect)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pts), size=k, replace=len(pts) < k)
    qc = c - q
    signs = tuple(int(np.sign(_cross(qc, p - c))) for p in pts[idx])
    total = sum(signs)
    majority = 1 if total > 0 else -1 if total < 0 else (signs[0] or 1)
    along = np.array([-qc[1], qc[0]]) / np.hypot(*qc)
    inferior = majority * along
    consistent = len(set(signs)) == 1 and signs[0] != 0
    return Orientation(tuple(inferior), tuple(b0), tuple(b1), tuple(c), tuple(q), signs,
                       consistent, None)


def propagate_orientation(lines: Sequence[Optional[Line2D]], rect,
                          known: dict) -> list:
    """Fill in orientations for slices without cerebellum.

    ``known`` maps slice index to the ``Orientation`` derived from its own
    cerebellum. Every other slice with a line takes the labelling of the
    nearest known slice (lower index on ties): its two ROI crossings are
    paired with that slice's inferior/superior crossings by least total
    in-plane distance.
    """
    if not known:
        raise OrientationError("no slice has a cerebellum")
    src_idx = np.array(sorted(known))
    out = []
    for k, line in enumerate(lines):
        if k in known:
            out.append(known[k])
            continue
        if line is None:
            out.append(None)
            continue
        src = known[int(src_idx[np.argmin(np.abs(src_idx - k))])]
        b0, b1, c, q = _anchor_points(line, rect)
        inf_pt = src.inferior_point
        sup_pt = np.array(src.b0) if np.allclose(inf_pt, src.b1) else np.array(src.b1)
        keep = np.linalg.norm(b0 - inf_pt) + np.linalg.norm(b1 - sup_pt)
        swap = np.linalg.norm(b1 - inf_pt) + np.linalg.norm(b0 - sup_pt)
        inferior_end = b0 if keep <= swap else b1
        d = inferior_end - c
        d = d / np.hypot(*d)
        src_slice = src.source if src.source is not None else int(
            src_idx[np.argmin(np.abs(src_idx - k))])
        out.append(Orientation(tuple(d), tuple(b0), tuple(b1), tuple(c), tuple(q), (), True,
                               src_slice))
    return out
