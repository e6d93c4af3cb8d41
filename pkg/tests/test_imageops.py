import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fetalbiometry.imageops import (adjust_brightness, adjust_contrast, bilinear_resize, clahe,
                                    clahe_tile_maps, clean_label_slice, keep_largest_components,
                                    line_intensity_derivative, normalize01)

unit = st.floats(0.0, 1.0)


# --- resize -----------------------------------------------------------------

def test_resize_constant_and_identity():
    img = np.full((5, 7), 0.3)
    assert np.allclose(bilinear_resize(img, (11, 3)), 0.3)
    rnd = np.random.default_rng(0).random((6, 9))
    assert np.array_equal(bilinear_resize(rnd, rnd.shape), rnd)


def test_resize_align_corners_row():
    out = bilinear_resize(np.array([[0.0, 1.0]]), (1, 3))
    assert np.allclose(out, [[0.0, 0.5, 1.0]])


@given(arrays(float, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=unit),
       st.integers(1, 12), st.integers(1, 12))
def test_resize_no_overshoot(img, h, w):
    out = bilinear_resize(img, (h, w))
    assert out.shape == (h, w)
    assert out.min() >= img.min() - 1e-12
    assert out.max() <= img.max() + 1e-12


# --- normalization and intensity adjustments -------------------------------

def test_normalize01():
    img = np.arange(2, 11, dtype=float).reshape(3, 3)
    out = normalize01(img)
    assert out.min() == 0.0 and out.max() == 1.0
    assert np.allclose(out, (img - 2) / 8)
    assert np.array_equal(normalize01(np.full((3, 3), 7.0)), np.zeros((3, 3)))
    ref = np.array([[0.0, 0.25], [0.5, 1.0]])
    assert np.array_equal(normalize01(ref), ref)


def test_brightness_examples():
    img = np.random.default_rng(1).uniform(0.01, 0.99, (8, 8))
    assert np.max(np.abs(adjust_brightness(img, 0.5) - img)) < 1e-12
    for c in (0.1, 0.3, 0.8, 0.95):
        assert adjust_brightness(np.array([0.5]), c)[0] == pytest.approx(c, abs=1e-12)


def test_contrast_examples():
    img = np.random.default_rng(2).uniform(0.01, 0.99, (8, 8))
    assert np.max(np.abs(adjust_contrast(img, 1.0) - img)) < 1e-12
    assert adjust_contrast(np.array([0.5]), 3.7)[0] == pytest.approx(0.5, abs=1e-12)
    # hand evaluation: logit(0.9) = ln 9, sigmoid(2 ln 9) = 81/82
    assert adjust_contrast(np.array([0.9]), 2.0)[0] == pytest.approx(81 / 82, abs=1e-12)
    assert 81 / 82 == pytest.approx(0.9878, abs=1e-4)


def test_adjustments_clamp_endpoints():
    out = adjust_contrast(np.array([0.0, 1.0]), 2.0)
    assert np.all(np.isfinite(out))
    assert 0.0 < out[0] < 1e-6 and 1 - 1e-6 < out[1] < 1.0


@given(st.lists(st.floats(1e-5, 1 - 1e-5), min_size=2, max_size=20, unique=True),
       st.floats(0.01, 0.99), st.floats(0.1, 5.0))
def test_adjustments_strictly_monotone(ps, cb, cc):
    p = np.sort(np.array(ps))
    p = p[np.concatenate([[True], np.diff(p) > 1e-9])]
    for out in (adjust_brightness(p, cb), adjust_contrast(p, cc)):
        assert np.all(np.diff(out) > 0)


# --- CLAHE ------------------------------------------------------------------

def clahe_reference(img, tile, clip):
    """Per-pixel CLAHE written from the definition, one pixel at a time."""
    h, w = img.shape
    th, tw = tile
    nbins = 256

    def bin_of(v):
        return min(int(v * nbins), nbins - 1)

    def tile_map(ti, tj):
        r0, r1 = ti * th, min((ti + 1) * th, h)
        c0, c1 = tj * tw, min((tj + 1) * tw, w)
        hist = [0.0] * nbins
        for r in range(r0, r1):
            for c in range(c0, c1):
                hist[bin_of(img[r, c])] += 1
        n = (r1 - r0) * (c1 - c0)
        if sum(1 for v in hist if v > 0) == 1:
            return [(k + 0.5) / nbins for k in range(nbins)]
        limit = clip * n
        excess = sum(max(v - limit, 0.0) for v in hist)
        hist = [min(v, limit) + excess / nbins for v in hist]
        out, acc = [], 0.0
        for v in hist:
            acc += v
            out.append(min(acc / n, 1.0))
        return out

    n_tr, n_tc = math.ceil(h / th), math.ceil(w / tw)
    maps = {(i, j): tile_map(i, j) for i in range(n_tr) for j in range(n_tc)}

    def centre(i, t, n):
        return (i * t + min((i + 1) * t, n) - 1) / 2.0

    def neighbours(p, t, n, count):
        cs = [centre(i, t, n) for i in range(count)]
        if count == 1 or p <= cs[0]:
            return 0, 0, 0.0
        if p >= cs[-1]:
            return count - 1, count - 1, 0.0
        i = max(k for k in range(count) if cs[k] <= p)
        return i, i + 1, (p - cs[i]) / (cs[i + 1] - cs[i])

    out = np.empty_like(img, dtype=float)
    for r in range(h):
        i0, i1, fr = neighbours(r, th, h, n_tr)
        for c in range(w):
            j0, j1, fc = neighbours(c, tw, w, n_tc)
            b = bin_of(img[r, c])
            v = ((1 - fr) * (1 - fc) * maps[i0, j0][b] + (1 - fr) * fc * maps[i0, j1][b]
                 + fr * (1 - fc) * maps[i1, j0][b] + fr * fc * maps[i1, j1][b])
            out[r, c] = min(max(v, 0.0), 1.0)
    return out


def test_clahe_constant_image_unchanged():
    for v in (0.0, 0.37, 1.0):
        img = np.full((45, 33), v)
        assert np.array_equal(clahe(img), img)


def test_clahe_checkerboard_matches_reference():
    yy, xx = np.mgrid[0:60, 0:70]
    img = np.where(((yy // 7) + (xx // 7)) % 2 == 0, 0.25, 0.75)
    out = clahe(img, (20, 20), 0.01)
    ref = clahe_reference(img, (20, 20), 0.01)
    assert np.max(np.abs(out - ref)) <= 1 / 255


def test_clahe_noisy_image_matches_reference():
    img = np.clip(np.random.default_rng(3).normal(0.5, 0.15, (47, 53)), 0, 1)
    for tile, clip in (((20, 20), 0.01), ((16, 10), 0.05), ((20, 20), 1.0)):
        out = clahe(img, tile, clip)
        assert np.max(np.abs(out - clahe_reference(img, tile, clip))) <= 1 / 255


def test_clahe_clip_one_is_plain_equalization():
    img = np.random.default_rng(4).random((20, 20))
    out = clahe(img, (20, 20), 1.0)
    bins = np.minimum((img * 256).astype(int), 255)
    cdf = np.cumsum(np.bincount(bins.ravel(), minlength=256)) / img.size
    assert np.allclose(out, cdf[bins])


@settings(max_examples=25, deadline=None)
@given(arrays(float, st.tuples(st.integers(5, 50), st.integers(5, 50)), elements=unit),
       st.integers(3, 25), st.integers(3, 25), st.floats(0.005, 1.0))
def test_clahe_range_and_monotone_maps(img, th, tw, clip):
    out = clahe(img, (th, tw), clip)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    maps = clahe_tile_maps(img, (th, tw), clip)
    assert np.all(np.diff(maps, axis=-1) >= -1e-12)


# --- ray profiles -----------------------------------------------------------

def test_derivative_constant_image():
    _, d = line_intensity_derivative(np.full((20, 20), 0.4), (1, 1), (15, 12), 0.5)
    assert np.allclose(d.values, 0.0)


def test_derivative_hand_example():
    img = np.array([[0.5, 0.5, 0.9, 0.9, 0.1, 0.1]] * 3)
    prof, d = line_intensity_derivative(img, (0, 1), (5, 1), 1.0)
    assert np.allclose(prof.values, [0.5, 0.5, 0.9, 0.9, 0.1, 0.1])
    assert np.allclose(d.values, [0.0, 0.2, 0.2, -0.4, -0.4, 0.0])


def test_derivative_linear_ramp():
    yy, xx = np.mgrid[0:30, 0:40]
    img = 0.01 * xx + 0.02 * yy
    spacing = (0.5, 0.8)
    p0, p1 = np.array([2.0, 3.0]), np.array([15.0, 20.0])
    _, d = line_intensity_derivative(img, p0, p1, 0.25, spacing)
    u = (p1 - p0) / np.linalg.norm(p1 - p0)
    slope = 0.01 / spacing[0] * u[0] + 0.02 / spacing[1] * u[1]
    assert np.max(np.abs(d.values - slope)) < 1e-9


def test_derivative_reversed_ray():
    img = np.random.default_rng(5).random((25, 25))
    p0, p1 = np.array([3.0, 4.0]), np.array([13.0, 4.0])
    _, d = line_intensity_derivative(img, p0, p1, 0.5)
    _, r = line_intensity_derivative(img, p1, p0, 0.5)
    assert np.allclose(d.values, -r.values[::-1])


def test_derivative_leaving_image():
    with pytest.raises(ValueError):
        line_intensity_derivative(np.zeros((10, 10)), (5, 5), (12, 5), 0.5)


# --- connected components --------------------------------------------------

def test_keep_largest_components_examples():
    m = np.zeros((10, 10), bool)
    m[0:2, 0:5] = True  # 10 px
    m[5, 5:8] = True  # 3 px
    assert np.array_equal(keep_largest_components(m, 1), m & (np.arange(10)[:, None] < 2))
    diag = np.zeros((4, 4), bool)
    diag[0, 0] = diag[1, 1] = True
    assert keep_largest_components(diag, 1).sum() == 2
    assert np.array_equal(keep_largest_components(m, 5), m)
    assert not keep_largest_components(np.zeros((3, 3), bool), 2).any()


def test_clean_label_slice_removes_specks():
    lab = np.zeros((20, 20), np.uint8)
    lab[2:10, 2:8] = 1
    lab[2:10, 9:15] = 2
    lab[14:18, 5:10] = 3
    lab[19, 19] = 1
    out = clean_label_slice(lab, 3)
    assert out[19, 19] == 0
    assert np.array_equal(out[:19], lab[:19])
