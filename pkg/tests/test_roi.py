import numpy as np
import pytest
from hypothesis import given, strategies as st

from fetalbiometry.core import LabelMap, RoiBox, Volume
from fetalbiometry.roi import NoForeground, prepare_slices, square_window, tight_bbox


def _labels(shape=(6, 12, 14)):
    return np.zeros(shape, np.uint8)


def test_tight_bbox_single_voxel():
    lab = _labels()
    lab[5, 4, 3] = 1  # z, y, x
    box = tight_bbox(LabelMap(lab, (1, 1, 1)))
    assert box.lo == (3, 4, 5) and box.hi == (3, 4, 5)


def test_tight_bbox_full_and_empty():
    lab = np.full((3, 4, 5), 2, np.uint8)
    box = tight_bbox(LabelMap(lab, (1, 1, 1)))
    assert box.lo == (0, 0, 0) and box.hi == (4, 3, 2)
    with pytest.raises(NoForeground, match="no foreground"):
        tight_bbox(LabelMap(_labels(), (1, 1, 1)))


def test_window_side_from_larger_extent():
    roi = RoiBox((20, 30, 0), (79, 69, 3))  # w = 60, h = 40
    x0, y0, w, h = square_window(roi, (200, 200, 4))
    assert (w, h) == (90, 90)
    # no clamping: the window is centred on the ROI
    assert x0 + (w - 1) / 2 == pytest.approx((20 + 79) / 2, abs=0.5)
    assert y0 + (h - 1) / 2 == pytest.approx((30 + 69) / 2, abs=0.5)


def test_window_shifted_inward_and_capped():
    roi = RoiBox((0, 0, 0), (39, 9, 0))
    x0, y0, w, h = square_window(roi, (100, 50, 1))
    assert (x0, y0, w, h) == (0, 0, 60, 50)


def test_prepare_slices_dims_and_range():
    rng = np.random.default_rng(0)
    vol = Volume(rng.random((3, 80, 90)) * 500, (0.8, 0.8, 4))
    roi = RoiBox((20, 30, 0), (79, 69, 2))
    st_ = prepare_slices(vol, roi)
    assert st_.images.shape == (3, 224, 224)
    assert st_.images.min() == 0.0 and st_.images.max() == 1.0


@given(st.floats(0, 223), st.floats(0, 223))
def test_prepared_coordinate_round_trip(u, v):
    vol = Volume(np.zeros((1, 100, 120)), (1, 1, 1))
    st_ = prepare_slices(vol, RoiBox((30, 20, 0), (70, 60, 0)))
    x, y = st_.to_volume(u, v)
    u2, v2 = st_.from_volume(x, y)
    assert abs(u2 - u) < 0.5 and abs(v2 - v) < 0.5


def test_circle_stays_circular():
    yy, xx = np.mgrid[0:120, 0:140]
    disc = ((xx - 70) ** 2 + (yy - 60) ** 2 <= 20 ** 2).astype(float)
    vol = Volume(disc[None], (1, 1, 1))
    st_ = prepare_slices(vol, RoiBox((50, 40, 0), (90, 80, 0)))
    img = st_.images[0] > 0.5
    r, c = np.nonzero(img)
    cov = np.cov(np.vstack([c, r]))
    ev = np.sort(np.linalg.eigvalsh(cov))
    ecc = np.sqrt(1 - ev[0] / ev[1])
    assert ecc < 0.05
