import numpy as np
import pytest
from scipy import ndimage

from fetalbiometry.core import CEREBELLUM, LEFT, RIGHT, fold_angle_diff
from fetalbiometry.phantom import (PhantomSpec, PhantomSpecError, SWEEP_B_MM, generate,
                                   sweep_specs)
from fetalbiometry.pipeline import run_pipeline
from fetalbiometry.slice_select import select_reference


def test_truth_by_construction(default_phantom):
    t = default_phantom.truth
    assert t.cbd_mm == 80.0 and t.bbd_mm == 88.0
    assert t.tcd_mm == 40.0
    assert (t.cbd_slice, t.tcd_slice) == (12, 16)
    assert t.bbd_mm > t.cbd_mm


def test_unrotated_msl_vertical(default_phantom, default_report):
    assert default_phantom.truth.msl.angle_deg() == pytest.approx(90.0)
    for ln in default_report.lines:
        if ln is not None:
            assert fold_angle_diff(ln.angle_deg(), 90.0) < 1.0


def test_default_recovery_within_budget(default_phantom, default_report):
    t, m = default_phantom.truth, default_report.measurements
    assert abs(m["CBD"].value_mm - t.cbd_mm) <= 1.5
    assert abs(m["BBD"].value_mm - t.bbd_mm) <= 1.5
    assert abs(m["TCD"].value_mm - t.tcd_mm) <= 1.5


def test_regeneration_bit_exact():
    spec = PhantomSpec(msl_angle_deg=12.0, seed=7)
    a, b = generate(spec), generate(spec)
    assert a.volume.voxels.tobytes() == b.volume.voxels.tobytes()
    assert a.labels.labels.tobytes() == b.labels.labels.tobytes()
    assert a.probabilities == b.probabilities
    c = generate(spec.with_(seed=8))
    assert a.volume.voxels.tobytes() != c.volume.voxels.tobytes()


def test_noise_and_range(default_phantom):
    v = default_phantom.volume.voxels
    assert v.dtype == np.float32 and v.min() >= 0 and v.max() <= 1
    clean = generate(PhantomSpec(noise_sigma=0.0)).volume.voxels
    assert np.std(v - clean) == pytest.approx(0.01, rel=0.1)


@pytest.mark.parametrize("theta", [0.0, 17.0, -25.0])
def test_hemispheres_mirror_across_msl(theta):
    ph = generate(PhantomSpec(msl_angle_deg=theta, noise_sigma=0.0))
    sx, sy, _ = ph.spec.spacing_mm
    line = ph.truth.msl
    for k in ph.truth.cerebrum_slices[::3]:
        lab = ph.labels.slice(k)
        right = lab == RIGHT
        dist = ndimage.distance_transform_edt(~right)
        r, c = np.nonzero(lab == LEFT)
        p = np.c_[c * sx, r * sy]
        refl = p - 2 * line.signed_distance(p)[:, None] * line.normal
        rc = np.round(refl[:, 1] / sy).astype(int)
        cc = np.round(refl[:, 0] / sx).astype(int)
        assert np.all(dist[rc, cc] <= 1.0 + 1e-9)


def test_cerebellum_inferior_and_classes(default_phantom):
    ph = default_phantom
    lab = ph.labels.labels
    assert set(np.unique(lab)) == {0, LEFT, RIGHT, CEREBELLUM}
    k = ph.truth.tcd_slice
    sx, sy, _ = ph.spec.spacing_mm
    r, c = np.nonzero(lab[k] == CEREBELLUM)
    cb = np.c_[c * sx, r * sy].mean(axis=0)
    r, c = np.nonzero((lab[ph.truth.cbd_slice] == LEFT) | (lab[ph.truth.cbd_slice] == RIGHT))
    cr = np.c_[c * sx, r * sy].mean(axis=0)
    assert np.dot(cb - cr, ph.truth.inferior_dir) > 0


def test_probabilities_peak_at_truth():
    ph = generate(PhantomSpec(prob_noise=0.0))
    assert select_reference(ph.probabilities["CBD_BBD"]).index == ph.truth.cbd_slice
    assert select_reference(ph.probabilities["TCD"]).index == ph.truth.tcd_slice


@pytest.mark.parametrize("kw", [
    {"fissure_offset_mm": 0.0},
    {"b_mm": 70.0},
    {"cerebellum_offset_mm": 60.0},
    {"tcd_slice": 30},
])
def test_invalid_specs_rejected(kw):
    with pytest.raises(PhantomSpecError):
        generate(PhantomSpec(**kw))


def test_spec_dict_round_trip():
    spec = PhantomSpec(msl_angle_deg=5.0, cerebellum_semi_axes_mm=(18.0, 8.0, 7.0))
    d = spec.to_dict()
    assert PhantomSpec.from_dict({k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}) == spec
    with pytest.raises(PhantomSpecError):
        PhantomSpec.from_dict({"bogus": 1})


def test_cbd_tracks_b():
    values = []
    for b in SWEEP_B_MM:
        ph = generate(PhantomSpec(b_mm=b, seed=3))
        values.append(run_pipeline(ph.volume, ph.labels, ph.probabilities).measurements["CBD"].value_mm)
    steps = np.diff(values)
    assert np.all(np.abs(steps - 2 * np.diff(SWEEP_B_MM)) <= 1.5)


def test_sweep_design():
    specs = sweep_specs(20)
    pairs = {(s.msl_angle_deg, s.b_mm) for s in specs}
    assert len(pairs) == 20
    assert {s.seed for s in specs} == set(range(20))
    assert all(s.noise_sigma == 0.01 and s.prob_noise == 0.0 for s in specs)
