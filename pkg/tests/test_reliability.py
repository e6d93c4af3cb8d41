import numpy as np
import pytest

from fetalbiometry import reliability
from fetalbiometry.core import CEREBELLUM
from fetalbiometry.measure import compute_tcd
from fetalbiometry.phantom import PhantomSpec, corrupt_bbd, corrupt_tcd, generate
from fetalbiometry.reliability import (ReliabilityConfig, check_bbd_stability,
                                       check_msl_smoothness, check_orientation_consistency,
                                       check_slice_confidence, check_tcd_angles)
from fetalbiometry.slice_select import Selection


@pytest.mark.parametrize("p,warn", [(0.9, False), (0.49, True), (0.5, False)])
def test_slice_confidence(p, warn):
    w = check_slice_confidence(Selection(3, p))
    assert (w is not None) == warn
    if warn:
        assert w.code == "SLICE_CONF_CBD"
    w = check_slice_confidence(Selection(3, p), task="TCD")
    assert (w is not None) == warn and (not warn or w.code == "SLICE_CONF_TCD")


def test_orientation_consistency():
    assert check_orientation_consistency((1, 1, 1, 1, 1)) is None
    w = check_orientation_consistency((1, 1, -1, 1, 1), 7)
    assert w.code == "ORIENT_INCONSISTENT" and "slice 7" in w.detail
    assert check_orientation_consistency((0, 0, 0)) is not None


def test_msl_smoothness():
    assert check_msl_smoothness([90.0] * 6) is None
    w = check_msl_smoothness([90.0, 110.0])
    assert w.code == "MSL_ROUGH"
    assert check_msl_smoothness([179.0, 1.0]) is None
    # missing slices break adjacency
    assert check_msl_smoothness([90.0, None, 130.0]) is None
    assert check_msl_smoothness([90.0, 105.0], ReliabilityConfig(msl_adjacent_angle_deg=20)) is None


def test_tcd_angles():
    assert check_tcd_angles(30.0, 31.0) is None
    assert check_tcd_angles(30.0, 40.0) is None  # exactly 10: strict
    assert check_tcd_angles(175.0, 4.0) is None
    assert check_tcd_angles(30.0, 45.0).code == "TCD_ANGLES"


def test_tcd_angles_l_shape():
    mask = np.zeros((60, 60), bool)
    mask[45:53, 5:55] = True
    mask[20:53, 5:13] = True
    m = compute_tcd(mask, (1.0, 1.0))
    assert check_tcd_angles(m.aux["hull_angle_deg"], m.aux["rect_angle_deg"]).code == "TCD_ANGLES"
    ph = corrupt_tcd(generate(PhantomSpec()))
    m = compute_tcd(ph.labels.slice(ph.spec.tcd_slice) == CEREBELLUM, (0.75, 0.75))
    assert check_tcd_angles(m.aux["hull_angle_deg"], m.aux["rect_angle_deg"]) is not None


def test_config_validation():
    with pytest.raises(ValueError):
        ReliabilityConfig(slice_prob_threshold=0)
    with pytest.raises(ValueError):
        ReliabilityConfig(orientation_samples=1)
    with pytest.raises(ValueError):
        ReliabilityConfig(clahe_tile=(0, 20))


def _cbd(report):
    return report.measurements["CBD"]


def test_bbd_stable_on_clean_phantom(default_phantom, default_report):
    ph, rep = default_phantom, default_report
    cbd = _cbd(rep)
    img = ph.volume.slice(cbd.slice_index)
    a = rep.measurements["BBD"]
    from fetalbiometry.measure import compute_bbd

    b = compute_bbd(reliability.clahe_slice(img), cbd, ph.spec.spacing_mm[:2],
                    rect=(0, 0, 119.25, 119.25))
    assert abs(a.value_mm - b.value_mm) < 1.0
    assert check_bbd_stability(img, cbd, ph.spec.spacing_mm[:2], bbd=a) is None


def test_bbd_fails_under_clahe_only(default_phantom, default_report, monkeypatch):
    ph, rep = default_phantom, default_report
    cbd = _cbd(rep)
    img = ph.volume.slice(cbd.slice_index)
    monkeypatch.setattr(reliability, "clahe_slice", lambda image, cfg=None: np.full_like(image, 0.5))
    w = check_bbd_stability(img, cbd, ph.spec.spacing_mm[:2])
    assert w.code == "BBD_UNSTABLE" and "CLAHE" in w.detail


def test_bbd_stripe_warns():
    from fetalbiometry.phantom import BBD_SCENARIO_CSF_GAP_MM
    from fetalbiometry.pipeline import run_pipeline

    ph = corrupt_bbd(generate(PhantomSpec(csf_gap_mm=BBD_SCENARIO_CSF_GAP_MM)))
    rep = run_pipeline(ph.volume, ph.labels, ph.probabilities)
    assert rep.warning_codes == {"BBD_UNSTABLE"}


def test_checks_deterministic(default_phantom):
    from fetalbiometry.pipeline import run_pipeline

    ph = corrupt_tcd(default_phantom)
    a = run_pipeline(ph.volume, ph.labels, ph.probabilities)
    b = run_pipeline(ph.volume, ph.labels, ph.probabilities)
    assert a.warnings == b.warnings
