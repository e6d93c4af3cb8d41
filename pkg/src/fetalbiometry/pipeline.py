"""The five-stage measurement pipeline and the evaluation harness."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
import numpy as np

from .core import (CEREBELLUM, LEFT, RIGHT, DimensionMismatch, LabelMap, PipelineReport,
                   ReliabilityWarning, Volume, pixel_centers_mm)
from .imageops import clean_label_slice
from .measure import (MeasurementError, SkullNotFound, compute_bbd, compute_cbd, compute_tcd)
from .metrics import AgreementStats, bland_altman, slice_selection_accuracy
from .msl import (MslError, OrientationError, SvmConfig, msl_for_slice, propagate_orientation,
                  slice_orientation)
from .reliability import (ReliabilityConfig, check_bbd_stability, check_msl_smoothness,
                          check_orientation_consistency, check_slice_confidence,
                          check_tcd_angles)
from .roi import square_window, tight_bbox
from .slice_select import TASKS, SliceProbabilities, select_reference


class PipelineFailure(RuntimeError):
    """A stage failed in a way that leaves no usable report."""


@dataclass(frozen=True)
class PipelineConfig:
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    bbd_tau_rel: float = 0.2
    roi_factor: float = 1.5
    keep_components: int = 3
    probability_source: str = "file"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reliability"]["clahe_tile"] = list(self.reliability.clahe_tile)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        rel = d.pop("reliability", {})
        svm = d.pop("svm", {})
        if "clahe_tile" in rel:
            rel = {**rel, "clahe_tile": tuple(rel["clahe_tile"])}
        return cls(reliability=ReliabilityConfig(**rel), svm=SvmConfig(**svm), **d)

    def with_(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)


def _rect_mm(x0, y0, x1, y1, spacing):
    return (x0 * spacing[0], y0 * spacing[1], x1 * spacing[0], y1 * spacing[1])


def run_pipeline(vol: Volume, labels: LabelMap, probs: dict,
                 cfg: PipelineConfig = PipelineConfig(), volume_id: str = "") -> PipelineReport:
    """Measure CBD, BBD and TCD on one volume.

    ``probs`` maps each task in ``TASKS`` to its ``SliceProbabilities``.
    Input problems raise (``DimensionMismatch``, ``ValueError``); stage
    failures leave the measurement out and record why.
    """
    labels.check_matches(vol)
    nz = vol.n_slices
    for task in TASKS:
        if task not in probs:
            raise ValueError(f"missing slice probabilities for {task}")
        if len(probs[task]) != nz:
            raise DimensionMismatch(f"{task} probabilities have {len(probs[task])} entries, "
                                    f"volume has {nz} slices")
    spacing = vol.in_plane_spacing
    rel = cfg.reliability
    warnings, errors, notes = [], [], []

    # stage 1: brain box
    roi = tight_bbox(labels)
    rect = _rect_mm(roi.lo[0], roi.lo[1], roi.hi[0], roi.hi[1], spacing)
    wx, wy, ww, wh = square_window(roi, vol.dims, cfg.roi_factor)
    window_rect = _rect_mm(wx, wy, wx + ww - 1, wy + wh - 1, spacing)

    # stage 2: reference slices
    selections = {task: select_reference(probs[task]) for task in TASKS}
    for task in TASKS:
        w = check_slice_confidence(selections[task], rel, task)
        if w:
            warnings.append(w)

    # stage 3: label restoration
    lab = np.stack([clean_label_slice(labels.slice(k), cfg.keep_components) for k in range(nz)])

    # stage 4: per-slice MSL and orientation
    lines: list = [None] * nz
    rough = []
    for k in range(nz):
        try:
            lines[k], _ = msl_for_slice(lab[k], spacing, replace(cfg.svm, seed=cfg.svm.seed + k))
        except MslError as exc:
            if "converge" in str(exc):
                rough.append(f"slice {k}: {exc}")
    if rough:
        warnings.append(ReliabilityWarning("MSL_ROUGH", "; ".join(rough)))
    w = check_msl_smoothness([None if ln is None else ln.angle_deg() for ln in lines], rel)
    if w:
        warnings.append(w)

    known = {}
    for k in range(nz):
        cb = lab[k] == CEREBELLUM
        if lines[k] is None or not cb.any():
            continue
        try:
            ori = slice_orientation(lines[k], rect, pixel_centers_mm(cb, spacing),
                                    rel.orientation_samples, seed=rel.seed + k)
        except OrientationError as exc:
            notes.append(f"orientation slice {k}: {exc}")
            continue
        known[k] = ori
        w = check_orientation_consistency(ori.signs, k)
        if w:
            warnings.append(w)
    orientations: list = [None] * nz
    if known:
        try:
            orientations = propagate_orientation(lines, rect, known)
        except OrientationError as exc:
            errors.append(f"orientation: {exc}")
    else:
        errors.append("orientation: no slice with both an MSL and a cerebellum")

    # stage 5: measurements
    measurements = {"CBD": None, "BBD": None, "TCD": None}
    k = selections["CBD_BBD"].index
    if not ((lab[k] == LEFT).any() or (lab[k] == RIGHT).any()):
        raise PipelineFailure(f"no cerebral hemispheres on the CBD slice {k}")
    if lines[k] is None or orientations[k] is None:
        errors.append(f"CBD: no mid-sagittal line or orientation on slice {k}")
        errors.append("BBD: requires CBD")
    else:
        try:
            cbd = compute_cbd(lab[k], lines[k], orientations[k].inferior_dir, spacing, k)
        except MeasurementError as exc:
            cbd = None
            errors.append(f"CBD: {exc}")
            errors.append("BBD: requires CBD")
        if cbd is not None:
            measurements["CBD"] = cbd
            if "note" in cbd.aux:
                notes.append(f"CBD: {cbd.aux['note']}")
            image = vol.slice(k)
            try:
                bbd = compute_bbd(image, cbd, spacing, cfg.bbd_tau_rel, window_rect)
                measurements["BBD"] = bbd
            except (SkullNotFound, MeasurementError) as exc:
                bbd = None
                warnings.append(ReliabilityWarning("BBD_UNSTABLE", f"BBD absent: {exc}"))
            if bbd is not None:
                w = check_bbd_stability(image, cbd, spacing, rel, cfg.bbd_tau_rel, window_rect,
                                        bbd=bbd)
                if w:
                    warnings.append(w)

    k = selections["TCD"].index
    cb = lab[k] == CEREBELLUM
    try:
        tcd = compute_tcd(cb, spacing, k)
        measurements["TCD"] = tcd
        w = check_tcd_angles(tcd.aux["hull_angle_deg"], tcd.aux["rect_angle_deg"], rel)
        if w:
            warnings.append(w)
    except MeasurementError as exc:
        errors.append(f"TCD: {exc} on slice {k}")

    provenance = {
        "volume_id": volume_id,
        "n_slices": nz,
        "roi": {"lo": list(roi.lo), "hi": list(roi.hi)},
        "window": [wx, wy, ww, wh],
        "config": cfg.to_dict(),
    }
    return PipelineReport(
        measurements=measurements,
        selections=selections,
        lines=tuple(lines),
        inferior_dirs=tuple(None if o is None else tuple(o.inferior_dir) for o in orientations),
        warnings=tuple(warnings),
        errors=tuple(errors),
        notes=tuple(notes),
        provenance=provenance,
    )


@dataclass(frozen=True)
class EvalResult:
    agreement: dict  # kind -> AgreementStats
    slice_accuracy: dict  # task -> mean accuracy
    slice_diff: dict  # task -> list of |s1 - s2|
    volume_ids: tuple

    def to_dict(self) -> dict:
        return {
            "format_version": "1",
            "std_convention": "population",
            "volume_ids": list(self.volume_ids),
            "measurements": {k: v.to_dict() for k, v in self.agreement.items()},
            "slices": {
                task: {"mean_accuracy": self.slice_accuracy[task],
                       "mean_slice_diff": float(np.mean(self.slice_diff[task])),
                       "slice_diff": list(self.slice_diff[task])}
                for task in self.slice_accuracy
            },
        }


def run_eval(predictions: dict, reference: dict) -> EvalResult:
    """Compare per-volume predictions with reference rows.

    Both map ``volume_id`` to a dict with ``cbd_mm``, ``bbd_mm``, ``tcd_mm``,
    ``cbd_slice``, ``tcd_slice`` and (predictions only) ``n_slices``. A
    prediction missing a measurement is excluded from that measurement's
    statistics.
    """
    missing = sorted(set(predictions) - set(reference))
    if missing:
        raise KeyError(f"volume ids missing from reference: {', '.join(missing)}")
    ids = tuple(sorted(predictions))
    agreement = {}
    for kind in ("cbd", "bbd", "tcd"):
        pairs = [(predictions[i][f"{kind}_mm"], reference[i][f"{kind}_mm"]) for i in ids
                 if predictions[i].get(f"{kind}_mm") is not None]
        if len(pairs) >= 2:
            p, r = zip(*pairs)
            agreement[kind.upper()] = bland_altman(p, r)
    acc, sdiff = {}, {}
    for task, key in (("CBD_BBD", "cbd_slice"), ("TCD", "tcd_slice")):
        vals = [slice_selection_accuracy(predictions[i][key], reference[i][key],
                                         predictions[i]["n_slices"]) for i in ids]
        acc[task] = float(np.mean(vals))
        sdiff[task] = [abs(int(predictions[i][key]) - int(reference[i][key])) for i in ids]
    return EvalResult(agreement, acc, sdiff, ids)


__all__ = ["PipelineConfig", "PipelineFailure", "run_pipeline", "run_eval", "EvalResult",
           "AgreementStats", "SliceProbabilities"]
