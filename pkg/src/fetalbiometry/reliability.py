"""Self-assessment checks that flag measurements likely to be wrong."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Measurement, ReliabilityWarning, fold_angle_diff
from .imageops import clahe, normalize01
from .measure import MeasurementError, SkullNotFound, compute_bbd
from .slice_select import Selection


@dataclass(frozen=True)
class ReliabilityConfig:
    slice_prob_threshold: float = 0.5
    orientation_samples: int = 5
    msl_adjacent_angle_deg: float = 10.0
    bbd_clahe_diff_mm: float = 2.0
    tcd_angle_deg: float = 10.0
    clahe_tile: tuple = (20, 20)
    clahe_clip: float = 0.01
    seed: int = 0

    def __post_init__(self):
        positive = (self.slice_prob_threshold, self.msl_adjacent_angle_deg,
                    self.bbd_clahe_diff_mm, self.tcd_angle_deg, self.clahe_clip)
        if any(v <= 0 for v in positive) or min(self.clahe_tile) < 1:
            raise ValueError("reliability thresholds must be positive")
        if self.orientation_samples < 2:
            raise ValueError("need at least two orientation samples")
        object.__setattr__(self, "clahe_tile", tuple(int(v) for v in self.clahe_tile))


def check_slice_confidence(sel: Selection, cfg: ReliabilityConfig = ReliabilityConfig(),
                           task: str = "CBD_BBD") -> Optional[ReliabilityWarning]:
    if sel.probability < cfg.slice_prob_threshold:
        code = "SLICE_CONF_CBD" if task == "CBD_BBD" else "SLICE_CONF_TCD"
        return ReliabilityWarning(
            code, f"{task} slice {sel.index} probability {sel.probability:.4f} "
                  f"< {cfg.slice_prob_threshold}")
    return None


def check_orientation_consistency(signs: Sequence[int], slice_index: Optional[int] = None
                                  ) -> Optional[ReliabilityWarning]:
    """Warn unless every sampled cross-product sign is the same non-zero value."""
    signs = tuple(int(s) for s in signs)
    if len(set(signs)) == 1 and signs[0] != 0:
        return None
    where = "" if slice_index is None else f"slice {slice_index}: "
    return ReliabilityWarning("ORIENT_INCONSISTENT", f"{where}cerebellum sample signs {signs}")


def check_msl_smoothness(angles: Sequence[Optional[float]],
                         cfg: ReliabilityConfig = ReliabilityConfig()) -> Optional[ReliabilityWarning]:
    """Compare folded MSL angles of adjacent slices; ``None`` entries break adjacency."""
    jumps = []
    for k in range(len(angles) - 1):
        a1, a2 = angles[k], angles[k + 1]
        if a1 is None or a2 is None:
            continue
        d = fold_angle_diff(a1, a2)
        if d > cfg.msl_adjacent_angle_deg:
            jumps.append(f"slices {k}-{k + 1}: {d:.2f} deg")
    if jumps:
        return ReliabilityWarning("MSL_ROUGH", "; ".join(jumps))
    return None


def clahe_slice(image, cfg: ReliabilityConfig = ReliabilityConfig()):
    return clahe(normalize01(image), cfg.clahe_tile, cfg.clahe_clip)


def check_bbd_stability(image, cbd: Measurement, spacing,
                        cfg: ReliabilityConfig = ReliabilityConfig(), tau_rel: float = 0.2,
                        rect=None, bbd: Optional[Measurement] = None
                        ) -> Optional[ReliabilityWarning]:
    """Recompute BBD on the CLAHE-enhanced slice and compare.

    ``bbd`` may carry the already computed original measurement.
    """
    try:
        if bbd is None:
            bbd = compute_bbd(image, cbd, spacing, tau_rel, rect)
    except (SkullNotFound, MeasurementError) as exc:
        return ReliabilityWarning("BBD_UNSTABLE", f"original slice: {exc}")
    try:
        enhanced = compute_bbd(clahe_slice(image, cfg), cbd, spacing, tau_rel, rect)
    except (SkullNotFound, MeasurementError) as exc:
        return ReliabilityWarning("BBD_UNSTABLE", f"CLAHE slice: {exc}")
    diff = abs(bbd.value_mm - enhanced.value_mm)
    if diff > cfg.bbd_clahe_diff_mm:
        return ReliabilityWarning(
            "BBD_UNSTABLE", f"BBD {bbd.value_mm:.2f} mm vs {enhanced.value_mm:.2f} mm after CLAHE")
    return None


def check_tcd_angles(hull_angle_deg: float, rect_angle_deg: float,
                     cfg: ReliabilityConfig = ReliabilityConfig()) -> Optional[ReliabilityWarning]:
    d = fold_angle_diff(hull_angle_deg, rect_angle_deg)
    if d > cfg.tcd_angle_deg:
        return ReliabilityWarning(
            "TCD_ANGLES", f"hull diameter {hull_angle_deg:.2f} deg vs box axis "
                          f"{rect_angle_deg:.2f} deg ({d:.2f} deg apart)")
    return None
