"""Agreement statistics for paired measurements, slices, MSL angles and masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import fold_angle_diff

CI95_Z = 1.96


@dataclass(frozen=True)
class AgreementStats:
    bias: float
    ci95: float  # 1.96 * population std of the paired differences
    diff: float  # mean absolute difference
    n: int

    def to_dict(self) -> dict:
        return {"bias": self.bias, "ci95": self.ci95, "diff": self.diff, "n": self.n}


def diff(l1: float, l2: float) -> float:
    return abs(float(l1) - float(l2))


def slice_selection_accuracy(s1: int, s2: int, n: int) -> float:
    if n < 1:
        raise ValueError("slice count must be >= 1")
    return 1.0 - abs(int(s1) - int(s2)) / n


def msl_angle_diff(a1: float, a2: float) -> float:
    """Undirected angle difference in ``[0, 90]`` degrees."""
    return fold_angle_diff(float(a1), float(a2))


def bland_altman(set1, set2) -> AgreementStats:
    d = np.asarray(set1, dtype=float) - np.asarray(set2, dtype=float)
    if d.ndim != 1 or len(set1) != len(set2):
        raise ValueError("paired sets must have equal length")
    if len(d) < 2:
        raise ValueError("need at least two pairs")
    return AgreementStats(float(d.mean()), float(CI95_Z * d.std()), float(np.abs(d).mean()), len(d))


def dice(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("mask shapes differ")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total
