"""Reference-slice selection over pluggable per-slice probability sources."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

TASKS = ("CBD_BBD", "TCD")


@dataclass(frozen=True)
class SliceProbabilities:
    task: str
    values: tuple

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        vals = tuple(float(v) for v in self.values)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("slice probabilities must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Selection:
    index: int
    probability: float


def select_reference(probs: SliceProbabilities) -> Selection:
    """Slice with the highest probability; ties go to the lowest index."""
    if len(probs) == 0:
        raise ValueError("empty probability vector")
    k = int(np.argmax(probs.values))
    return Selection(k, probs.values[k])


class ProbabilitySource(Protocol):
    def probabilities(self, task: str, stack=None) -> SliceProbabilities:
        ...


class FileProbabilitySource:
    """Precomputed probabilities from a sidecar file (see ``io.read_probabilities``)."""

    def __init__(self, path):
        from .io import read_probabilities

        self.path = path
        self._probs = read_probabilities(path)

    def probabilities(self, task: str, stack=None) -> SliceProbabilities:
        return self._probs[task]


def phantom_profile(n: int, peak_index: int, eta: float = 0.05, peak: float = 1.0,
                    width: float = 3.0, seed: Optional[int] = 0) -> np.ndarray:
    """Triangular profile ``max(0, 1 - |i - k|/width)`` plus uniform noise in
    ``[-eta, eta]``, clipped at zero and rescaled so its maximum is ``peak``."""
    i = np.arange(n)
    p = np.maximum(0.0, 1.0 - np.abs(i - peak_index) / width)
    if eta > 0:
        p = p + np.random.default_rng(seed).uniform(-eta, eta, n)
    p = np.maximum(p, 0.0)
    top = p.max()
    return p * (peak / top) if top > 0 else p


class PhantomProbabilitySource:
    """Unimodal profiles peaked at known reference slices."""

    def __init__(self, n_slices: int, truth_slices: dict, eta: float = 0.05,
                 peak: float = 1.0, seed: int = 0):
        self.n_slices = n_slices
        self.truth_slices = dict(truth_slices)
        self.eta = eta
        self.peak = peak
        self.seed = seed

    def probabilities(self, task: str, stack=None) -> SliceProbabilities:
        # distinct stream per task
        seed = None if self.seed is None else self.seed * 2 + TASKS.index(task)
        p = phantom_profile(self.n_slices, self.truth_slices[task], self.eta, self.peak, seed=seed)
        return SliceProbabilities(task, tuple(p))
