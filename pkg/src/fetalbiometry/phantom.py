"""Synthetic fetal-head volumes with analytic measurement ground truth.

Geometry, in a frame whose ``t`` axis runs along the mid-sagittal line
(positive = inferior) and ``d`` axis across it, centred on the widest point
of the cerebrum:

* cerebrum: an "egg" ellipsoid, semi-axis ``a`` inferiorly and
  ``superior_fraction * a`` superiorly, ``b`` across, ``c`` through-slice,
  split at ``|d| < gap/2`` and with a lateral notch (the Sylvian fissure)
  ``fissure_offset`` below the widest point;
* CSF fills the inner skull egg, enlarged by ``csf_gap`` on every semi-axis;
* a skull shell ``skull_thickness`` thick, then background;
* a cerebellum ellipsoid on the MSL, inferior, centred on ``tcd_slice``.

At the central hemisphere slice the cerebrum is ``2b`` wide and the inner
skull ``2(b + csf_gap)`` wide along the same perpendicular.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import ndimage

from .core import CEREBELLUM, LEFT, RIGHT, LabelMap, Line2D, Volume
from .slice_select import TASKS, PhantomProbabilitySource, SliceProbabilities

DEFAULT_INTENSITY = {
    "background": 0.05,
    "parenchyma": 0.45,
    "csf": 0.90,
    "skull": 0.12,
    "cerebellum": 0.50,
}


class PhantomSpecError(ValueError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple = (160, 160, 24)
    spacing_mm: tuple = (0.75, 0.75, 4.0)
    msl_angle_deg: float = 0.0
    a_mm: float = 45.0
    superior_fraction: float = 0.6
    b_mm: float = 40.0
    c_mm: float = 40.0
    gap_mm: float = 2.0
    fissure_offset_mm: float = 4.0
    fissure_depth_mm: float = 3.0
    fissure_halfwidth_mm: float = 3.0
    csf_gap_mm: float = 4.0
    skull_thickness_mm: float = 3.0
    cerebellum_offset_mm: float = 28.0
    cerebellum_semi_axes_mm: tuple = (20.0, 9.0, 8.0)  # (across MSL, along MSL, through-slice)
    cbd_slice: int = 12
    tcd_slice: int = 16
    center_offset_mm: tuple = (0.0, 0.0)
    intensity: dict = field(default_factory=lambda: dict(DEFAULT_INTENSITY))
    noise_sigma: float = 0.01
    prob_noise: float = 0.05
    prob_peak: float = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PhantomSpecError(f"unknown phantom fields: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if k == "intensity":
                v = {**DEFAULT_INTENSITY, **v}
            elif isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "PhantomSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class PhantomTruth:
    cbd_mm: float
    bbd_mm: float
    tcd_mm: float
    cbd_slice: int
    tcd_slice: int
    msl: Line2D
    inferior_dir: tuple
    # slices whose cerebrum cross-section exists
    cerebrum_slices: tuple = ()

    def to_dict(self) -> dict:
        return {
            "cbd_mm": self.cbd_mm,
            "bbd_mm": self.bbd_mm,
            "tcd_mm": self.tcd_mm,
            "cbd_slice": self.cbd_slice,
            "tcd_slice": self.tcd_slice,
            "msl": list(self.msl.coefficients),
            "msl_angle_deg": self.msl.angle_deg(),
            "inferior_dir": list(self.inferior_dir),
        }


@dataclass(frozen=True)
class Phantom:
    volume: Volume
    labels: LabelMap
    truth: PhantomTruth
    probabilities: dict  # task -> SliceProbabilities
    spec: PhantomSpec


def _axes(theta_deg: float):
    th = math.radians(theta_deg)
    u = np.array([math.sin(th), math.cos(th)])  # along the MSL, inferior
    n = np.array([math.cos(th), -math.sin(th)])  # across, towards the right hemisphere
    return u, n


def head_center_mm(spec: PhantomSpec) -> np.ndarray:
    """In-plane position of the widest cerebrum point.

    The head is centred in the slice along the MSL, so the longer inferior
    half does not run off the image.
    """
    nx, ny, _ = spec.dims
    sx, sy, _ = spec.spacing_mm
    u, _ = _axes(spec.msl_angle_deg)
    mid = np.array([(nx - 1) * sx / 2.0, (ny - 1) * sy / 2.0])
    shift = 0.5 * (spec.a_mm - spec.superior_fraction * spec.a_mm)
    return mid - shift * u + np.asarray(spec.center_offset_mm, dtype=float)


def _egg(t, d, z, a_inf, a_sup, b, c):
    a = np.where(t > 0, a_inf, a_sup)
    return (t / a) ** 2 + (d / b) ** 2 + (z / c) ** 2


def rasterize(spec: PhantomSpec):
    """Noise-free intensities and labels, both shaped ``(nz, ny, nx)``."""
    nx, ny, nz = spec.dims
    sx, sy, sz = spec.spacing_mm
    u, n = _axes(spec.msl_angle_deg)
    center = head_center_mm(spec)
    xs = np.arange(nx) * sx - center[0]
    ys = np.arange(ny) * sy - center[1]
    X, Y = np.meshgrid(xs, ys)
    T = X * u[0] + Y * u[1]
    D = X * n[0] + Y * n[1]
    z = (np.arange(nz) - spec.cbd_slice) * sz
    z_cb = (spec.tcd_slice - spec.cbd_slice) * sz

    a, a_sup = spec.a_mm, spec.a_mm * spec.superior_fraction
    b, c, g, th = spec.b_mm, spec.c_mm, spec.csf_gap_mm, spec.skull_thickness_mm
    lat, ax, zr = spec.cerebellum_semi_axes_mm
    inten = spec.intensity

    vol = np.full((nz, ny, nx), inten["background"], dtype=float)
    lab = np.zeros((nz, ny, nx), dtype=np.uint8)
    for k in range(nz):
        zk = z[k]
        outer = _egg(T, D, zk, a + g + th, a_sup + g + th, b + g + th, c + g + th) < 1
        inner = _egg(T, D, zk, a + g, a_sup + g, b + g, c + g) < 1
        zscale2 = 1.0 - (zk / c) ** 2
        brain = np.zeros_like(outer)
        if zscale2 > 0:
            A = np.where(T > 0, a, a_sup)
            half = b * np.sqrt(np.clip(zscale2 - (T / A) ** 2, 0.0, None))
            notch = spec.fissure_depth_mm * math.sqrt(zscale2) * np.clip(
                1.0 - np.abs(T - spec.fissure_offset_mm) / spec.fissure_halfwidth_mm, 0.0, None)
            brain = (np.abs(D) < half - notch) & (np.abs(D) > spec.gap_mm / 2.0) & (half > 0)
        cereb = ((T - spec.cerebellum_offset_mm) / ax) ** 2 + (D / lat) ** 2 + ((zk - z_cb) / zr) ** 2 < 1

        sl = vol[k]
        sl[outer] = inten["skull"]
        sl[inner] = inten["csf"]
        sl[brain] = inten["parenchyma"]
        sl[cereb] = inten["cerebellum"]
        lk = lab[k]
        lk[brain & (D < 0)] = LEFT
        lk[brain & (D > 0)] = RIGHT
        lk[cereb] = CEREBELLUM
    return vol, lab


def _validate(spec: PhantomSpec, lab: np.ndarray) -> None:
    if spec.fissure_offset_mm <= 0:
        raise PhantomSpecError("fissure_offset_mm must be positive")
    if min(spec.a_mm, spec.b_mm, spec.c_mm) <= 0 or not 0 < spec.superior_fraction <= 1:
        raise PhantomSpecError("hemisphere semi-axes must be positive")
    nx, ny, nz = spec.dims
    if not (0 <= spec.cbd_slice < nz and 0 <= spec.tcd_slice < nz):
        raise PhantomSpecError("reference slices outside the volume")
    a, a_sup = spec.a_mm, spec.a_mm * spec.superior_fraction
    g, th = spec.csf_gap_mm, spec.skull_thickness_mm
    # the outer skull must not touch the in-plane border of any slice
    u, n = _axes(spec.msl_angle_deg)
    center = head_center_mm(spec)
    sx, sy, _ = spec.spacing_mm
    phi = np.linspace(-math.pi / 2, math.pi / 2, 721)
    across = spec.b_mm + g + th
    for along, direction in ((a + g + th, u), (a_sup + g + th, -u)):
        pts = center + np.outer(along * np.cos(phi), direction) + np.outer(across * np.sin(phi), n)
        if (pts.min(axis=0) < 0).any() or pts[:, 0].max() > (nx - 1) * sx or pts[:, 1].max() > (ny - 1) * sy:
            raise PhantomSpecError("head does not fit inside the volume")
    # cerebellum inside the inner skull and below the cerebrum mass centre
    lat, ax, zr = spec.cerebellum_semi_axes_mm
    off = spec.cerebellum_offset_mm
    dz = (spec.tcd_slice - spec.cbd_slice) * spec.spacing_mm[2]
    for t, d, z in ((off + ax, 0, dz), (off, lat, dz), (off, 0, dz + zr), (off, 0, dz - zr)):
        if _egg(np.array(t), np.array(d), z, a + g, a_sup + g, spec.b_mm + g, spec.c_mm + g) >= 1:
            raise PhantomSpecError("cerebellum extends beyond the inner skull")
    if not np.any(lab[spec.tcd_slice] == CEREBELLUM):
        raise PhantomSpecError("no cerebellum on the TCD slice")
    mass_t = cerebrum_mass_offset(spec, lab)
    if off - ax <= mass_t:
        raise PhantomSpecError("cerebellum must lie inferior to the cerebrum mass centre")
    if spec.fissure_offset_mm >= mass_t:
        raise PhantomSpecError("fissure must lie superior to the cerebrum mass centre")


def cerebrum_mass_offset(spec: PhantomSpec, lab: np.ndarray) -> float:
    """Inferior offset of the central-slice cerebrum centroid from the widest point."""
    u, _ = _axes(spec.msl_angle_deg)
    sl = lab[spec.cbd_slice]
    rows, cols = np.nonzero((sl == LEFT) | (sl == RIGHT))
    pts = np.column_stack([cols * spec.spacing_mm[0], rows * spec.spacing_mm[1]])
    return float((pts.mean(axis=0) - head_center_mm(spec)) @ u)


def truth_for(spec: PhantomSpec, lab: np.ndarray) -> PhantomTruth:
    u, n = _axes(spec.msl_angle_deg)
    center = head_center_mm(spec)
    lat, ax, _ = spec.cerebellum_semi_axes_mm
    has_cerebrum = tuple(int(k) for k in range(lab.shape[0])
                         if np.any(lab[k] == LEFT) and np.any(lab[k] == RIGHT))
    return PhantomTruth(
        cbd_mm=2.0 * spec.b_mm,
        bbd_mm=2.0 * (spec.b_mm + spec.csf_gap_mm),
        tcd_mm=2.0 * max(lat, ax),
        cbd_slice=spec.cbd_slice,
        tcd_slice=spec.tcd_slice,
        msl=Line2D.through(center, u),
        inferior_dir=(float(u[0]), float(u[1])),
        cerebrum_slices=has_cerebrum,
    )


def generate(spec: PhantomSpec = PhantomSpec()) -> Phantom:
    """Rasterize the phantom, add seeded Gaussian noise and emit slice
    probabilities peaked at the true reference slices."""
    clean, lab = rasterize(spec)
    _validate(spec, lab)
    rng = np.random.default_rng(spec.seed)
    noisy = clean + rng.normal(0.0, spec.noise_sigma, clean.shape) if spec.noise_sigma > 0 else clean
    noisy = np.clip(noisy, 0.0, 1.0).astype(np.float32)
    truth = truth_for(spec, lab)
    source = PhantomProbabilitySource(
        spec.dims[2], {"CBD_BBD": spec.cbd_slice, "TCD": spec.tcd_slice},
        eta=spec.prob_noise, peak=spec.prob_peak, seed=spec.seed)
    probs = {task: source.probabilities(task) for task in TASKS}
    return Phantom(Volume(noisy, spec.spacing_mm), LabelMap(lab, spec.spacing_mm), truth, probs, spec)


# ---------------------------------------------------------------------------
# Corruptions: each one breaks exactly one thing a reliability check watches.

def _frame(ph: Phantom):
    """Per-pixel ``(T, D)`` phantom coordinates for one slice."""
    spec = ph.spec
    nx, ny, _ = spec.dims
    sx, sy, _ = spec.spacing_mm
    u, n = _axes(spec.msl_angle_deg)
    center = head_center_mm(spec)
    X, Y = np.meshgrid(np.arange(nx) * sx - center[0], np.arange(ny) * sy - center[1])
    return X * u[0] + Y * u[1], X * n[0] + Y * n[1]


def _rebuild(ph: Phantom, voxels=None, labels=None, probabilities=None) -> Phantom:
    vol = ph.volume if voxels is None else Volume(voxels, ph.spec.spacing_mm)
    lab = ph.labels if labels is None else LabelMap(labels, ph.spec.spacing_mm)
    return replace(ph, volume=vol, labels=lab,
                   probabilities=ph.probabilities if probabilities is None else probabilities)


def corrupt_slice_confidence(ph: Phantom, peak: float = 0.45, task: str = "CBD_BBD") -> Phantom:
    """Scale one task's probability profile so its maximum is ``peak``."""
    vals = np.asarray(ph.probabilities[task].values)
    probs = dict(ph.probabilities)
    probs[task] = SliceProbabilities(task, tuple(vals * (peak / vals.max())))
    return _rebuild(ph, probabilities=probs)


def corrupt_orientation(ph: Phantom, slice_offset: int = 1, t_mm: float = -6.0,
                        semi_axes_mm=(16.0, 8.0)) -> Phantom:
    """Add a second cerebellum blob superior to the mid-line centre on one
    cerebellum slice, so sampled points fall on both sides."""
    k = ph.spec.tcd_slice + slice_offset
    T, D = _frame(ph)
    blob = ((T - t_mm) / semi_axes_mm[1]) ** 2 + (D / semi_axes_mm[0]) ** 2 < 1
    lab = np.array(ph.labels.labels)
    vox = np.array(ph.volume.voxels)
    lab[k][blob] = CEREBELLUM
    vox[k][blob] = ph.spec.intensity["cerebellum"]
    return _rebuild(ph, vox, lab)


def corrupt_msl(ph: Phantom, slice_offset: int = -3, angle_deg: float = 25.0) -> Phantom:
    """Re-split the hemispheres of one slice along a rotated line."""
    k = ph.spec.cbd_slice + slice_offset
    T, D = _frame(ph)
    a = math.radians(angle_deg)
    d_rot = D * math.cos(a) - T * math.sin(a)
    lab = np.array(ph.labels.labels)
    brain = (lab[k] == LEFT) | (lab[k] == RIGHT)
    lab[k][brain & (d_rot < 0)] = LEFT
    lab[k][brain & (d_rot >= 0)] = RIGHT
    return _rebuild(ph, labels=lab)


def corrupt_bbd(ph: Phantom, depth: float = 0.11, inner_mm: float = 2.5,
                width_mm: float = 2.0, t_range_mm: float = 20.0) -> Phantom:
    """A faint dark stripe through the CSF on the right side of the CBD slice.

    The stripe follows the brain outline at distances ``inner_mm`` to
    ``inner_mm + width_mm`` from the cerebrum, within ``t_range_mm`` of the
    widest point.
    """
    spec = ph.spec
    k = spec.cbd_slice
    T, D = _frame(ph)
    brain = ph.labels.labels[k] > 0
    dist = ndimage.distance_transform_edt(~brain, sampling=spec.spacing_mm[1::-1])
    csf = np.abs(ph.volume.voxels[k] - spec.intensity["csf"]) < 0.2
    stripe = ((dist > inner_mm) & (dist <= inner_mm + width_mm) & (D > 0)
              & (np.abs(T) < t_range_mm) & csf)
    vox = np.array(ph.volume.voxels)
    vox[k][stripe] = np.clip(vox[k][stripe] - depth, 0.0, 1.0)
    return _rebuild(ph, voxels=vox)


def corrupt_tcd(ph: Phantom, arm_mm=(40.0, 26.0), thickness_mm: float = 8.0) -> Phantom:
    """Replace the cerebellum on the TCD slice with an L shape."""
    spec = ph.spec
    k = spec.tcd_slice
    T, D = _frame(ph)
    t_base = spec.cerebellum_offset_mm + spec.cerebellum_semi_axes_mm[1]
    horiz = (np.abs(D) <= arm_mm[0] / 2) & (T <= t_base) & (T >= t_base - thickness_mm)
    vert = ((D >= -arm_mm[0] / 2) & (D <= -arm_mm[0] / 2 + thickness_mm)
            & (T <= t_base) & (T >= t_base - arm_mm[1]))
    shape = horiz | vert
    lab = np.array(ph.labels.labels)
    vox = np.array(ph.volume.voxels)
    old = lab[k] == CEREBELLUM
    # vacated cerebellum pixels become parenchyma of the hemisphere they lie in
    lab[k][old & (D < 0)] = LEFT
    lab[k][old & (D > 0)] = RIGHT
    vox[k][old] = spec.intensity["parenchyma"]
    lab[k][shape] = CEREBELLUM
    vox[k][shape] = spec.intensity["cerebellum"]
    return _rebuild(ph, vox, lab)


# The stripe needs room between the brain and the skull to show up as two
# separate edges, so its scenario widens the CSF space.
BBD_SCENARIO_CSF_GAP_MM = 8.0


def corruption_scenarios(base: PhantomSpec = PhantomSpec()) -> dict:
    """Warning code -> corrupted phantom built from ``base``."""
    out = {}
    for code, fn in CORRUPTIONS.items():
        spec = base.with_(csf_gap_mm=BBD_SCENARIO_CSF_GAP_MM) if code == "BBD_UNSTABLE" else base
        out[code] = fn(generate(spec))
    return out


CORRUPTIONS = {
    "SLICE_CONF_CBD": corrupt_slice_confidence,
    "ORIENT_INCONSISTENT": corrupt_orientation,
    "MSL_ROUGH": corrupt_msl,
    "BBD_UNSTABLE": corrupt_bbd,
    "TCD_ANGLES": corrupt_tcd,
}


SWEEP_ANGLES_DEG = (-25.0, -10.0, 0.0, 10.0, 25.0)
SWEEP_B_MM = (30.0, 35.0, 40.0, 45.0, 50.0)


def sweep_specs(n: int = 20, noise_sigma: float = 0.01, prob_noise: float = 0.0,
                base: PhantomSpec = PhantomSpec()) -> list:
    """``n`` seeded specs cycling through the MSL angles, with ``b`` shifted
    by one step every five volumes so angle/size pairs do not repeat."""
    out = []
    for i in range(n):
        theta = SWEEP_ANGLES_DEG[i % 5]
        b = SWEEP_B_MM[(i + i // 5) % 5]
        out.append(base.with_(msl_angle_deg=theta, b_mm=b, seed=i, noise_sigma=noise_sigma,
                              prob_noise=prob_noise))
    return out
