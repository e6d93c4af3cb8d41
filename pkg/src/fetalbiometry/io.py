"""File formats: volume/label headers with raw data, probabilities, reports,
reference tables and evaluation stats.

Headers, probabilities, reports and stats are JSON. Raw data is
little-endian with x varying fastest and z slowest, which is exactly the
C-order layout of a ``(nz, ny, nx)`` array.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import LABEL_NAMES, LabelMap, PipelineReport, Volume
from .slice_select import TASKS, SliceProbabilities

FORMAT_VERSION = "1"
DTYPES = {"u8": "<u1", "u16": "<u2", "f32": "<f4"}
PROB_KEYS = {"CBD_BBD": "cbd_bbd", "TCD": "tcd"}
REFERENCE_COLUMNS = ("volume_id", "cbd_mm", "bbd_mm", "tcd_mm", "cbd_slice", "tcd_slice")


class FormatError(ValueError):
    pass


def _dump(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")


def _load(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if obj.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {obj.get('format_version')!r}")
    return obj


def _write_grid(array: np.ndarray, spacing, header_path, dtype: str, extra: dict) -> None:
    header_path = Path(header_path)
    data_path = header_path.with_suffix(".raw")
    nz, ny, nx = array.shape
    header = {
        "format_version": FORMAT_VERSION,
        "dims": [nx, ny, nz],
        "spacing_mm": [float(s) for s in spacing],
        "dtype": dtype,
        "byte_order": "little",
        "order": "x-fastest",
        "data_file": data_path.name,
        **extra,
    }
    np.ascontiguousarray(array, dtype=DTYPES[dtype]).tofile(data_path)
    _dump(header, header_path)


def _read_grid(header_path):
    header_path = Path(header_path)
    h = _load(header_path)
    try:
        nx, ny, nz = (int(v) for v in h["dims"])
        spacing = tuple(float(v) for v in h["spacing_mm"])
        dtype = h["dtype"]
        data_path = header_path.parent / h["data_file"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{header_path}: malformed header: {exc}") from exc
    if dtype not in DTYPES:
        raise FormatError(f"{header_path}: unknown dtype {dtype!r}")
    if h.get("byte_order", "little") != "little" or h.get("order", "x-fastest") != "x-fastest":
        raise FormatError(f"{header_path}: only little-endian x-fastest data is supported")
    try:
        raw = np.fromfile(data_path, dtype=DTYPES[dtype])
    except OSError as exc:
        raise FormatError(f"cannot read {data_path}: {exc}") from exc
    if raw.size != nx * ny * nz:
        raise FormatError(f"{data_path}: {raw.size} values, header says {nx}x{ny}x{nz}")
    return raw.reshape(nz, ny, nx), spacing, h


def write_volume(vol: Volume, header_path, dtype: str = "f32", volume_id: str = None) -> None:
    if dtype not in ("f32", "u16"):
        raise ValueError("volume dtype must be f32 or u16")
    extra = {"kind": "volume"}
    if volume_id is not None:
        extra["volume_id"] = volume_id
    _write_grid(vol.voxels, vol.spacing_mm, header_path, dtype, extra)


def volume_id_of(header_path) -> str:
    """The header's ``volume_id`` field, else the header file name stem."""
    h = _load(header_path)
    return str(h.get("volume_id", Path(header_path).stem))


def read_volume(header_path) -> Volume:
    arr, spacing, h = _read_grid(header_path)
    if h["dtype"] not in ("f32", "u16"):
        raise FormatError(f"{header_path}: volume dtype must be f32 or u16")
    return Volume(arr, spacing)


def write_labels(labels: LabelMap, header_path) -> None:
    legend = {str(k): v for k, v in LABEL_NAMES.items()}
    _write_grid(labels.labels, labels.spacing_mm, header_path, "u8",
                {"kind": "labels", "classes": legend})


def read_labels(header_path) -> LabelMap:
    arr, spacing, h = _read_grid(header_path)
    if h["dtype"] != "u8":
        raise FormatError(f"{header_path}: label dtype must be u8")
    try:
        return LabelMap(arr, spacing)
    except ValueError as exc:
        raise FormatError(f"{header_path}: {exc}") from exc


def write_probabilities(probs: dict, path) -> None:
    out = {"format_version": FORMAT_VERSION}
    for task in TASKS:
        out[PROB_KEYS[task]] = list(probs[task].values)
    _dump(out, path)


def read_probabilities(path) -> dict:
    h = _load(path)
    out = {}
    for task in TASKS:
        key = PROB_KEYS[task]
        if key not in h:
            raise FormatError(f"{path}: missing array {key!r}")
        try:
            out[task] = SliceProbabilities(task, tuple(h[key]))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {key}: {exc}") from exc
    if len(out["CBD_BBD"]) != len(out["TCD"]):
        raise FormatError(f"{path}: probability arrays differ in length")
    return out


def _point(p, spacing) -> dict:
    mm = [float(v) for v in p]
    vox = [float(v) for v in np.asarray(p, dtype=float) / np.asarray(spacing[:2], dtype=float)]
    return {"mm": mm, "voxel": vox}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def report_to_dict(report: PipelineReport, spacing) -> dict:
    meas = {}
    for kind, m in report.measurements.items():
        if m is None:
            meas[kind] = None
            continue
        meas[kind] = {
            "value_mm": m.value_mm,
            "slice": m.slice_index,
            "endpoint_a": _point(m.endpoint_a, spacing),
            "endpoint_b": _point(m.endpoint_b, spacing),
            "aux": _jsonable(m.aux),
        }
    prov = report.provenance
    return _jsonable({
        "format_version": FORMAT_VERSION,
        "volume_id": prov.get("volume_id", ""),
        "n_slices": prov.get("n_slices", len(report.lines)),
        "spacing_mm": list(spacing),
        "measurements": meas,
        "selections": {PROB_KEYS[t]: {"slice": s.index, "probability": s.probability}
                       for t, s in report.selections.items()},
        "msl": [None if ln is None else list(ln.coefficients) for ln in report.lines],
        "inferior_dirs": [None if d is None else list(d) for d in report.inferior_dirs],
        "warnings": [{"code": w.code, "detail": w.detail} for w in report.warnings],
        "errors": list(report.errors),
        "notes": list(report.notes),
        "roi": prov.get("roi"),
        "window": prov.get("window"),
        "config": prov.get("config", {}),
    })


def write_report(report: PipelineReport, spacing, path) -> None:
    _dump(report_to_dict(report, spacing), path)


def read_report(path) -> dict:
    return _load(path)


def report_row(report: dict) -> dict:
    """The fields ``run_eval`` needs from a report file."""
    m = report["measurements"]

    def value(kind):
        return None if m.get(kind) is None else float(m[kind]["value_mm"])

    return {
        "cbd_mm": value("CBD"),
        "bbd_mm": value("BBD"),
        "tcd_mm": value("TCD"),
        "cbd_slice": int(report["selections"]["cbd_bbd"]["slice"]),
        "tcd_slice": int(report["selections"]["tcd"]["slice"]),
        "n_slices": int(report["n_slices"]),
    }


def read_reference(path) -> dict:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != REFERENCE_COLUMNS:
                raise FormatError(f"{path}: expected columns {', '.join(REFERENCE_COLUMNS)}")
            rows = {}
            for row in reader:
                vid = row["volume_id"]
                if vid in rows:
                    raise FormatError(f"{path}: duplicate volume_id {vid!r}")
                rows[vid] = {
                    "cbd_mm": float(row["cbd_mm"]),
                    "bbd_mm": float(row["bbd_mm"]),
                    "tcd_mm": float(row["tcd_mm"]),
                    "cbd_slice": int(row["cbd_slice"]),
                    "tcd_slice": int(row["tcd_slice"]),
                }
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
    return rows


def write_reference(rows: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REFERENCE_COLUMNS)
        for vid in sorted(rows):
            r = rows[vid]
            w.writerow([vid, repr(float(r["cbd_mm"])), repr(float(r["bbd_mm"])),
                        repr(float(r["tcd_mm"])), int(r["cbd_slice"]), int(r["tcd_slice"])])


def write_stats(stats: dict, path) -> None:
    _dump(stats, path)


def read_stats(path) -> dict:
    return _load(path)


def phantom_truth_row(truth) -> dict:
    return {
        "cbd_mm": truth.cbd_mm,
        "bbd_mm": truth.bbd_mm,
        "tcd_mm": truth.tcd_mm,
        "cbd_slice": truth.cbd_slice,
        "tcd_slice": truth.tcd_slice,
    }


__all__ = [
    "FORMAT_VERSION", "FormatError", "read_volume", "write_volume", "read_labels",
    "write_labels", "read_probabilities", "write_probabilities", "write_report",
    "read_report", "report_to_dict", "report_row", "read_reference", "write_reference",
    "write_stats", "read_stats", "phantom_truth_row",
]
