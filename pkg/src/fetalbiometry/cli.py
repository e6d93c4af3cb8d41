"""Command-line entry point: ``measure``, ``phantom`` and ``eval``.

Exit codes: 0 success (warnings allowed), 1 input error, 2 pipeline failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .core import DimensionMismatch
from .phantom import PhantomSpec, PhantomSpecError, generate
from .pipeline import PipelineConfig, PipelineFailure, run_eval, run_pipeline
from .roi import NoForeground

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2


def _load_json(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise io.FormatError(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise io.FormatError(f"{path}: expected a JSON object")
    return obj


def cmd_measure(args) -> int:
    try:
        vol = io.read_volume(args.volume)
        labels = io.read_labels(args.labels)
        probs = io.read_probabilities(args.probs)
        cfg = PipelineConfig.from_dict(_load_json(args.config)) if args.config else PipelineConfig()
        volume_id = args.id or io.volume_id_of(args.volume)
    except (io.FormatError, ValueError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        report = run_pipeline(vol, labels, probs, cfg, volume_id)
    except (DimensionMismatch, NoForeground) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineFailure as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    io.write_report(report, vol.spacing_mm, args.out)
    for w in report.warnings:
        print(f"warning {w.code}: {w.detail}", file=sys.stderr)
    return EXIT_OK


def cmd_phantom(args) -> int:
    try:
        raw = _load_json(args.spec) if args.spec else {}
        raw["seed"] = args.seed
        spec = PhantomSpec.from_dict(raw)
        ph = generate(spec)
    except (io.FormatError, PhantomSpecError, TypeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vid = args.id or f"phantom-{args.seed:04d}"
    io.write_volume(ph.volume, out / "volume.json", "f32", volume_id=vid)
    io.write_labels(ph.labels, out / "labels.json")
    io.write_probabilities(ph.probabilities, out / "probs.json")
    truth = {"format_version": io.FORMAT_VERSION, "volume_id": vid, **ph.truth.to_dict(),
             "spec": json.loads(json.dumps(spec.to_dict()))}
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    io.write_reference({vid: io.phantom_truth_row(ph.truth)}, out / "reference.csv")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        reference = io.read_reference(args.ref)
        predictions = {}
        for path in sorted(Path(args.pred).glob("*.json")):
            rep = io.read_report(path)
            if "measurements" not in rep:
                continue
            vid = rep.get("volume_id") or path.stem
            if vid in predictions:
                raise io.FormatError(f"duplicate volume_id {vid!r} in {args.pred}")
            predictions[vid] = io.report_row(rep)
        if not predictions:
            raise io.FormatError(f"no reports found in {args.pred}")
        result = run_eval(predictions, reference)
    except KeyError as exc:
        print(f"input error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    except (io.FormatError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    io.write_stats(result.to_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fetalbiometry",
                                description="Fetal brain linear measurements from MRI volumes.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="measure CBD, BBD and TCD on one volume")
    m.add_argument("--volume", required=True, help="volume header (JSON)")
    m.add_argument("--labels", required=True, help="label map header (JSON)")
    m.add_argument("--probs", required=True, help="slice probabilities (JSON)")
    m.add_argument("--out", required=True, help="report path (JSON)")
    m.add_argument("--config", help="pipeline config (JSON)")
    m.add_argument("--id", help="volume id recorded in the report")
    m.set_defaults(func=cmd_measure)

    g = sub.add_parser("phantom", help="write a synthetic volume with its ground truth")
    g.add_argument("--spec", help="phantom spec (JSON); defaults for missing fields")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--id", help="volume id (default phantom-<seed>)")
    g.set_defaults(func=cmd_phantom)

    e = sub.add_parser("eval", help="agreement statistics of reports against a reference table")
    e.add_argument("--pred", required=True, help="directory of report files")
    e.add_argument("--ref", required=True, help="reference CSV")
    e.add_argument("--out", required=True, help="stats path (JSON)")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
