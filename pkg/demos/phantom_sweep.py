"""Run the pipeline over the seeded phantom sweep and print errors against truth.

    python demos/phantom_sweep.py [n]
"""
import sys
import time

from fetalbiometry.metrics import bland_altman
from fetalbiometry.phantom import generate, sweep_specs
from fetalbiometry.pipeline import run_pipeline


def main(n=20):
    rows = []
    for spec in sweep_specs(n):
        ph = generate(spec)
        t0 = time.perf_counter()
        rep = run_pipeline(ph.volume, ph.labels, ph.probabilities, volume_id=f"s{spec.seed}")
        dt = time.perf_counter() - t0
        got = {k: rep.measurements[k].value_mm for k in ("CBD", "BBD", "TCD")}
        truth = {"CBD": ph.truth.cbd_mm, "BBD": ph.truth.bbd_mm, "TCD": ph.truth.tcd_mm}
        rows.append((got, truth))
        errs = "  ".join(f"{k} {got[k] - truth[k]:+.2f}" for k in got)
        print(f"theta {spec.msl_angle_deg:+5.0f}  b {spec.b_mm:4.0f}  {errs}  "
              f"warnings {len(rep.warnings)}  {dt:.2f} s")
    for k in ("CBD", "BBD", "TCD"):
        s = bland_altman([g[k] for g, _ in rows], [t[k] for _, t in rows])
        print(f"{k}: bias {s.bias:+.3f} mm, ci95 {s.ci95:.3f} mm")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20)
