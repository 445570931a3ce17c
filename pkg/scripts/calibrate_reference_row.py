"""Grid search for a phantom whose quality row matches a healthy reference subject.

Target row (one well-matched healthy subject): amplitude ratio 0.96-1.02,
MSD 0.28-0.29 mm, d_init-fin 0.29-0.44 mm, dk_L-R about 1.29 mm.

The slab tilt is set analytically from the wanted dk; the search runs over
closing-path bulge (drives MSD), anterior head drift (drives d_init-fin) and
per-cycle jitter (moves the ratio).

    python3 scripts/calibrate_reference_row.py [--out spec.json]
"""

import argparse
import itertools
import json
import math

from condyletraj.metrics import format_table, quality_report
from condyletraj.phantom import PhantomSpec, make_dataset
from condyletraj.pipeline import process_subject

TARGET = {"ratio": (0.96, 1.02), "msd": (0.28, 0.29), "d_init_fin": (0.29, 0.44), "delta_k": (1.24, 1.34)}


def miss(value, band):
    lo, hi = band
    return max(0.0, lo - value, value - hi)


def score(m):
    total = sum(miss(m.ratio[s], TARGET["ratio"]) + miss(m.msd[s], TARGET["msd"])
                + miss(m.d_init_fin[s], TARGET["d_init_fin"]) for s in ("left", "right"))
    return total + miss(m.delta_k, TARGET["delta_k"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delta-k", type=float, default=1.29)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", help="write the best phantom spec as JSON")
    args = ap.parse_args()

    roll = -math.degrees(math.asin(args.delta_k / 100.0))   # condyles sit 100 mm apart
    best = None
    for bulge, vy, jitter in itertools.product((0.3, 0.4, 0.5), (0.04, 0.06, 0.08), (0.0, 0.05)):
        spec = PhantomSpec(subject="reference", seed=args.seed, axial_roll_deg=roll, closing_bulge_mm=bulge,
                           drift_velocity_mm_s=(0.0, vy, 0.0), jitter=jitter)
        res = process_subject(make_dataset(spec)[0])
        if res.excluded:
            print(f"bulge {bulge} drift {vy} jitter {jitter}: excluded ({res.exclusion})")
            continue
        s = score(res.metrics)
        print(f"bulge {bulge:.2f} drift {vy:.2f} mm/s jitter {jitter:.2f}: miss {s:.3f}")
        if best is None or s < best[0]:
            best = (s, spec, res)

    s, spec, res = best
    print(f"\nbest (total distance outside the target bands {s:.3f}):")
    print(format_table(quality_report([res.metrics])))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(spec.to_dict(), fh, indent=1, sort_keys=True)
        print(f"spec written to {args.out}")


if __name__ == "__main__":
    main()
