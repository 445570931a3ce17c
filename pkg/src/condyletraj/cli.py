"""Command line front end.

Exit codes: 0 success, 2 at least one subject excluded, 3 invalid input,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import load_config
from .errors import InvalidArgument, TrajectoryError
from .manifest import load_manifest
from .metrics import format_summary, parse_report_csv, report_csv, summarize, format_table
from .outputs import write_combined_quality, write_subject

EXIT_OK = 0
EXIT_EXCLUDED = 2
EXIT_INVALID = 3
EXIT_INTERNAL = 4


def _subject_dir(subject):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", subject) or "subject"


def _run_one(manifest, cfg, out, seed):
    """Process one manifest in a worker. Returns (code, subject, metrics, message)."""
    from .pipeline import process_subject

    try:
        ds = load_manifest(manifest)
    except TrajectoryError as exc:
        return EXIT_INVALID, None, None, str(exc)
    extra = None if seed is None else f"seed {seed}"
    try:
        res = process_subject(ds, cfg)
        write_subject(res, os.path.join(out, _subject_dir(ds.subject)), cfg, extra)
    except (TrajectoryError, ValueError) as exc:
        return EXIT_INVALID, ds.subject, None, f"{ds.subject}: {exc}"
    except Exception:  # noqa: BLE001 - reported as an internal error
        return EXIT_INTERNAL, ds.subject, None, traceback.format_exc()
    code = EXIT_EXCLUDED if res.excluded else EXIT_OK
    return code, ds.subject, res.metrics, res.exclusion


class _Done:
    """Minimal result stand-in for the combined report."""

    def __init__(self, metrics):
        self.metrics = metrics


def cmd_run(args):
    overrides = {"axial_only": True if args.axial_only else None, "point": args.point}
    cfg = load_config(args.config, overrides=overrides)
    if not args.manifest:
        raise InvalidArgument("run needs at least one --manifest")
    os.makedirs(args.out, exist_ok=True)
    jobs = [(m, cfg, args.out, args.seed) for m in args.manifest]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_run_one, *zip(*jobs)))
    else:
        outcomes = [_run_one(*j) for j in jobs]

    seen = {}
    code = EXIT_OK
    done = []
    for (status, subject, metrics, message), job in zip(outcomes, jobs):
        if subject is not None and subject in seen:
            print(f"error: subject {subject!r} appears in {seen[subject]} and {job[0]}", file=sys.stderr)
            status = EXIT_INVALID
        elif subject is not None:
            seen[subject] = job[0]
        if status == EXIT_EXCLUDED:
            print(f"{subject}: excluded: {message}")
        elif status == EXIT_OK:
            print(f"{subject}: ok")
        else:
            print(f"error: {message}", file=sys.stderr)
        if metrics is not None:
            done.append(_Done(metrics))
        code = max(code, status)
    extra = None if args.seed is None else f"seed {args.seed}"
    if done:
        write_combined_quality(done, args.out, cfg, extra)
    return code


def cmd_phantom(args):
    from .phantom import PhantomSpec, write_phantom

    doc = {}
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgument(f"cannot read phantom spec {args.spec}: {exc}") from None
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.subject:
        doc["subject"] = args.subject
    spec = PhantomSpec.from_dict(doc)
    ds, truths = write_phantom(spec, args.out, pgm=args.pgm)
    frames = {"axial": ds.axial.n_frames, **{f"sagittal_{s}": v.n_frames for s, v in sorted(ds.sagittal.items())}}
    print(f"wrote phantom {spec.subject} (seed {spec.seed}) to {args.out}: "
          + ", ".join(f"{k} {v} frames" for k, v in frames.items()))
    return EXIT_OK


def cmd_metrics(args):
    if not args.outputs:
        raise InvalidArgument("metrics needs at least one outputs directory")
    rows = []
    for path in args.outputs:
        src = os.path.join(path, "quality.csv") if os.path.isdir(path) else path
        try:
            with open(src, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidArgument(f"cannot read {src}: {exc}") from None
        rows.extend(parse_report_csv(text, source=src))
    keys = [(r.subject, r.side) for r in rows]
    if len(set(keys)) != len(keys):
        raise InvalidArgument("the same subject appears in more than one report")
    rows.sort(key=lambda r: (r.subject, r.side))
    head = f"condyletraj {__version__} merged"
    merged = report_csv(rows, header=head)
    summary = format_summary(summarize(rows))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, text in (("quality.csv", merged), ("quality.txt", f"# {head}\n" + format_table(rows)),
                           ("summary.txt", f"# {head}\n" + summary)):
            with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    else:
        sys.stdout.write(merged)
    sys.stdout.write(summary)
    return EXIT_EXCLUDED if any(r.excluded_reason for r in rows) else EXIT_OK


def cmd_inspect(args):
    code = EXIT_OK
    for path in args.manifest:
        try:
            ds = load_manifest(path)
        except TrajectoryError as exc:
            print(f"{path}: INVALID: {exc}")
            code = EXIT_INVALID
            continue
        print(f"{path}: subject {ds.subject}: valid")
        series = [("axial", ds.axial)] + [(f"sagittal_{s}", v) for s, v in sorted(ds.sagittal.items())]
        for name, s in series:
            g = s.geometry
            print(f"  {name}: {s.n_frames} frames, {g.rows}x{g.cols} px at "
                  f"{g.pixel_spacing[0]:.4g}x{g.pixel_spacing[1]:.4g} mm, thickness {g.thickness:g} mm, "
                  f"frame {g.frame_period * 1000:.4g} ms, sides {', '.join(sorted(s.masks))}")
        if len(ds.sagittal) < 2:
            print("  note: no simultaneous sagittal pair; run will produce axial-only output")
        if ds.axial_reference_frame is not None:
            print(f"  closed-jaw reference frame: {ds.axial_reference_frame}")
    return code


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input, not the exclusion code argparse would use
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="condyletraj", description="3D condylar trajectories from 2D MRI masks")
    p.add_argument("--version", action="version", version=f"condyletraj {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="process one or more subject manifests")
    r.add_argument("--manifest", action="append", default=[], help="dataset manifest (repeatable)")
    r.add_argument("--config", help="INI config with a [pipeline] section")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, help="recorded in output headers")
    r.add_argument("--axial-only", action="store_true", help="skip the sagittal planes")
    r.add_argument("--point", choices=("iscom", "top"), help="point feeding the k channel")
    r.add_argument("--workers", type=int, default=1, help="parallel subject workers")
    r.set_defaults(func=cmd_run)

    ph = sub.add_parser("phantom", help="generate a synthetic dataset with ground truth")
    ph.add_argument("--spec", help="JSON phantom spec (defaults when omitted)")
    ph.add_argument("--out", required=True)
    ph.add_argument("--seed", type=int)
    ph.add_argument("--subject")
    ph.add_argument("--pgm", action="store_true", help="store masks as PGM files instead of inline RLE")
    ph.set_defaults(func=cmd_phantom)

    m = sub.add_parser("metrics", help="merge quality reports and summarize")
    m.add_argument("outputs", nargs="*", help="output directories or quality.csv files")
    m.add_argument("--out", help="write merged report and summary here")
    m.set_defaults(func=cmd_metrics)

    i = sub.add_parser("inspect", help="validate manifests")
    i.add_argument("--manifest", action="append", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (TrajectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL

