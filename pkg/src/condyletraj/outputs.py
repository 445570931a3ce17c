"""Serialization of subject results to the per-subject output directory.

Every file starts with a ``#`` header naming the tool version and config
digest. Floats use six significant digits and rows have a fixed order, so
reruns on the same input are byte-identical.
"""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from . import __version__
from .assembly import SIDES
from .config import dump_config
from .metrics import fmt, format_table, quality_report, report_csv


def header_line(cfg, extra=None):
    text = f"condyletraj {__version__} config {cfg.digest()}"
    if extra:
        text += " " + extra
    return text


def _csv_text(header, columns, rows):
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, (int, np.integer)) or isinstance(v, bool) else str(v)
                    for v in row])
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def trajectory_rows(result):
    rows = []
    for side in SIDES:
        traj = result.trajectories.get(side)
        if traj is None:
            continue
        for n in range(len(traj)):
            i, j, k = traj.ijk[n]
            span = traj.sagittal_frames[n] if traj.sagittal_frames is not None else (None, None)
            rows.append((int(traj.frames[n]), traj.times[n], side, i, j, _num(k), _num(traj.k_top[n]),
                         traj.phases[n] or "", int(traj.cycle_id),
                         None if span[0] is None else int(span[0]), None if span[1] is None else int(span[1])))
    return rows


def _num(x):
    return None if x is None or not np.isfinite(x) else x


PROJECTION_CHANNELS = ("com_i", "com_j", "com_k", "is_j", "top_k")

TRAJECTORY_COLUMNS = ["frame", "time_s", "side", "i_mm", "j_mm", "k_mm", "k_top_mm", "phase", "cycle_id",
                      "sagittal_frame_first", "sagittal_frame_last"]


def write_subject(result, out_dir, cfg, extra_header=None):
    """Write every output file for one subject; return the list of file names."""
    os.makedirs(out_dir, exist_ok=True)
    head = header_line(cfg, extra_header)
    files = {}

    files["verdict.txt"] = (f"# {head}\nsubject {result.subject}\nmode {result.mode}\n"
                            f"verdict {'excluded' if result.excluded else 'ok'}\n"
                            f"reason {result.exclusion or ''}\n")
    files["config.ini"] = f"# {head}\n" + dump_config(cfg)

    rows = quality_report([result.metrics], cfg.displacement_norm_mm, cfg.asymmetry_threshold_mm)
    files["quality.csv"] = report_csv(rows, header=head)
    files["quality.txt"] = f"# {head}\n" + format_table(rows, cfg.asymmetry_threshold_mm)

    if result.coverage is not None and result.coverage.fractions:
        cov = [(s, result.coverage.fractions[s], result.coverage.mask_fractions[s]) for s in SIDES]
        files["coverage.csv"] = _csv_text(head, ["side", "in_axial_slab_fraction", "mask_present_fraction"], cov)

    if result.trajectories:
        files["trajectory.csv"] = _csv_text(head, TRAJECTORY_COLUMNS, trajectory_rows(result))

    if result.phases:
        ph = []
        for plane in ("axial", "sagittal"):
            times = result.channels[plane].times if plane in result.channels else None
            for p in result.phases.get(plane, []):
                t0 = None if times is None else times[p.start]
                t1 = None if times is None else times[p.end]
                ph.append((plane, p.label, int(p.start), int(p.end), t0, t1))
        files["phases.csv"] = _csv_text(head, ["plane", "label", "start_frame", "end_frame", "start_s", "end_s"], ph)

    if result.cycles:
        cy = []
        selected = {}
        if result.pair is not None:
            selected = {"axial": result.pair.axial_index, "sagittal": result.pair.sagittal_index}
        elif result.trajectories:
            selected = {"axial": 0}
        for plane in ("axial", "sagittal"):
            for n, c in enumerate(result.cycles.get(plane, [])):
                for side in sorted(c.triples):
                    s, m, e = c.triples[side]
                    cy.append((plane, n, int(c.start_frame), int(c.peak_frame), int(c.end_frame), side,
                               s, m, e, c.amplitude(side), selected.get(plane) == n))
        files["cycles.csv"] = _csv_text(head, ["plane", "cycle", "start_frame", "peak_frame", "end_frame", "side",
                                               "j_start_mm", "j_max_mm", "j_end_mm", "amplitude_mm", "selected"], cy)

    if result.warp is not None:
        a0, s0 = result.pair.axial.start_frame, result.pair.sagittal.start_frame
        wp = [(int(a + a0), int(q + s0)) for a, q in result.warp.pairs]
        files["warp_path.csv"] = _csv_text(head + f" cost {fmt(result.warp.cost)}",
                                           ["axial_frame", "sagittal_frame"], wp)

    if result.transforms:
        tf = [(plane, np.degrees(t.angle), t.translation[0], t.translation[1])
              for plane, t in sorted(result.transforms.items())]
        files["transforms.csv"] = _csv_text(head, ["plane", "angle_deg", "shift_i_mm", "shift_j_mm"], tf)

    if result.basis is not None:
        b = result.basis
        rows = [("origin", *b.origin), ("i", *b.i), ("j", *b.j), ("k", *b.k)]
        if b.p is not None:
            rows += [("p", *b.p), ("q", *b.q)]
        angles = "" if b.alpha is None else " alpha_deg {} beta_deg {} theta_deg {} phi_deg {}".format(
            *(fmt(np.degrees(a)) for a in (b.alpha, b.beta, b.theta, b.phi)))
        files["basis.csv"] = _csv_text(head + angles, ["vector", "x", "y", "z"], rows)

    if result.channels:
        pr = []
        for plane in ("axial", "sagittal"):
            ch = result.channels.get(plane)
            if ch is None:
                continue
            for side in SIDES:
                cols = [ch.values.get(n, {}).get(side) for n in PROJECTION_CHANNELS]
                for f, t in enumerate(ch.times):
                    pr.append((plane, f, t, side, *(None if c is None else c[f] for c in cols)))
        files["projections.csv"] = _csv_text(
            head, ["plane", "frame", "time_s", "side", "com_i_mm", "com_j_mm", "com_k_mm", "is_j_mm", "top_k_mm"], pr)

    for name in sorted(files):
        _write(os.path.join(out_dir, name), files[name])
    return sorted(files)


def write_combined_quality(results, out_dir, cfg, extra_header=None):
    rows = quality_report([r.metrics for r in results], cfg.displacement_norm_mm, cfg.asymmetry_threshold_mm)
    head = header_line(cfg, extra_header)
    _write(os.path.join(out_dir, "quality.csv"), report_csv(rows, header=head))
    _write(os.path.join(out_dir, "quality.txt"), f"# {head}\n" + format_table(rows, cfg.asymmetry_threshold_mm))
    return rows
