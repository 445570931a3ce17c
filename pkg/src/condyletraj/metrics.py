"""Trajectory quality metrics and the per-subject quality report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, InvalidArgument, NoFullCycleError

DISPLACEMENT_NORM_MM = 14.0
ASYMMETRY_THRESHOLD_MM = 2.5

REPORT_COLUMNS = ["subject", "side", "ratio", "msd_mm", "d_init_fin_mm", "delta_k_lr_mm",
                  "excluded_reason", "displacement_mm", "ge_14mm"]


def point_to_polyline(points, curve):
    """Distance from each point to the polyline through ``curve`` (shape (m, d))."""
    p = np.asarray(points, dtype=float)
    c = np.asarray(curve, dtype=float)
    if c.shape[0] == 1:
        return np.linalg.norm(p - c[0], axis=1)
    a, b = c[:-1], c[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = p[:, None, :] - a[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("pij,ij->pi", ap, ab) / denom
    t = np.where(denom > 0, np.clip(t, 0.0, 1.0), 0.0)
    foot = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(p[:, None, :] - foot, axis=2).min(axis=1)


def msd(u, v, mode="polyline"):
    """Symmetric mean distance between two curves.

    ``mode="polyline"`` measures each point against the other curve's
    segments; ``mode="points"`` against its samples only.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if u.size == 0 or v.size == 0:
        raise InvalidArgument("msd needs two non-empty point sequences")
    if mode == "polyline":
        duv, dvu = point_to_polyline(u, v), point_to_polyline(v, u)
    elif mode == "points":
        d = np.linalg.norm(u[:, None, :] - v[None, :, :], axis=2)
        duv, dvu = d.min(axis=1), d.min(axis=0)
    else:
        raise InvalidArgument(f"unknown msd mode {mode!r}")
    return float((duv.sum() + dvu.sum()) / (len(u) + len(v)))


def amplitude_ratio(pair):
    """A_AX / A_SAG per side for a best-match pair."""
    return pair.ratio


def opening_closing(traj):
    """Split a cycle trajectory at its most open sample (included in both halves)."""
    ijk = traj.ijk
    disp = np.linalg.norm(ijk - ijk[0], axis=1)
    peak = int(np.argmax(disp))
    return ijk[:peak + 1], ijk[peak:]


def init_final_distance(traj):
    closed = traj.closed_samples()
    if not closed:
        raise NoFullCycleError("trajectory has no closed-jaw samples")
    return float(np.linalg.norm(traj.ijk[closed[-1]] - traj.ijk[closed[0]]))


def delta_k_lr(left, right):
    """k_left - k_right at the first closed-jaw sample (before zero-referencing)."""
    if left is None or right is None:
        raise CoverageError("delta k needs both sides")
    cl, cr = left.closed_samples(), right.closed_samples()
    if not cl or not cr:
        raise NoFullCycleError("trajectory has no closed-jaw samples")
    return float(left.ijk[cl[0], 2] - right.ijk[cr[0], 2])


def max_displacement(traj):
    """Largest distance of the condyle from its starting position."""
    ijk = np.nan_to_num(traj.ijk - traj.ijk[0])
    return float(np.linalg.norm(ijk, axis=1).max())


@dataclass
class QualityRow:
    subject: str
    side: str
    ratio: float | None = None
    msd_mm: float | None = None
    d_init_fin_mm: float | None = None
    delta_k_lr_mm: float | None = None
    excluded_reason: str | None = None
    displacement_mm: float | None = None
    ge_14mm: bool | None = None
    asymmetric_placement: bool | None = None


@dataclass
class SubjectMetrics:
    """Everything the report needs for one subject."""

    subject: str
    exclusion: str | None = None
    ratio: dict | None = None
    msd: dict | None = None
    d_init_fin: dict | None = None
    delta_k: float | None = None
    displacement: dict | None = None


def quality_report(results, displacement_norm=DISPLACEMENT_NORM_MM,
                   asymmetry_threshold=ASYMMETRY_THRESHOLD_MM):
    """One row per subject and side, ordered by subject then side."""
    rows = []
    for res in sorted(results, key=lambda r: r.subject):
        for side, tag in (("left", "L"), ("right", "R")):
            if res.exclusion is not None:
                rows.append(QualityRow(res.subject, tag, excluded_reason=res.exclusion))
                continue
            # ratio and delta k are absent in axial-only runs
            disp = res.displacement[side]
            rows.append(QualityRow(
                subject=res.subject,
                side=tag,
                ratio=None if res.ratio is None else res.ratio[side],
                msd_mm=res.msd[side],
                d_init_fin_mm=res.d_init_fin[side],
                delta_k_lr_mm=res.delta_k,
                displacement_mm=disp,
                ge_14mm=disp >= displacement_norm,
                asymmetric_placement=None if res.delta_k is None else abs(res.delta_k) > asymmetry_threshold,
            ))
    return rows


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    return f"{float(x):.6g}"


def report_csv(rows, header=None):
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([fmt(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def parse_report_csv(text, source="<report>"):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != REPORT_COLUMNS:
        raise InvalidArgument(f"{source}: unexpected quality report columns {reader.fieldnames}")

    def num(s):
        return float(s) if s != "" else None

    rows = []
    for rec in reader:
        try:
            rows.append(QualityRow(
                subject=rec["subject"], side=rec["side"], ratio=num(rec["ratio"]),
                msd_mm=num(rec["msd_mm"]), d_init_fin_mm=num(rec["d_init_fin_mm"]),
                delta_k_lr_mm=num(rec["delta_k_lr_mm"]),
                excluded_reason=rec["excluded_reason"] or None,
                displacement_mm=num(rec["displacement_mm"]),
                ge_14mm=None if rec["ge_14mm"] == "" else rec["ge_14mm"] == "1",
            ))
        except ValueError as exc:
            raise InvalidArgument(f"{source}: {exc}") from None
    return rows


def format_table(rows, asymmetry_threshold=ASYMMETRY_THRESHOLD_MM):
    """Human-readable layout in the spirit of the published cohort table."""
    head = f"{'Subject':<10}{'Side':<6}{'A_AX/A_SAG':>11}{'MSD,mm':>9}{'d_i-f,mm':>10}{'dk_L-R,mm':>11}{'disp,mm':>9}  notes"
    lines = [head, "-" * len(head)]
    for r in rows:
        if r.excluded_reason:
            note = r.excluded_reason if r.side == "L" else ""
            lines.append(f"{r.subject:<10}{r.side:<6}{note}")
            continue
        notes = []
        if r.ge_14mm:
            notes.append(">=14mm")
        has_dk = r.delta_k_lr_mm is not None
        if r.side == "L" and has_dk and abs(r.delta_k_lr_mm) > asymmetry_threshold:
            notes.append("asymmetric axial placement")
        dk = f"{r.delta_k_lr_mm:>11.2f}" if r.side == "L" and has_dk else " " * 11
        ratio = f"{r.ratio:>11.2f}" if r.ratio is not None else f"{'-':>11}"
        lines.append(f"{r.subject:<10}{r.side:<6}{ratio}{r.msd_mm:>9.2f}"
                     f"{r.d_init_fin_mm:>10.2f}{dk}{r.displacement_mm:>9.2f}  {' '.join(notes)}")
    return "\n".join(lines) + "\n"


def summarize(rows):
    """Cohort aggregates: mean and range per metric over included rows."""
    inc = [r for r in rows if not r.excluded_reason]
    out = {"subjects": len({r.subject for r in rows}),
           "included_subjects": len({r.subject for r in inc}),
           "excluded_subjects": len({r.subject for r in rows if r.excluded_reason})}
    for name in ("ratio", "msd_mm", "d_init_fin_mm", "displacement_mm"):
        vals = np.array([getattr(r, name) for r in inc if getattr(r, name) is not None], dtype=float)
        if vals.size:
            out[name] = (float(vals.mean()), float(vals.min()), float(vals.max()))
    dk = {}
    for r in inc:
        if r.delta_k_lr_mm is not None:
            dk.setdefault(r.subject, r.delta_k_lr_mm)
    if dk:
        vals = np.array(list(dk.values()), dtype=float)
        out["delta_k_lr_mm"] = (float(vals.mean()), float(vals.min()), float(vals.max()))
        out["abs_delta_k_lr_mm_mean"] = float(np.abs(vals).mean())
    return out


def format_summary(summary):
    lines = [f"subjects: {summary['subjects']} "
             f"(included {summary['included_subjects']}, excluded {summary['excluded_subjects']})"]
    for name in ("ratio", "msd_mm", "d_init_fin_mm", "delta_k_lr_mm", "displacement_mm"):
        if name in summary:
            mean, lo, hi = summary[name]
            lines.append(f"{name}: mean {fmt(mean)} range [{fmt(lo)}, {fmt(hi)}]")
    if "abs_delta_k_lr_mm_mean" in summary:
        lines.append(f"abs_delta_k_lr_mm: mean {fmt(summary['abs_delta_k_lr_mm_mean'])}")
    return "\n".join(lines) + "\n"
