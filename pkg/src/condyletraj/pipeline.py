"""End-to-end processing of one subject: masks to fused 3D trajectories and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .assembly import (SIDES, CoverageVerdict, check_missing, fuse_3d, fuse_axial_only,
                       readjust_slice_frame, validate_coverage, zero_reference)
from .config import PipelineConfig
from .errors import CoverageError, EmptyMaskError, InsufficientMaskError, NoFullCycleError, NoMotionError
from .geometry import build_basis, pixel_to_patient, project_to_basis, sagittal_frames, with_sagittal
from .masks import center_of_mass, intersection_mask, largest_component, top_point
from .metrics import (SubjectMetrics, delta_k_lr, init_final_distance, max_displacement, msd,
                      opening_closing)
from .phases import detect_phases, extract_cycles, best_match
from .temporal import adaptive_lowpass, dtw_align, median_filter

EXCLUDING = (NoFullCycleError, NoMotionError)


@dataclass
class PlaneFeatures:
    """Raw per-frame mask points of one plane, in patient coordinates (NaN when absent)."""

    plane: str
    times: np.ndarray
    dt: float
    com: dict
    is_com: dict
    top: dict = field(default_factory=dict)

    @property
    def n_frames(self):
        return len(self.times)

    def is_missing(self, side):
        return np.isnan(self.is_com[side][:, 0])


def _nan_points(n):
    return np.full((n, 3), np.nan)


def axial_features(ds):
    series = ds.axial
    geom = series.geometry
    n = series.n_frames
    com, is_com = {}, {}
    for side in SIDES:
        com[side] = _nan_points(n)
        is_com[side] = _nan_points(n)
        sag = ds.sagittal.get(side)
        for f, pix in enumerate(series.masks[side]):
            lc = largest_component(pix)
            if not lc.any():
                continue
            com[side][f] = pixel_to_patient(geom, center_of_mass(lc))
            if sag is not None:
                inter = intersection_mask(lc, geom, sag.geometry)
                if inter.any():
                    is_com[side][f] = pixel_to_patient(geom, center_of_mass(inter))
    return PlaneFeatures("axial", np.asarray(series.times, dtype=float), geom.frame_period, com, is_com)


def sagittal_features(ds, top_fraction):
    """Sagittal features on the left series' time base."""
    axial = ds.axial.geometry
    inferior = axial.normal if axial.normal[2] < 0 else -axial.normal
    base_times = np.asarray(ds.sagittal["left"].times, dtype=float)
    com, is_com, top = {}, {}, {}
    for side in SIDES:
        series = ds.sagittal[side]
        geom = series.geometry
        n = series.n_frames
        c, s, t = _nan_points(n), _nan_points(n), _nan_points(n)
        hint = np.array([inferior @ geom.row_dir / geom.pixel_spacing[0],
                         inferior @ geom.col_dir / geom.pixel_spacing[1]])
        for f, pix in enumerate(series.masks[side]):
            lc = largest_component(pix)
            if not lc.any():
                continue
            c[f] = pixel_to_patient(geom, center_of_mass(lc))
            inter = intersection_mask(lc, geom, axial)
            if inter.any():
                s[f] = pixel_to_patient(geom, center_of_mass(inter))
            try:
                t[f] = pixel_to_patient(geom, top_point(lc, hint, fraction=top_fraction))
            except InsufficientMaskError:
                pass
        times = np.asarray(series.times, dtype=float)
        if times.shape != base_times.shape or not np.allclose(times, base_times, rtol=0, atol=1e-9):
            c, s, t = (_resample(a, times, base_times) for a in (c, s, t))
        com[side], is_com[side], top[side] = c, s, t
    dt = ds.sagittal["left"].geometry.frame_period
    return PlaneFeatures("sagittal", base_times, dt, com, is_com, top)


def _resample(points, times, target):
    out = _nan_points(len(target))
    ok = ~np.isnan(points[:, 0])
    if ok.sum() >= 2:
        for d in range(3):
            out[:, d] = np.interp(target, times[ok], points[ok, d], left=np.nan, right=np.nan)
    return out


def fill_gaps(values):
    """Linear interpolation over NaN samples, holding the ends."""
    v = np.asarray(values, dtype=float).copy()
    ok = ~np.isnan(v)
    if not ok.any():
        raise EmptyMaskError("channel has no valid samples")
    if not ok.all():
        idx = np.arange(v.size)
        v[~ok] = np.interp(idx[~ok], idx[ok], v[ok])
    return v


def condition(values, dt, cfg):
    """Gap filling, running median and period-adaptive low-pass."""
    v = median_filter(fill_gaps(values), cfg.median_window)
    if v.size < 8:
        return v
    return adaptive_lowpass(v, dt, harmonics=cfg.lowpass_harmonics, order=cfg.lowpass_order,
                            fallback_period=cfg.fallback_period_s)


@dataclass
class PlaneChannels:
    """Conditioned basis-coordinate channels of one plane: name -> side -> (n,)."""

    plane: str
    times: np.ndarray
    values: dict

    def get(self, name, side):
        return self.values[name][side]

    def side_mean(self, name):
        return np.mean([self.values[name][s] for s in SIDES], axis=0)


def plane_channels(feat, basis, cfg):
    vals = {}
    sources = [("com", feat.com), ("is", feat.is_com)]
    if feat.top:
        sources.append(("top", feat.top))
    for prefix, pts in sources:
        for side in SIDES:
            p = pts[side]
            if np.isnan(p[:, 0]).all():
                if prefix != "com":
                    continue
                raise EmptyMaskError(f"{feat.plane} {side}: no {prefix} mask in any frame")
            ijk = project_to_basis(basis, p)
            for d, axis in enumerate("ijk"):
                vals.setdefault(f"{prefix}_{axis}", {})[side] = condition(ijk[:, d], feat.dt, cfg)
    return PlaneChannels(feat.plane, feat.times, vals)


def segment(channels, cfg, signal):
    phases = detect_phases(channels.side_mean(signal), channels.times,
                           threshold_fraction=cfg.velocity_threshold_fraction,
                           min_duration=cfg.min_phase_duration_s,
                           closed_fraction=cfg.closed_level_fraction)
    cycles = extract_cycles(phases, {s: channels.get(signal, s) for s in SIDES}, window=cfg.triple_window)
    return phases, cycles


def frame_labels(phases, n):
    labels = [None] * n
    for p in phases:
        labels[p.start:p.end + 1] = [p.label] * len(p)
    return labels


def closed_centers(feat, frame, window):
    h = window // 2
    lo, hi = max(0, frame - h), min(feat.n_frames, frame + h + 1)
    out = {}
    for side in SIDES:
        pts = feat.com[side][lo:hi]
        pts = pts[~np.isnan(pts[:, 0])]
        if not len(pts):
            raise EmptyMaskError(f"no axial {side} mask near closed-jaw frame {frame}")
        out[side] = pts.mean(axis=0)
    return out


def provisional_centers(feat):
    out = {}
    for side in SIDES:
        pts = feat.com[side]
        if np.isnan(pts[:, 0]).all():
            raise EmptyMaskError(f"axial {side}: no mask in any frame")
        out[side] = np.nanmedian(pts, axis=0)
    return out


def _adjust_plane(channels, cycle, window):
    """Readjust a plane's (i, j) channels in place on ``cycle``; return the transform."""
    com = {s: np.stack([channels.get("com_i", s), channels.get("com_j", s)], axis=1) for s in SIDES}
    adjusted, tf = readjust_slice_frame(com, cycle, window)
    for s in SIDES:
        channels.values["com_i"][s], channels.values["com_j"][s] = adjusted[s][:, 0], adjusted[s][:, 1]
        if "is_i" in channels.values:
            pts = tf.apply(np.stack([channels.get("is_i", s), channels.get("is_j", s)], axis=1))
            channels.values["is_i"][s], channels.values["is_j"][s] = pts[:, 0], pts[:, 1]
        if "top_i" in channels.values and s in channels.values["top_i"]:
            pts = tf.apply(np.stack([channels.get("top_i", s), channels.get("top_j", s)], axis=1))
            channels.values["top_i"][s], channels.values["top_j"][s] = pts[:, 0], pts[:, 1]
    return tf


@dataclass
class SubjectResult:
    subject: str
    mode: str                               # "3d" or "axial-only"
    exclusion: str | None = None
    message: str | None = None
    trajectories: dict = field(default_factory=dict)    # zero-referenced, side -> Trajectory3D
    raw_trajectories: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)          # plane -> list[PhaseInterval]
    cycles: dict = field(default_factory=dict)          # plane -> list[MotionCycle]
    pair: object = None
    warp: object = None
    transforms: dict = field(default_factory=dict)      # plane -> RigidTransform2D
    coverage: CoverageVerdict | None = None
    basis: object = None
    channels: dict = field(default_factory=dict)        # plane -> PlaneChannels
    metrics: SubjectMetrics | None = None

    @property
    def excluded(self):
        return self.exclusion is not None


def _excluded(ds, mode, reason, message=None, **kw):
    return SubjectResult(ds.subject, mode, exclusion=reason, message=message or reason,
                         metrics=SubjectMetrics(ds.subject, exclusion=reason), **kw)


def process_subject(ds, cfg=None):
    """Run the full pipeline on one dataset.

    Exclusions (missing sagittal pair, coverage failures, no full cycle,
    too many missing frames) come back as results with ``exclusion`` set;
    invalid input raises.
    """
    cfg = cfg or PipelineConfig()
    have_sagittal = all(s in ds.sagittal for s in SIDES)
    if cfg.axial_only or not have_sagittal:
        res = process_axial_only(ds, cfg)
        if not have_sagittal:
            res.exclusion = errors.NO_SIMULTANEOUS_SAGITTAL
            res.message = errors.NO_SIMULTANEOUS_SAGITTAL
            res.metrics = SubjectMetrics(ds.subject, exclusion=errors.NO_SIMULTANEOUS_SAGITTAL)
        return res

    axial_geom = ds.axial.geometry
    coverage = validate_coverage({s: ds.sagittal[s].masks[s] for s in SIDES},
                                 {s: ds.sagittal[s].geometry for s in SIDES},
                                 axial_geom, cfg.coverage_threshold)
    if not coverage.ok:
        return _excluded(ds, "3d", coverage.reason, coverage=coverage)

    ax_feat = axial_features(ds)
    sg_feat = sagittal_features(ds, cfg.top_fraction)
    try:
        return _process_3d(ds, cfg, ax_feat, sg_feat, coverage)
    except EXCLUDING as exc:
        return _excluded(ds, "3d", errors.NO_FULL_CYCLE, str(exc), coverage=coverage)
    except CoverageError as exc:
        if exc.reason is None:
            raise
        return _excluded(ds, "3d", exc.reason, str(exc), coverage=coverage)


def _segment_both(ax_feat, sg_feat, basis, cfg):
    ax = plane_channels(ax_feat, basis, cfg)
    sg = plane_channels(sg_feat, basis, cfg)
    ax_phases, ax_cycles = segment(ax, cfg, "is_j")
    sg_phases, sg_cycles = segment(sg, cfg, "is_j")
    pair = best_match(ax_cycles, sg_cycles)
    return ax, sg, (ax_phases, ax_cycles), (sg_phases, sg_cycles), pair


def _process_3d(ds, cfg, ax_feat, sg_feat, coverage):
    axial_geom = ds.axial.geometry
    window = cfg.triple_window
    ref = ds.axial_reference_frame
    if ref is None:
        c = provisional_centers(ax_feat)
        basis = build_basis(c["left"], c["right"], axial_geom)
        *_, pair = _segment_both(ax_feat, sg_feat, basis, cfg)
        ref = pair.axial.start_frame
    c = closed_centers(ax_feat, ref, window)
    basis = build_basis(c["left"], c["right"], axial_geom)
    left_ax, right_ax = sagittal_frames(basis, ds.sagittal["left"].geometry, ds.sagittal["right"].geometry)
    basis = with_sagittal(basis, left_ax, right_ax)

    ax, sg, (ax_phases, ax_cycles), (sg_phases, sg_cycles), pair = _segment_both(ax_feat, sg_feat, basis, cfg)
    ratio = pair.ratio

    tf_ax = _adjust_plane(ax, pair.axial, window)
    tf_sg = _adjust_plane(sg, pair.sagittal, window)

    a0, a1 = pair.axial.start_frame, pair.axial.end_frame
    s0, s1 = pair.sagittal.start_frame, pair.sagittal.end_frame
    tol = cfg.missing_frame_tolerance
    for side in SIDES:
        check_missing(ax_feat.is_missing(side)[a0:a1 + 1], tol, f"axial {side} IS-mask")
        check_missing(sg_feat.is_missing(side)[s0:s1 + 1], tol, f"sagittal {side} IS-mask")
        if cfg.point == "top":
            check_missing(np.isnan(sg_feat.top[side][s0:s1 + 1, 0]), tol, f"sagittal {side} top point")

    warp = dtw_align(ax.side_mean("is_j")[a0:a1 + 1], sg.side_mean("is_j")[s0:s1 + 1])
    ax_frames = np.arange(a0, a1 + 1)
    labels = frame_labels(ax_phases, ax_feat.n_frames)[a0:a1 + 1]
    top_k = {s: sg.values["top_k"][s] if s in sg.values.get("top_k", {}) else sg.get("com_k", s) for s in SIDES}
    fused = fuse_3d(
        axial={s: {"com_i": ax.get("com_i", s)[a0:a1 + 1], "is_j": ax.get("is_j", s)[a0:a1 + 1]} for s in SIDES},
        sagittal={s: {"is_j": sg.get("is_j", s)[s0:s1 + 1], "com_k": sg.get("com_k", s)[s0:s1 + 1],
                      "top_k": top_k[s][s0:s1 + 1]} for s in SIDES},
        warp=warp, axial_frames=ax_frames, axial_times=ax_feat.times[a0:a1 + 1], phase_labels=labels,
        sagittal_frames=np.arange(s0, s1 + 1), spline_p=cfg.spline_p, point=cfg.point,
        cycle_id=pair.axial_index,
    )
    dk = delta_k_lr(fused["left"], fused["right"])
    trajs = {s: zero_reference(t) for s, t in fused.items()}
    metrics = SubjectMetrics(
        subject=ds.subject,
        ratio=ratio,
        msd={s: msd(*opening_closing(t), mode=cfg.msd_mode) for s, t in trajs.items()},
        d_init_fin={s: init_final_distance(t) for s, t in trajs.items()},
        delta_k=dk,
        displacement={s: max_displacement(t) for s, t in trajs.items()},
    )
    return SubjectResult(
        subject=ds.subject, mode="3d", trajectories=trajs, raw_trajectories=fused,
        phases={"axial": ax_phases, "sagittal": sg_phases},
        cycles={"axial": ax_cycles, "sagittal": sg_cycles},
        pair=pair, warp=warp, transforms={"axial": tf_ax, "sagittal": tf_sg},
        coverage=coverage, basis=basis, channels={"axial": ax, "sagittal": sg}, metrics=metrics,
    )


def _planar(traj):
    return replace(traj, ijk=traj.ijk[:, :2])


def process_axial_only(ds, cfg):
    """2D trajectories in the axial plane when no sagittal pair is used."""
    ax_feat = axial_features(ds)
    window = cfg.triple_window
    try:
        ref = ds.axial_reference_frame
        if ref is None:
            c = provisional_centers(ax_feat)
            basis = build_basis(c["left"], c["right"], ds.axial.geometry)
            _, cycles = segment(plane_channels(ax_feat, basis, cfg), cfg, "com_j")
            ref = cycles[0].start_frame
        c = closed_centers(ax_feat, ref, window)
        basis = build_basis(c["left"], c["right"], ds.axial.geometry)
        ax = plane_channels(ax_feat, basis, cfg)
        phases, cycles = segment(ax, cfg, "com_j")
    except EXCLUDING as exc:
        return _excluded(ds, "axial-only", errors.NO_FULL_CYCLE, str(exc))
    cycle = cycles[0]
    tf = _adjust_plane(ax, cycle, window)
    a0, a1 = cycle.start_frame, cycle.end_frame
    for side in SIDES:
        check_missing(np.isnan(ax_feat.com[side][a0:a1 + 1, 0]), cfg.missing_frame_tolerance, f"axial {side} mask")
    labels = frame_labels(phases, ax_feat.n_frames)[a0:a1 + 1]
    fused = fuse_axial_only({s: {"com_i": ax.get("com_i", s)[a0:a1 + 1], "com_j": ax.get("com_j", s)[a0:a1 + 1]}
                             for s in SIDES},
                            np.arange(a0, a1 + 1), ax_feat.times[a0:a1 + 1], labels,
                            spline_p=cfg.spline_p, cycle_id=0)
    trajs = {s: zero_reference(t) for s, t in fused.items()}
    flat = {s: _planar(t) for s, t in trajs.items()}
    metrics = SubjectMetrics(
        subject=ds.subject,
        msd={s: msd(*opening_closing(t), mode=cfg.msd_mode) for s, t in flat.items()},
        d_init_fin={s: init_final_distance(t) for s, t in flat.items()},
        displacement={s: max_displacement(t) for s, t in flat.items()},
    )
    return SubjectResult(
        subject=ds.subject, mode="axial-only", trajectories=trajs, raw_trajectories=fused,
        phases={"axial": phases}, cycles={"axial": cycles}, transforms={"axial": tf},
        basis=basis, channels={"axial": ax}, metrics=metrics,
    )
