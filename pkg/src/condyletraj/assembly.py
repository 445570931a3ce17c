"""Head-motion re-adjustment, fusion of axial and sagittal channels into 3D
trajectories, zero-referencing and coverage checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .errors import CoverageError, DegenerateGeometry
from .masks import intersection_mask, largest_component
from .phases import CLOSED, window_mean
from .temporal import apply_warp, smooth_spline

SIDES = ("left", "right")


@dataclass(frozen=True)
class RigidTransform2D:
    """x -> R(angle) @ x + translation, in the (i, j) plane."""

    angle: float
    translation: tuple

    def apply(self, pts):
        pts = np.asarray(pts, dtype=float)
        c, s = np.cos(self.angle), np.sin(self.angle)
        out = np.empty_like(pts)
        out[..., 0] = c * pts[..., 0] - s * pts[..., 1] + self.translation[0]
        out[..., 1] = s * pts[..., 0] + c * pts[..., 1] + self.translation[1]
        return out


def reference_points(positions, cycle, window=3):
    """Per-side mean of the closed-jaw (i, j) positions at cycle start and end."""
    refs = {}
    for side, xy in positions.items():
        xy = np.asarray(xy, dtype=float)
        start = [window_mean(xy[:, d], cycle.start_frame, window) for d in (0, 1)]
        end = [window_mean(xy[:, d], cycle.end_frame, window) for d in (0, 1)]
        refs[side] = (np.array(start) + np.array(end)) / 2
    return refs


def readjust_slice_frame(positions, cycle, window=3):
    """Re-seat one slice's (i, j) coordinates on the selected cycle.

    The two-side midpoint of the reference points goes to the origin and the
    right->left direction between them onto +i. Returns the adjusted
    positions and the transform applied.
    """
    refs = reference_points(positions, cycle, window)
    d = refs["left"] - refs["right"]
    if np.linalg.norm(d) <= 1e-9:
        raise DegenerateGeometry("left and right reference points coincide")
    mid = (refs["left"] + refs["right"]) / 2
    angle = -np.arctan2(d[1], d[0])
    c, s = np.cos(angle), np.sin(angle)
    shift = -np.array([c * mid[0] - s * mid[1], s * mid[0] + c * mid[1]])
    tf = RigidTransform2D(float(angle), (float(shift[0]), float(shift[1])))
    return {side: tf.apply(xy) for side, xy in positions.items()}, tf


@dataclass
class Trajectory3D:
    side: str
    frames: np.ndarray        # axial frame indices
    times: np.ndarray         # seconds, axial time base
    ijk: np.ndarray           # (n, 3) mm
    k_top: np.ndarray         # (n,) mm, top-point k channel
    phases: list              # per-sample label
    cycle_id: int = 0
    sagittal_frames: np.ndarray | None = None  # (n, 2) first/last matched sagittal frame
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    def closed_samples(self):
        return [n for n, p in enumerate(self.phases) if p == CLOSED]


def fuse_3d(axial, sagittal, warp, axial_frames, axial_times, phase_labels,
            sagittal_frames=None, spline_p=0.1, point="iscom", cycle_id=0):
    """Fuse per-side channels of a matched cycle pair into 3D trajectories.

    ``axial[side]`` holds ``com_i`` and ``is_j`` over the axial cycle window;
    ``sagittal[side]`` holds ``is_j``, ``com_k`` and ``top_k`` over the
    sagittal window. The sagittal channels are carried to the axial time base
    with ``warp``; then i comes from the axial slice, k from the sagittal
    one, j is the two-plane mean, and every channel is spline-smoothed.
    """
    n = len(axial_frames)
    out = {}
    for side in sorted(axial):
        ax = axial[side]
        sg = {name: apply_warp(warp, v, n) for name, v in sagittal[side].items()}
        k_raw = sg["top_k"] if point == "top" else sg["com_k"]
        i = smooth_spline(ax["com_i"], p=spline_p)
        j = smooth_spline((np.asarray(ax["is_j"], dtype=float) + sg["is_j"]) / 2, p=spline_p)
        k = smooth_spline(k_raw, p=spline_p)
        k_top = smooth_spline(sg["top_k"], p=spline_p)
        sag_span = None
        if sagittal_frames is not None:
            sag_span = np.zeros((n, 2), dtype=int)
            sf = np.asarray(sagittal_frames)
            for r in range(n):
                matched = warp.query_index[warp.ref_index == r]
                sag_span[r] = (sf[matched.min()], sf[matched.max()])
        out[side] = Trajectory3D(
            side=side,
            frames=np.asarray(axial_frames),
            times=np.asarray(axial_times, dtype=float),
            ijk=np.stack([i, j, k], axis=1),
            k_top=k_top,
            phases=list(phase_labels),
            cycle_id=cycle_id,
            sagittal_frames=sag_span,
            provenance={"i": "axial com", "j": "mean of axial and sagittal IS-mask com",
                        "k": "sagittal top point" if point == "top" else "sagittal com"},
        )
    return out


def fuse_axial_only(axial, axial_frames, axial_times, phase_labels, spline_p=0.1, cycle_id=0):
    """2D fallback when no simultaneous sagittal pair exists: i and j from the axial slice."""
    out = {}
    n = len(axial_frames)
    for side in sorted(axial):
        i = smooth_spline(axial[side]["com_i"], p=spline_p)
        j = smooth_spline(axial[side]["com_j"], p=spline_p)
        out[side] = Trajectory3D(
            side=side,
            frames=np.asarray(axial_frames),
            times=np.asarray(axial_times, dtype=float),
            ijk=np.stack([i, j, np.full(n, np.nan)], axis=1),
            k_top=np.full(n, np.nan),
            phases=list(phase_labels),
            cycle_id=cycle_id,
            provenance={"i": "axial com", "j": "axial com", "k": "unavailable"},
        )
    return out


def zero_reference(traj):
    """Shift j and k so the first sample sits at zero; i is left alone."""
    ijk = traj.ijk.copy()
    ijk[:, 1:] -= ijk[0, 1:]
    return replace(traj, ijk=ijk, k_top=traj.k_top - traj.k_top[0])


@dataclass
class CoverageVerdict:
    fractions: dict
    mask_fractions: dict
    reason: str | None

    @property
    def ok(self):
        return self.reason is None


def validate_coverage(sagittal_masks, sagittal_geoms, axial_geom, threshold=0.5):
    """Check that each sagittal condyle mask reaches the axial slab often enough.

    ``sagittal_masks[side]`` is the frame list of that side's sagittal series.
    A missing side yields the no-simultaneous-imaging verdict. Sides whose
    masks are mostly empty count as masks out of plane; sides whose masks
    exist but rarely meet the axial slab count as condyles out of plane.
    """
    if any(side not in sagittal_masks or not sagittal_masks[side] for side in SIDES):
        return CoverageVerdict({}, {}, errors.NO_SIMULTANEOUS_SAGITTAL)
    fractions, present = {}, {}
    for side in SIDES:
        frames = sagittal_masks[side]
        hits = nonempty = 0
        for pix in frames:
            pix = largest_component(pix)
            if pix.any():
                nonempty += 1
                if intersection_mask(pix, sagittal_geoms[side], axial_geom).any():
                    hits += 1
        fractions[side] = hits / len(frames)
        present[side] = nonempty / len(frames)
    out = [s for s in SIDES if fractions[s] < threshold]
    if not out:
        reason = None
    elif all(present[s] < threshold for s in out) and len(out) == 2:
        reason = errors.SAGITTAL_MASKS_OUT
    elif len(out) == 2:
        reason = errors.BOTH_CONDYLES_OUT
    elif out == ["right"]:
        reason = errors.RIGHT_CONDYLE_OUT
    else:
        reason = errors.LEFT_CONDYLE_OUT
    return CoverageVerdict(fractions, present, reason)


def check_missing(missing, tolerance, what):
    """Raise a coverage error when too many cycle frames had no mask."""
    frac = float(np.mean(missing)) if len(missing) else 1.0
    if frac > tolerance:
        raise CoverageError(f"{what}: {frac:.0%} of cycle frames have no mask",
                            reason=errors.MISSING_FRAMES)
    return frac
