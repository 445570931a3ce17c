"""Synthetic condyle motion phantom with known ground truth.

Each condyle is an ellipsoid sliding along an anterior-inferior circular arc.
The axial and the two sagittal series are separate performances of the
open-close task: each has its own per-cycle amplitude jitter, and the
sagittal one can be acquired with a static head shift relative to the axial
one. Within a series the head may drift (linear translation plus a rotation
about the superior axis through the condyle midpoint).

A slice's mask is the cross-section of the ellipsoid with the slice's centre
plane, rasterized by pixel-centre inclusion. With ``empty_outside_slab`` the
mask is blanked whenever the ellipsoid centre lies farther than half the slice
thickness from that plane, a thin-slab visibility model.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument, InvalidSpec
from .geometry import (SliceGeometry, build_basis, patient_to_plane, pixel_to_patient,
                       project_to_basis, rotation_matrix)
from .manifest import Dataset, SliceSeries, save_manifest
from .phases import CLOSED, CLOSING, OPENING

ANTERIOR = np.array([0.0, -1.0, 0.0])
INFERIOR = np.array([0.0, 0.0, -1.0])
SIDES = ("left", "right")


@dataclass
class PhantomSpec:
    subject: str = "phantom"
    seed: int = 0
    rest_left: tuple = (50.0, 0.0, 0.0)
    rest_right: tuple = (-50.0, 0.0, 0.0)
    amplitude_mm: tuple = (14.0, 14.0)          # left, right; arc length of the opening
    path_curvature: float = 0.025               # 1/mm, 0 for a straight anterior path
    period_s: float = 6.0
    n_cycles: float = 3.0
    jitter: float = 0.0                         # per-cycle amplitude factor in [1-j, 1+j]
    closing_bulge_mm: float = 0.0               # inferior detour of the closing path, peak mm
    drift_velocity_mm_s: tuple = (0.0, 0.0, 0.0)
    drift_rotation_deg_s: float = 0.0
    semi_axes_mm: tuple = (9.0, 4.5, 8.0)       # along x, y, z of the head frame
    # axial slice
    axial_fov_mm: float = 192.0
    axial_matrix: int = 136
    axial_frame_period_s: float = 0.0211
    axial_thickness_mm: float = 5.0
    axial_center: tuple = (0.0, -7.0, 0.0)
    axial_roll_deg: float = 0.0                 # about the anterior-posterior axis
    axial_pitch_deg: float = 0.0                # about the left-right axis
    # sagittal slices
    sagittal_present: bool = True
    sagittal_fov_mm: float = 100.0
    sagittal_matrix: int = 168
    sagittal_frame_period_s: float = 0.0525
    sagittal_thickness_mm: float = 5.0
    sagittal_x_mm: tuple = (50.0, -50.0)        # left, right plane positions
    sagittal_yaw_deg: tuple = (0.0, 0.0)        # in-axial-plane obliquity, left, right
    sagittal_center_yz: tuple = (-7.0, 0.0)
    acquisition_offset_s: float = 600.0
    # static head pose change between the axial and the sagittal series
    inter_sequence_shift_mm: tuple = (0.0, 0.0, 0.0)
    inter_sequence_rotation_deg: tuple = (0.0, 0.0, 0.0)   # about x, y, z, applied in that order
    inter_sequence_pivot: tuple | None = None
    boundary_noise: float = 0.0                 # flip probability for boundary pixels
    empty_outside_slab: bool = False            # blank the mask once the centre leaves the slab

    def __post_init__(self):
        if min(self.amplitude_mm) < 0:
            raise InvalidSpec("amplitudes must be non-negative")
        if self.period_s <= 0 or self.n_cycles <= 0:
            raise InvalidSpec("period and number of cycles must be positive")
        if min(self.semi_axes_mm) <= 0:
            raise InvalidSpec("ellipsoid semi-axes must be positive")
        if self.closing_bulge_mm < 0:
            raise InvalidSpec("closing bulge must be non-negative")
        if not 0 <= self.jitter < 1:
            raise InvalidSpec("jitter must be in [0, 1)")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidSpec(f"unknown phantom fields: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)


def _slice(center, row_dir, col_dir, fov, matrix, thickness, period, label):
    spacing = fov / matrix
    c = (matrix - 1) / 2
    origin = np.asarray(center) - c * spacing * (np.asarray(row_dir) + np.asarray(col_dir))
    return SliceGeometry(origin, row_dir, col_dir, (spacing, spacing), matrix, matrix,
                         thickness, period, label)


def axial_geometry(spec):
    rot = rotation_matrix([1, 0, 0], math.radians(spec.axial_pitch_deg)) @ \
        rotation_matrix([0, 1, 0], math.radians(spec.axial_roll_deg))
    return _slice(spec.axial_center, rot @ [0.0, 1.0, 0.0], rot @ [1.0, 0.0, 0.0],
                  spec.axial_fov_mm, spec.axial_matrix, spec.axial_thickness_mm,
                  spec.axial_frame_period_s, "axial")


def sagittal_geometry(spec, side):
    n = SIDES.index(side)
    rot = rotation_matrix([0, 0, 1], math.radians(spec.sagittal_yaw_deg[n]))
    center = (spec.sagittal_x_mm[n],) + tuple(spec.sagittal_center_yz)
    return _slice(center, rot @ [0.0, 0.0, -1.0], rot @ [0.0, 1.0, 0.0],
                  spec.sagittal_fov_mm, spec.sagittal_matrix, spec.sagittal_thickness_mm,
                  spec.sagittal_frame_period_s, f"sagittal_{side}")


def frame_count(spec, period):
    return int(math.floor(spec.n_cycles * spec.period_s / period + 1e-9)) + 1


def _pivot(spec):
    if spec.inter_sequence_pivot is not None:
        return np.asarray(spec.inter_sequence_pivot, dtype=float)
    return (np.asarray(spec.rest_left) + np.asarray(spec.rest_right)) / 2


def _static_pose(spec, sequence):
    if sequence == "axial":
        return np.eye(3), np.zeros(3)
    rx, ry, rz = (math.radians(a) for a in spec.inter_sequence_rotation_deg)
    rot = rotation_matrix([0, 0, 1], rz) @ rotation_matrix([0, 1, 0], ry) @ rotation_matrix([1, 0, 0], rx)
    piv = _pivot(spec)
    return rot, piv - rot @ piv + np.asarray(spec.inter_sequence_shift_mm, dtype=float)


def cycle_factors(spec, rng):
    """Per-cycle amplitude factors for the axial and the sagittal series."""
    n = int(math.ceil(spec.n_cycles)) + 1
    out = {}
    for seq in ("axial", "sagittal"):
        u = rng.uniform(-1.0, 1.0, size=n)
        out[seq] = 1.0 + spec.jitter * u
    return out


def arc_offset(spec, s):
    """Head-frame displacement after sliding ``s`` mm along the condylar path."""
    s = np.asarray(s, dtype=float)[..., None]
    k = spec.path_curvature
    if k == 0:
        return s * ANTERIOR
    return (np.sin(k * s) / k) * ANTERIOR + ((1 - np.cos(k * s)) / k) * INFERIOR


@dataclass
class Truth:
    sequence: str
    times: np.ndarray               # absolute seconds
    local_times: np.ndarray         # seconds since the series start
    positions: dict                 # side -> (n, 3) mm
    rotations: np.ndarray           # (n, 3, 3) head orientation
    displacement: dict              # side -> (n,) arc length mm
    labels: list = field(default_factory=list)
    factors: np.ndarray | None = None


def synth_truth(spec, sequence="axial", local_times=None, factors=None):
    """Ground-truth condyle centres for one series.

    ``factors`` are the per-cycle amplitude multipliers (see
    :func:`cycle_factors`); None means no jitter.
    """
    if sequence not in ("axial", "sagittal"):
        raise InvalidArgument(f"unknown sequence {sequence!r}")
    if local_times is None:
        period = spec.axial_frame_period_s if sequence == "axial" else spec.sagittal_frame_period_s
        local_times = np.arange(frame_count(spec, period)) * period
    tau = np.asarray(local_times, dtype=float)
    T = spec.period_s
    cyc = np.floor(tau / T + 1e-12).astype(int)
    if factors is None:
        factors = np.ones(cyc.max() + 1)
    f = np.asarray(factors)[np.clip(cyc, 0, len(factors) - 1)]
    shape = (1 - np.cos(2 * np.pi * tau / T)) / 2

    static_rot, static_shift = _static_pose(spec, sequence)
    piv = (np.asarray(spec.rest_left) + np.asarray(spec.rest_right)) / 2
    omega = math.radians(spec.drift_rotation_deg_s)
    v = np.asarray(spec.drift_velocity_mm_s, dtype=float)
    drift_rot = np.stack([rotation_matrix([0, 0, 1], omega * t) for t in tau])
    rotations = drift_rot @ static_rot

    # zero at closed jaw and at the crest, so only the return path moves
    bulge = spec.closing_bulge_mm * np.maximum(0.0, -np.sin(2 * np.pi * np.mod(tau, T) / T))
    positions, disp = {}, {}
    for n, side in enumerate(SIDES):
        rest = np.asarray(spec.rest_left if side == "left" else spec.rest_right, dtype=float)
        s = spec.amplitude_mm[n] * f * shape
        head = rest + arc_offset(spec, s) + np.outer(bulge, INFERIOR)
        after_static = head @ static_rot.T + static_shift
        world = np.einsum("nij,nj->ni", drift_rot, after_static - piv) + piv + tau[:, None] * v
        positions[side] = world
        disp[side] = s

    ds = np.gradient(shape, tau) if tau.size > 1 else np.zeros_like(tau)
    labels = [CLOSED if sh < 1e-3 else (OPENING if d > 0 else CLOSING) for sh, d in zip(shape, ds)]
    offset = spec.acquisition_offset_s if sequence == "sagittal" else 0.0
    return Truth(sequence, tau + offset, tau, positions, rotations, disp, labels, np.asarray(factors))


def _pixel_grid(geom):
    rr, cc = np.meshgrid(np.arange(geom.rows), np.arange(geom.cols), indexing="ij")
    return np.stack([rr, cc], axis=-1)


def rasterize_ellipsoid(geom, center, rotation, semi_axes):
    """Pixels of ``geom`` whose centres fall inside the ellipsoid."""
    semi = np.asarray(semi_axes, dtype=float)
    rc, off = patient_to_plane(geom, center)
    out = np.zeros(geom.shape, dtype=bool)
    reach = semi.max()
    if abs(off) > reach:
        return out
    half = reach / min(geom.pixel_spacing) + 2
    r0, r1 = int(max(0, math.floor(rc[0] - half))), int(min(geom.rows, math.ceil(rc[0] + half) + 1))
    c0, c1 = int(max(0, math.floor(rc[1] - half))), int(min(geom.cols, math.ceil(rc[1] + half) + 1))
    if r0 >= r1 or c0 >= c1:
        return out
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    pts = pixel_to_patient(geom, np.stack([rr, cc], axis=-1))
    local = (pts - center) @ rotation / semi
    out[r0:r1, c0:c1] = (local ** 2).sum(axis=-1) <= 1.0
    return out


def _boundary_noise(mask, prob, rng):
    if prob <= 0 or not mask.any():
        return mask
    edge = mask ^ ndimage.binary_erosion(mask)
    edge |= ndimage.binary_dilation(mask) & ~mask
    flips = edge & (rng.random(mask.shape) < prob)
    return mask ^ flips


def render_masks(truth, geom, sides, spec, rng=None):
    """Per-side mask lists for one slice over the frames of ``truth``."""
    semi = spec.semi_axes_mm
    out = {}
    for side in sides:
        frames = []
        for n in range(len(truth.times)):
            centre = truth.positions[side][n]
            if spec.empty_outside_slab and abs(float(geom.distance_to_plane(centre))) > geom.thickness / 2:
                frames.append(np.zeros(geom.shape, dtype=bool))
                continue
            m = rasterize_ellipsoid(geom, centre, truth.rotations[n], semi)
            if rng is not None:
                m = _boundary_noise(m, spec.boundary_noise, rng)
            frames.append(m)
        out[side] = frames
    return out


def make_dataset(spec):
    """Render a full phantom recording.

    Returns the dataset and the ground truth of each series.
    """
    rng = np.random.default_rng(spec.seed)
    factors = cycle_factors(spec, rng)
    noise_rng = rng if spec.boundary_noise > 0 else None

    ax_geom = axial_geometry(spec)
    ax_truth = synth_truth(spec, "axial", factors=factors["axial"])
    axial = SliceSeries(ax_geom, render_masks(ax_truth, ax_geom, SIDES, spec, noise_rng), ax_truth.times)
    truths = {"axial": ax_truth}
    sagittal = {}
    if spec.sagittal_present:
        sg_truth = synth_truth(spec, "sagittal", factors=factors["sagittal"])
        truths["sagittal"] = sg_truth
        for side in SIDES:
            geom = sagittal_geometry(spec, side)
            sagittal[side] = SliceSeries(geom, render_masks(sg_truth, geom, (side,), spec, noise_rng),
                                         sg_truth.times)
    for side in SIDES:
        seen = any(m.any() for m in axial.masks[side])
        seen = seen or any(m.any() for s in sagittal.values() for m in s.masks.get(side, []))
        if not seen:
            raise InvalidSpec(f"{side} condyle never appears in any slice")
    return Dataset(spec.subject, axial, sagittal), truths


def true_delta_k(spec):
    """Left-minus-right distance of the rest condyle centres below the axial plane."""
    geom = axial_geometry(spec)
    n = geom.normal
    if n[2] > 0:
        n = -n
    return float((np.asarray(spec.rest_left) - np.asarray(spec.rest_right)) @ n)


def truth_basis(truth, axial_geom, time):
    """Anatomical basis built from the true closed-jaw centres at ``time``."""
    centers = {side: np.array([np.interp(time, truth.times, truth.positions[side][:, d]) for d in range(3)])
               for side in SIDES}
    return build_basis(centers["left"], centers["right"], axial_geom)


def compare_to_truth(est, truth, axial_geom):
    """Errors of zero-referenced trajectories against the phantom truth.

    Truth is interpolated to the estimate times, expressed in the basis of its
    own closed-jaw centres at the first estimate sample, and zero-referenced
    the same way as the estimate (j and k only).
    """
    first = next(iter(est.values()))
    t = first.times
    if t[0] < truth.times[0] - 1e-9 or t[-1] > truth.times[-1] + 1e-9:
        raise InvalidArgument("estimate times fall outside the truth recording")
    basis = truth_basis(truth, axial_geom, t[0])
    out = {}
    all_err = []
    for side, traj in est.items():
        pos = np.stack([np.interp(t, truth.times, truth.positions[side][:, d]) for d in range(3)], axis=1)
        ijk = project_to_basis(basis, pos)
        ijk[:, 1:] -= ijk[0, 1:]
        err = traj.ijk - ijk
        all_err.append(err)
        out[side] = {
            "rmse": float(np.sqrt(np.mean(np.sum(err ** 2, axis=1)))),
            "max_err": float(np.linalg.norm(err, axis=1).max()),
            "per_axis_rmse": tuple(float(v) for v in np.sqrt(np.mean(err ** 2, axis=0))),
            "truth_ijk": ijk,
        }
    err = np.concatenate(all_err)
    out["all"] = {
        "rmse": float(np.sqrt(np.mean(np.sum(err ** 2, axis=1)))),
        "max_err": float(np.linalg.norm(err, axis=1).max()),
        "per_axis_rmse": tuple(float(v) for v in np.sqrt(np.mean(err ** 2, axis=0))),
    }
    return out


def write_truth_csv(truths, path):
    rows = []
    for truth in truths.values():
        for side in SIDES:
            for t, p in zip(truth.times, truth.positions[side]):
                rows.append((float(t), side, p))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "side", "x", "y", "z"])
        for t, side, p in rows:
            w.writerow([f"{t:.6f}", side] + [f"{v:.6f}" for v in p])


def write_phantom(spec, out_dir, pgm=False):
    """Write manifest.json, truth.csv and the phantom spec to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    ds, truths = make_dataset(spec)
    save_manifest(ds, os.path.join(out_dir, "manifest.json"), pgm=pgm)
    write_truth_csv(truths, os.path.join(out_dir, "truth.csv"))
    with open(os.path.join(out_dir, "phantom_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return ds, truths
