"""Binary mask morphometry on per-frame condyle segmentations.

Masks are 2D boolean arrays indexed (row, col).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometry, EmptyMaskError, InsufficientMaskError, InvalidArgument
from .geometry import PARALLEL_TOL, pixel_to_patient

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
TOP_FRACTION = 0.05
MIN_TOP_PIXELS = 20


@dataclass
class FrameMask:
    pixels: np.ndarray
    frame_index: int
    time: float
    side: str
    slice_label: str


def largest_component(pixels):
    """Keep the largest 8-connected component.

    Ties go to the component whose lexicographically smallest pixel comes
    first, which is the raster order in which ``ndimage.label`` numbers them.
    """
    pixels = np.asarray(pixels, dtype=bool)
    labels, n = ndimage.label(pixels, structure=EIGHT_CONNECTED)
    if n <= 1:
        return pixels.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def center_of_mass(pixels):
    rows, cols = np.nonzero(pixels)
    if rows.size == 0:
        raise EmptyMaskError("center of mass of an empty mask")
    return np.array([rows.mean(), cols.mean()])


def intersection_mask(pixels, own, other):
    """Pixels of ``own`` whose centres lie inside the slab of ``other``."""
    if np.linalg.norm(np.cross(own.normal, other.normal)) <= PARALLEL_TOL:
        raise DegenerateGeometry(f"slices {own.label!r} and {other.label!r} are parallel")
    pixels = np.asarray(pixels, dtype=bool)
    out = np.zeros_like(pixels)
    rows, cols = np.nonzero(pixels)
    if rows.size:
        pts = pixel_to_patient(own, np.stack([rows, cols], axis=1))
        inside = np.abs(other.distance_to_plane(pts)) <= other.thickness / 2
        out[rows[inside], cols[inside]] = True
    return out


def top_point(pixels, inferior_dir_px, fraction=TOP_FRACTION, min_pixels=MIN_TOP_PIXELS):
    """Mean of the most superior ``fraction`` of pixels along the first principal axis.

    The principal axis is signed to point inferior (positive dot with
    ``inferior_dir_px``), so its smallest scores are the condyle top. For an
    isotropic point cloud the hint itself is used as the axis. Pixels tied
    at the cutoff score contribute their mean to the remaining slots.
    """
    rows, cols = np.nonzero(pixels)
    n = rows.size
    if n < min_pixels:
        raise InsufficientMaskError(f"top point needs at least {min_pixels} pixels, got {n}")
    hint = np.asarray(inferior_dir_px, dtype=float)
    hint = hint / np.linalg.norm(hint)
    pts = np.stack([rows, cols], axis=1).astype(float)
    centered = pts - pts.mean(axis=0)
    evals, evecs = np.linalg.eigh(centered.T @ centered / n)
    if evals[1] - evals[0] <= 1e-9 * max(evals[1], 1e-300):
        axis = hint
    else:
        axis = evecs[:, 1]
        if axis @ hint < 0:
            axis = -axis
    score = centered @ axis
    keep = max(1, math.ceil(fraction * n))
    cut = np.sort(score)[keep - 1]
    eps = 1e-9 * max(1.0, np.abs(score).max())
    below = score < cut - eps
    tied = np.abs(score - cut) <= eps
    # pixels tied at the cutoff share the remaining slots, so no raster-order bias
    slots = keep - int(below.sum())
    total = pts[below].sum(axis=0) + slots * pts[tied].mean(axis=0)
    return total / keep


def dice(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise InvalidArgument(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = a.sum() + b.sum()
    if total == 0:
        return 1.0
    return 2.0 * np.logical_and(a, b).sum() / total


def dcm(a, b, geom):
    """Distance in mm between the centres of mass of two masks of one slice."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise InvalidArgument(f"mask shapes differ: {a.shape} vs {b.shape}")
    pa = pixel_to_patient(geom, center_of_mass(a))
    pb = pixel_to_patient(geom, center_of_mass(b))
    return float(np.linalg.norm(pa - pb))
