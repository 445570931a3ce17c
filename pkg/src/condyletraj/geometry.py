"""Patient-space slice geometry and the anatomical condyle basis.

All 3D quantities are numpy arrays in millimetres, LPS convention
(x right->left, y anterior->posterior, z inferior->superior). Raster
coordinates are zero-based (row, col) with pixel centres on integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CoverageError, DegenerateGeometry, InvalidArgument

MIN_CENTER_SEPARATION_MM = 1.0
PARALLEL_TOL = 1e-6
_ORTHO_TOL = 1e-9

LPS_POSTERIOR = np.array([0.0, 1.0, 0.0])
LPS_SUPERIOR = np.array([0.0, 0.0, 1.0])


def _frozen(v):
    a = np.array(v, dtype=float)
    a.setflags(write=False)
    return a


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise DegenerateGeometry("cannot normalise a zero vector")
    return v / n


@dataclass(frozen=True, eq=False)
class SliceGeometry:
    """Pose of one MRI slice.

    ``origin`` is the centre of pixel (0, 0). ``row_dir`` is the patient
    direction in which the row index grows, ``col_dir`` the one in which the
    column index grows.
    """

    origin: np.ndarray
    row_dir: np.ndarray
    col_dir: np.ndarray
    pixel_spacing: tuple
    rows: int
    cols: int
    thickness: float
    frame_period: float
    label: str = "axial"

    def __post_init__(self):
        object.__setattr__(self, "origin", _frozen(self.origin))
        object.__setattr__(self, "row_dir", _frozen(self.row_dir))
        object.__setattr__(self, "col_dir", _frozen(self.col_dir))
        object.__setattr__(self, "pixel_spacing", tuple(float(s) for s in self.pixel_spacing))
        if self.origin.shape != (3,) or self.row_dir.shape != (3,) or self.col_dir.shape != (3,):
            raise InvalidArgument("origin and direction cosines must be 3-vectors")
        if not (np.all(np.isfinite(self.origin)) and np.all(np.isfinite(self.row_dir))
                and np.all(np.isfinite(self.col_dir))):
            raise InvalidArgument("slice geometry must be finite")
        if abs(np.linalg.norm(self.row_dir) - 1) > _ORTHO_TOL or abs(np.linalg.norm(self.col_dir) - 1) > _ORTHO_TOL:
            raise InvalidArgument("direction cosines must be unit vectors")
        if abs(self.row_dir @ self.col_dir) > _ORTHO_TOL:
            raise InvalidArgument("row and column directions must be orthogonal")
        if len(self.pixel_spacing) != 2 or min(self.pixel_spacing) <= 0:
            raise InvalidArgument("pixel spacing must be two positive numbers")
        if self.thickness <= 0 or self.frame_period <= 0:
            raise InvalidArgument("thickness and frame period must be positive")
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise InvalidArgument("raster must have at least one pixel")

    def __eq__(self, other):
        if not isinstance(other, SliceGeometry):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    @property
    def normal(self):
        return np.cross(self.row_dir, self.col_dir)

    @property
    def shape(self):
        return (int(self.rows), int(self.cols))

    def distance_to_plane(self, pts):
        """Signed distance of patient points from the slice centre plane."""
        return (np.asarray(pts, dtype=float) - self.origin) @ self.normal

    def to_dict(self):
        return {
            "origin": self.origin.tolist(),
            "row_dir": self.row_dir.tolist(),
            "col_dir": self.col_dir.tolist(),
            "pixel_spacing": list(self.pixel_spacing),
            "rows": int(self.rows),
            "cols": int(self.cols),
            "thickness": float(self.thickness),
            "frame_period": float(self.frame_period),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                origin=d["origin"],
                row_dir=d["row_dir"],
                col_dir=d["col_dir"],
                pixel_spacing=d["pixel_spacing"],
                rows=int(d["rows"]),
                cols=int(d["cols"]),
                thickness=float(d["thickness"]),
                frame_period=float(d["frame_period"]),
                label=d.get("label", "axial"),
            )
        except KeyError as exc:
            raise InvalidArgument(f"slice geometry is missing field {exc}") from None


def pixel_to_patient(geom, rc):
    """Map sub-pixel (row, col) coordinates, shape (..., 2), to patient points."""
    rc = np.asarray(rc, dtype=float)
    if not np.all(np.isfinite(rc)):
        raise InvalidArgument("raster coordinates must be finite")
    sr, sc = geom.pixel_spacing
    return (geom.origin
            + (rc[..., 0:1] * sr) * geom.row_dir
            + (rc[..., 1:2] * sc) * geom.col_dir)


def patient_to_plane(geom, pt):
    """Inverse of :func:`pixel_to_patient`.

    Returns ``(rc, off_plane)`` where ``off_plane`` is the signed distance
    along ``row_dir x col_dir``.
    """
    d = np.asarray(pt, dtype=float) - geom.origin
    sr, sc = geom.pixel_spacing
    rc = np.stack([d @ geom.row_dir / sr, d @ geom.col_dir / sc], axis=-1)
    return rc, d @ geom.normal


def plane_intersection_line(a, b):
    """Line shared by the centre planes of two slices, as (point, unit dir)."""
    na, nb = a.normal, b.normal
    u = np.cross(na, nb)
    s = np.linalg.norm(u)
    if s <= PARALLEL_TOL:
        raise DegenerateGeometry(f"slices {a.label!r} and {b.label!r} are parallel")
    da, db = na @ a.origin, nb @ b.origin
    point = (da * np.cross(nb, u) + db * np.cross(u, na)) / (s * s)
    return point, u / s


@dataclass(frozen=True)
class AnatomicalBasis:
    """Origin O and orthonormal axes: i right->left, j posterior->anterior,
    k superior->inferior. Sagittal landmarks are filled in by
    :func:`with_sagittal`."""

    origin: np.ndarray
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    axial_normal: np.ndarray
    p: np.ndarray | None = None
    q: np.ndarray | None = None
    alpha: float | None = None
    beta: float | None = None
    theta: float | None = None
    phi: float | None = None

    def matrix(self):
        return np.stack([self.i, self.j, self.k])


@dataclass(frozen=True)
class SagittalAxes:
    side: str
    j_dir: np.ndarray
    k_dir: np.ndarray
    origin_point: np.ndarray
    normal: np.ndarray
    thickness: float
    in_axial_angle: float
    in_sagittal_angle: float = field(default=0.0)
    handedness: float = 1.0


def build_basis(left_center, right_center, axial):
    """Anatomical basis from the closed-jaw condyle centres seen in the axial slice.

    Centres are first dropped onto the axial centre plane, which is a no-op for
    centres of mass computed from axial pixels and keeps ``k`` normal to it.
    """
    left = np.asarray(left_center, dtype=float)
    right = np.asarray(right_center, dtype=float)
    if np.linalg.norm(left - right) <= MIN_CENTER_SEPARATION_MM:
        raise DegenerateGeometry("left and right condyle centres coincide")
    n = axial.normal
    for name, c in (("left", left), ("right", right)):
        if abs(axial.distance_to_plane(c)) > axial.thickness:
            raise CoverageError(f"{name} condyle centre is outside the axial slab")
    left = left - axial.distance_to_plane(left) * n
    right = right - axial.distance_to_plane(right) * n

    i = unit(left - right)
    j = np.cross(n, i)
    if np.linalg.norm(j) <= PARALLEL_TOL:
        raise DegenerateGeometry("condyle axis is normal to the axial slice")
    j = unit(j)
    if j @ LPS_POSTERIOR > 0:
        j = -j
    k = np.cross(i, j)
    if k @ LPS_SUPERIOR > 0:
        k = -k
    axial_normal = n if n @ k >= 0 else -n
    return AnatomicalBasis(origin=(left + right) / 2, i=i, j=j, k=k, axial_normal=axial_normal)


def _signed_angle(a, b, axis):
    return float(np.arctan2(np.cross(a, b) @ axis, a @ b))


def sagittal_axes(basis, sag, side):
    n_s = sag.normal
    denom = basis.i @ n_s
    if abs(denom) <= PARALLEL_TOL:
        raise CoverageError(f"condyle axis lies in the {side} sagittal plane")
    t = ((sag.origin - basis.origin) @ n_s) / denom
    origin_point = basis.origin + t * basis.i

    j_dir = np.cross(n_s, basis.axial_normal)
    if np.linalg.norm(j_dir) <= PARALLEL_TOL:
        raise DegenerateGeometry(f"{side} sagittal slice is parallel to the axial slice")
    j_dir = unit(j_dir)
    if j_dir @ basis.j < 0:
        j_dir = -j_dir
    k_dir = unit(np.cross(n_s, j_dir))
    if k_dir @ basis.k < 0:
        k_dir = -k_dir
    return SagittalAxes(
        side=side,
        j_dir=j_dir,
        k_dir=k_dir,
        origin_point=origin_point,
        normal=unit(n_s),
        thickness=float(sag.thickness),
        in_axial_angle=_signed_angle(basis.j, j_dir, basis.k),
        in_sagittal_angle=_signed_angle(basis.k, k_dir, j_dir),
        handedness=float(np.sign(np.cross(basis.i, basis.j) @ basis.k)),
    )


def sagittal_frames(basis, sag_left, sag_right):
    """Per-side sagittal axes (j_l, k_l) and (j_r, k_r) anchored at p and q."""
    return sagittal_axes(basis, sag_left, "left"), sagittal_axes(basis, sag_right, "right")


def with_sagittal(basis, left, right):
    """Copy of ``basis`` carrying p, q and the obliquity angles."""
    return replace(
        basis,
        p=left.origin_point,
        q=right.origin_point,
        alpha=left.in_axial_angle,
        beta=right.in_axial_angle,
        theta=left.in_sagittal_angle,
        phi=right.in_sagittal_angle,
    )


def project_to_basis(basis, pt):
    """(i, j, k) coordinates of patient points, shape (..., 3)."""
    return (np.asarray(pt, dtype=float) - basis.origin) @ basis.matrix().T


def project_sagittal_to_basis(axes, basis, pt, check=True):
    """(j, k) coordinates of points lying in a sagittal slice."""
    pt = np.asarray(pt, dtype=float)
    if check:
        off = (pt - axes.origin_point) @ axes.normal
        if np.any(np.abs(off) > axes.thickness / 2):
            raise CoverageError(f"point lies outside the {axes.side} sagittal slab")
    d = pt - basis.origin
    return np.stack([d @ basis.j, d @ basis.k], axis=-1)


def project_sagittal_by_angles(axes, pt):
    """Same as :func:`project_sagittal_to_basis`, via the obliquity angles.

    In-slice coordinates (a, b) on (j_dir, k_dir) map to
    j = a cos(alpha) + b sin(theta) sin(alpha), k = b cos(theta)
    for a right-handed basis. Valid for in-plane points; kept as a
    cross-check of the vector route.
    """
    d = np.asarray(pt, dtype=float) - axes.origin_point
    a = d @ axes.j_dir
    b = d @ axes.k_dir
    al, th = axes.in_axial_angle, axes.in_sagittal_angle
    return np.stack([a * np.cos(al) + axes.handedness * b * np.sin(th) * np.sin(al), b * np.cos(th)], axis=-1)


def rotation_matrix(axis, angle):
    """Right-handed rotation by ``angle`` radians about ``axis``."""
    x, y, z = unit(axis)
    c, s = np.cos(angle), np.sin(angle)
    C = 1 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def transform_geometry(geom, rot, shift):
    """Apply the rigid motion x -> rot @ x + shift to a slice pose."""
    rot = np.asarray(rot, dtype=float)
    return replace(
        geom,
        origin=rot @ geom.origin + shift,
        row_dir=rot @ geom.row_dir,
        col_dir=rot @ geom.col_dir,
    )
