"""Dataset manifests: slice geometry plus per-frame condyle masks.

A manifest is a JSON document::

    {
      "subject": "S03",
      "axial_reference_frame": null,
      "series": {
        "axial":          {"geometry": {...}, "masks": {"left": [...], "right": [...]}},
        "sagittal_left":  {"geometry": {...}, "masks": {"left": [...]}},
        "sagittal_right": {"geometry": {...}, "masks": {"right": [...]}}
      }
    }

Geometry blocks carry ``origin``, ``row_dir``, ``col_dir``, ``pixel_spacing``,
``rows``, ``cols``, ``thickness`` and ``frame_period``, plus optional
``times`` (one timestamp per frame, seconds) and ``time_offset``. Mask
entries are ``{"rle": "<rows>x<cols>:start,len ..."}`` or ``{"file":
"masks/a_l_0000.pgm"}`` (paths relative to the manifest); a bare string is
read as a file path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError, TrajectoryError
from .geometry import SliceGeometry
from .maskio import decode_rle, encode_rle, read_pgm, write_pgm

SERIES_SIDES = {"axial": ("left", "right"), "sagittal_left": ("left",), "sagittal_right": ("right",)}


@dataclass
class SliceSeries:
    geometry: SliceGeometry
    masks: dict                   # side -> list of 2D bool arrays
    times: np.ndarray

    @property
    def n_frames(self):
        return len(self.times)


@dataclass
class Dataset:
    subject: str
    axial: SliceSeries
    sagittal: dict = field(default_factory=dict)   # side -> SliceSeries
    axial_reference_frame: int | None = None

    def validate(self):
        """Return a list of human-readable problems (empty when valid)."""
        problems = []
        named = [("axial", self.axial)] + [(f"sagittal_{s}", v) for s, v in sorted(self.sagittal.items())]
        for name, series in named:
            if np.any(np.diff(series.times) <= 0):
                problems.append(f"{name}: frame times are not strictly increasing")
            for side, frames in series.masks.items():
                if len(frames) != series.n_frames:
                    problems.append(f"{name}/{side}: {len(frames)} masks for {series.n_frames} frames")
                for n, m in enumerate(frames):
                    if m.shape != series.geometry.shape:
                        problems.append(f"{name}/{side} frame {n}: mask {m.shape} vs raster {series.geometry.shape}")
                        break
        for side in ("left", "right"):
            if side not in self.axial.masks:
                problems.append(f"axial: no {side} condyle masks")
        ref = self.axial_reference_frame
        if ref is not None and not 0 <= ref < self.axial.n_frames:
            problems.append(f"axial_reference_frame {ref} outside 0..{self.axial.n_frames - 1}")
        return problems


def _frame_times(geom, block, n):
    if "times" in block and block["times"] is not None:
        times = np.asarray(block["times"], dtype=float)
        if times.size != n:
            raise ManifestError(f"{times.size} timestamps for {n} frames")
        return times
    return float(block.get("time_offset", 0.0)) + np.arange(n) * geom.frame_period


def _load_mask(entry, base):
    if isinstance(entry, str):
        entry = {"file": entry}
    if "rle" in entry:
        return decode_rle(entry["rle"])
    if "file" in entry:
        path = os.path.join(base, entry["file"])
        if not os.path.exists(path):
            raise ManifestError(f"mask file not found: {entry['file']}")
        return read_pgm(path)
    raise ManifestError(f"mask entry needs 'rle' or 'file': {entry!r}")


def load_manifest(path):
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    try:
        series = {}
        for name, block in doc["series"].items():
            if name not in SERIES_SIDES:
                raise ManifestError(f"unknown series {name!r}")
            gblock = dict(block["geometry"])
            gblock.setdefault("label", name)
            geom = SliceGeometry.from_dict(gblock)
            masks = {side: [_load_mask(e, base) for e in entries]
                     for side, entries in block["masks"].items()}
            n = max(len(v) for v in masks.values()) if masks else 0
            series[name] = SliceSeries(geom, masks, _frame_times(geom, block, n))
        if "axial" not in series:
            raise ManifestError("manifest has no axial series")
        sag = {side: series[f"sagittal_{side}"] for side in ("left", "right") if f"sagittal_{side}" in series}
        ref = doc.get("axial_reference_frame")
        ds = Dataset(str(doc.get("subject", os.path.basename(base))), series["axial"], sag,
                     None if ref is None else int(ref))
    except KeyError as exc:
        raise ManifestError(f"{path}: missing field {exc}") from None
    except TrajectoryError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    problems = ds.validate()
    if problems:
        raise ManifestError(f"{path}: " + "; ".join(problems))
    return ds


def _series_doc(series, sides, base, prefix, pgm):
    block = {"geometry": series.geometry.to_dict()}
    block["geometry"].pop("label", None)
    uniform = np.allclose(series.times, series.times[0] + np.arange(series.n_frames) * series.geometry.frame_period,
                          rtol=0, atol=1e-9)
    if uniform:
        block["time_offset"] = float(series.times[0])
    else:
        block["times"] = [float(t) for t in series.times]
    masks = {}
    for side in sides:
        if side not in series.masks:
            continue
        entries = []
        for n, m in enumerate(series.masks[side]):
            if pgm:
                rel = os.path.join("masks", f"{prefix}_{side}_{n:05d}.pgm")
                write_pgm(os.path.join(base, rel), m)
                entries.append({"file": rel})
            else:
                entries.append({"rle": encode_rle(m)})
        masks[side] = entries
    block["masks"] = masks
    return block


def save_manifest(ds, path, pgm=False):
    """Write ``ds`` as a manifest; ``pgm=True`` stores masks as PGM files beside it."""
    base = os.path.dirname(os.path.abspath(path))
    if pgm:
        os.makedirs(os.path.join(base, "masks"), exist_ok=True)
    doc = {"subject": ds.subject, "axial_reference_frame": ds.axial_reference_frame,
           "series": {"axial": _series_doc(ds.axial, ("left", "right"), base, "axial", pgm)}}
    for side in ("left", "right"):
        if side in ds.sagittal:
            doc["series"][f"sagittal_{side}"] = _series_doc(ds.sagittal[side], (side,), base, f"sagittal_{side}", pgm)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
