"""Opening/closing detection, motion cycles and best-match cycle pairing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAmplitude, InvalidArgument, NoFullCycleError, NoMotionError

OPENING = "opening"
CLOSING = "closing"
CLOSED = "closed"
OTHER = "other"

MIN_SAGITTAL_AMPLITUDE_MM = 0.1


@dataclass(frozen=True)
class PhaseInterval:
    label: str
    start: int
    end: int  # inclusive

    def __len__(self):
        return self.end - self.start + 1


@dataclass
class MotionCycle:
    start_frame: int
    peak_frame: int
    end_frame: int
    triples: dict = field(default_factory=dict)  # side -> (j_start, j_max, j_end)

    def amplitude(self, side):
        s, m, e = self.triples[side]
        return max(0.0, m - (s + e) / 2)

    @property
    def amplitudes(self):
        return {side: self.amplitude(side) for side in sorted(self.triples)}


@dataclass
class CyclePair:
    axial: MotionCycle
    sagittal: MotionCycle
    axial_index: int
    sagittal_index: int
    cost: float

    @property
    def ratio(self):
        """A_AX / A_SAG per side."""
        out = {}
        for side in sorted(self.axial.triples):
            a_sag = self.sagittal.amplitude(side)
            if a_sag <= MIN_SAGITTAL_AMPLITUDE_MM:
                raise DegenerateAmplitude(f"{side} sagittal amplitude {a_sag:.3g} mm is too small")
            out[side] = self.axial.amplitude(side) / a_sag
        return out


def _runs(mask):
    """(start, end) inclusive index pairs of True runs."""
    padded = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[0::2], edges[1::2] - 1))


def labels_to_intervals(labels):
    out = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            out.append(PhaseInterval(labels[start], start, t - 1))
            start = t
    return out


def detect_phases(values, times, threshold_fraction=0.2, min_duration=0.3, closed_fraction=0.1):
    """Label every frame as opening, closing, closed or other.

    Velocity comes from central differences. Opening is a run with velocity
    above ``threshold_fraction * max|v|`` lasting at least ``min_duration``
    seconds, closing the mirror image. Same-direction runs separated by less
    than ``min_duration`` are merged. Closed frames are taken from the rest
    periods bordering a movement (before an opening or after a closing):
    those within ``closed_fraction`` of the global amplitude above the rest
    period's own floor, keeping the longest such run.
    """
    y = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    n = y.size
    if n < 2 or t.size != n:
        raise InvalidArgument("phase detection needs at least two frames with matching times")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgument("frame times must be strictly increasing")
    amplitude = np.ptp(y)
    v = np.gradient(y, t)
    vmax = np.abs(v).max()
    if amplitude == 0 or vmax == 0:
        raise NoMotionError("series shows no motion")
    dt = float(np.median(np.diff(t)))
    thr = threshold_fraction * vmax

    moves = []
    for label, sel in ((OPENING, v > thr), (CLOSING, v < -thr)):
        for s, e in _runs(sel):
            moves.append([label, int(s), int(e)])
    moves.sort(key=lambda m: m[1])
    merged = []
    for m in moves:
        if merged and merged[-1][0] == m[0] and t[m[1]] - t[merged[-1][2]] < min_duration:
            merged[-1][2] = m[2]
        else:
            merged.append(m)
    moves = [m for m in merged if t[m[2]] - t[m[1]] + dt >= min_duration]

    labels = [OTHER] * n
    for label, s, e in moves:
        labels[s:e + 1] = [label] * (e - s + 1)

    bounds = [None] + moves + [None]
    for prev, nxt in zip(bounds[:-1], bounds[1:]):
        if prev is None and nxt is None:
            continue
        if (prev is not None and prev[0] != CLOSING) or (nxt is not None and nxt[0] != OPENING):
            continue
        lo = 0 if prev is None else prev[2] + 1
        hi = n - 1 if nxt is None else nxt[1] - 1
        if hi < lo:
            continue
        gap = y[lo:hi + 1]
        runs = _runs(gap <= gap.min() + closed_fraction * amplitude)
        s, e = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
        labels[lo + s:lo + e + 1] = [CLOSED] * (e - s + 1)
    return labels_to_intervals(labels)


def window_mean(values, center, window=3):
    v = np.asarray(values, dtype=float)
    h = window // 2
    return float(v[max(0, center - h):center + h + 1].mean())


def extract_cycles(phases, series_by_side, reference=None, window=3):
    """Closed -> opening -> closing -> closed cycles with per-side j triples.

    Cycle bounds are the mid-frames of the bracketing closed periods; the
    peak is the maximum of ``reference`` (default: mean of the sides)
    between opening start and closing end.
    """
    sides = sorted(series_by_side)
    if reference is None:
        reference = np.mean([np.asarray(series_by_side[s], dtype=float) for s in sides], axis=0)
    reference = np.asarray(reference, dtype=float)
    closed_idx = [n for n, p in enumerate(phases) if p.label == CLOSED]
    cycles = []
    for a, b in zip(closed_idx[:-1], closed_idx[1:]):
        between = phases[a + 1:b]
        opens = [p for p in between if p.label == OPENING]
        closes = [p for p in between if p.label == CLOSING]
        if len(opens) != 1 or len(closes) != 1 or opens[0].start > closes[0].start:
            continue
        c0, c1 = phases[a], phases[b]
        start = (c0.start + c0.end) // 2
        end = (c1.start + c1.end) // 2
        lo, hi = opens[0].start, closes[0].end
        peak = lo + int(np.argmax(reference[lo:hi + 1]))
        triples = {
            s: (window_mean(series_by_side[s], start, window),
                window_mean(series_by_side[s], peak, window),
                window_mean(series_by_side[s], end, window))
            for s in sides
        }
        cycles.append(MotionCycle(start, peak, end, triples))
    if not cycles:
        raise NoFullCycleError("no complete opening-closing cycle")
    return cycles


def match_cost(axial, sagittal):
    return sum(abs(axial.amplitude(s) - sagittal.amplitude(s)) for s in sorted(axial.triples))


def best_match(axial_cycles, sagittal_cycles):
    """Axial/sagittal cycle pair with the closest per-side amplitudes (L1)."""
    if not axial_cycles or not sagittal_cycles:
        raise NoFullCycleError("best match needs cycles in both planes")
    best = None
    for ia, a in enumerate(axial_cycles):
        for isg, s in enumerate(sagittal_cycles):
            cost = match_cost(a, s)
            if best is None or cost < best.cost:
                best = CyclePair(a, s, ia, isg, cost)
    return best


def anterior_plateau(values, cycles, window=3):
    """Mean of the series over the peak windows of all cycles."""
    if not cycles:
        raise NoFullCycleError("anterior plateau needs at least one cycle")
    v = np.asarray(values, dtype=float)
    h = window // 2
    chunks = [v[max(0, c.peak_frame - h):c.peak_frame + h + 1] for c in cycles]
    return float(np.concatenate(chunks).mean())
