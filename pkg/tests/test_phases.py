import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from condyletraj.errors import DegenerateAmplitude, InvalidArgument, NoFullCycleError, NoMotionError
from condyletraj.phases import (CLOSED, CLOSING, OPENING, MotionCycle, anterior_plateau, best_match,
                                detect_phases, extract_cycles, match_cost)

DT = 0.0211


def cosine_cycles(amps, period=6.0, dt=DT, rest=0.0):
    """Concatenated raised-cosine openings, optionally separated by rest periods."""
    t_cycle = np.arange(0, period, dt)
    parts = []
    for a in amps:
        if rest:
            parts.append(np.zeros(int(round(rest / dt))))
        parts.append(a * (1 - np.cos(2 * np.pi * t_cycle / period)) / 2)
    parts.append(np.zeros(int(round(max(rest, 0.5) / dt))))
    y = np.concatenate(parts)
    return np.arange(y.size) * dt, y


def labels_of(phases):
    return [p.label for p in phases if p.label in (OPENING, CLOSING)]


def test_single_cosine_opening_then_closing():
    t = np.arange(0, 6.0 + DT / 2, DT)
    y = 14 * (1 - np.cos(2 * np.pi * t / 6)) / 2
    phases = detect_phases(y, t)
    assert labels_of(phases) == [OPENING, CLOSING]
    crest = int(np.argmax(y))
    opening = next(p for p in phases if p.label == OPENING)
    closing = next(p for p in phases if p.label == CLOSING)
    # velocity thresholding leaves a small dwell at the crest; the switch sits inside it
    mid = (opening.end + closing.start) / 2
    assert abs(mid - crest) <= 1
    assert phases[0].label == CLOSED and phases[-1].label == CLOSED


def test_phases_partition_frames():
    t, y = cosine_cycles([10, 12], rest=1.0)
    phases = detect_phases(y, t)
    assert phases[0].start == 0 and phases[-1].end == y.size - 1
    for a, b in zip(phases[:-1], phases[1:]):
        assert b.start == a.end + 1


def test_two_periods_alternate():
    t, y = cosine_cycles([14, 14])
    assert labels_of(detect_phases(y, t)) == [OPENING, CLOSING, OPENING, CLOSING]


def test_constant_series_has_no_motion():
    with pytest.raises(NoMotionError):
        detect_phases(np.full(50, 2.0), np.arange(50) * DT)


def test_bad_times():
    with pytest.raises(InvalidArgument):
        detect_phases([0.0, 1, 2], [0.0, 0.0, 1])
    with pytest.raises(InvalidArgument):
        detect_phases([0.0], [0.0])


def test_single_cycle_triple():
    t, y = cosine_cycles([14], rest=1.0)
    cycles = extract_cycles(detect_phases(y, t), {"left": y, "right": y})
    assert len(cycles) == 1
    s, m, e = cycles[0].triples["left"]
    assert abs(s) < 1e-9 and abs(e) < 1e-9
    assert abs(m - 14) < 0.01


def test_cycle_amplitudes_follow_generator():
    amps = [14.0, 1.2 * 14, 0.9 * 14]
    t, y = cosine_cycles(amps)
    cycles = extract_cycles(detect_phases(y, t), {"left": y, "right": 0.5 * y})
    assert len(cycles) == 3
    for c, a in zip(cycles, amps):
        assert abs(c.amplitude("left") / a - 1) <= 0.03
        assert abs(c.amplitude("right") / (0.5 * a) - 1) <= 0.03


def test_opening_only_has_no_cycle():
    t = np.arange(0, 4, DT)
    y = np.clip(t - 1, 0, 2) * 5
    with pytest.raises(NoFullCycleError):
        extract_cycles(detect_phases(y, t), {"left": y, "right": y})


def test_half_cycle_has_no_cycle():
    t = np.arange(0, 3, DT)
    y = 14 * (1 - np.cos(2 * np.pi * t / 6)) / 2
    with pytest.raises(NoFullCycleError):
        extract_cycles(detect_phases(y, t), {"left": y, "right": y})


@given(st.floats(-1000, 1000), st.floats(0.05, 20))
def test_time_shift_and_scale_invariance(shift, scale):
    t, y = cosine_cycles([14, 11], rest=0.6)
    base = detect_phases(y, t)
    moved = detect_phases(scale * y, t + shift)
    assert moved == base
    c0 = extract_cycles(base, {"left": y, "right": y})
    c1 = extract_cycles(moved, {"left": scale * y, "right": scale * y})
    for a, b in zip(c0, c1):
        assert (a.start_frame, a.peak_frame, a.end_frame) == (b.start_frame, b.peak_frame, b.end_frame)
        assert np.isclose(b.amplitude("left"), scale * a.amplitude("left"))


def _cycle(amp_l, amp_r=None):
    amp_r = amp_l if amp_r is None else amp_r
    return MotionCycle(0, 1, 2, {"left": (0.0, amp_l, 0.0), "right": (0.0, amp_r, 0.0)})


def test_best_match_identical():
    pair = best_match([_cycle(12)], [_cycle(12)])
    assert pair.ratio == {"left": 1.0, "right": 1.0}


def test_best_match_documented_example():
    axial = [_cycle(10), _cycle(14)]
    sag = [_cycle(13.5)]
    pair = best_match(axial, sag)
    costs = {(i, j): match_cost(a, s) for (i, a), (j, s) in itertools.product(enumerate(axial), enumerate(sag))}
    assert (pair.axial_index, pair.sagittal_index) == min(costs, key=costs.get) == (1, 0)
    assert np.isclose(pair.ratio["left"], 14 / 13.5)
    assert round(pair.ratio["left"], 3) == 1.037


def test_best_match_ties_go_to_earliest():
    pair = best_match([_cycle(10), _cycle(14)], [_cycle(12), _cycle(12)])
    assert (pair.axial_index, pair.sagittal_index) == (0, 0)


@given(st.lists(st.tuples(st.floats(0.5, 20), st.floats(0.5, 20)), min_size=1, max_size=5),
       st.lists(st.tuples(st.floats(0.5, 20), st.floats(0.5, 20)), min_size=1, max_size=5))
def test_best_match_is_optimal(ax, sg):
    axial = [_cycle(*a) for a in ax]
    sag = [_cycle(*s) for s in sg]
    pair = best_match(axial, sag)
    assert all(pair.cost <= match_cost(a, s) for a in axial for s in sag)
    swapped = best_match([pair.sagittal], [pair.axial])
    for side in ("left", "right"):
        assert np.isclose(swapped.ratio[side], 1 / pair.ratio[side])


def test_best_match_empty_and_degenerate():
    with pytest.raises(NoFullCycleError):
        best_match([], [_cycle(1)])
    with pytest.raises(DegenerateAmplitude):
        best_match([_cycle(1)], [_cycle(0.05)]).ratio


def test_anterior_plateau_examples():
    y = np.zeros(30)
    y[9:12] = 12.0
    assert anterior_plateau(y, [MotionCycle(0, 10, 20)]) == 12.0
    y[19:22] = 16.0
    y[9:12] = 8.0
    assert anterior_plateau(y, [MotionCycle(0, 10, 15), MotionCycle(15, 20, 29)]) == 12.0
    with pytest.raises(NoFullCycleError):
        anterior_plateau(y, [])


@given(st.lists(st.floats(-50, 50), min_size=10, max_size=60), st.data())
def test_anterior_plateau_matches_window_average(vals, data):
    y = np.array(vals)
    peaks = sorted(data.draw(st.lists(st.integers(0, y.size - 1), min_size=1, max_size=4)))
    cycles = [MotionCycle(0, p, y.size - 1) for p in peaks]
    expected = []
    for p in peaks:
        for k in (p - 1, p, p + 1):
            if 0 <= k < y.size:
                expected.append(y[k])
    assert np.isclose(anterior_plateau(y, cycles), np.mean(expected))
