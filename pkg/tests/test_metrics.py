import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from condyletraj.assembly import Trajectory3D
from condyletraj.errors import CoverageError, InvalidArgument, NoFullCycleError
from condyletraj.metrics import (SubjectMetrics, amplitude_ratio, delta_k_lr, format_summary, format_table,
                                 init_final_distance, max_displacement, msd, opening_closing, parse_report_csv,
                                 quality_report, report_csv, summarize)
from condyletraj.phases import CLOSED, CLOSING, OPENING, CyclePair, MotionCycle

from .oracles import msd_brute_force

coords = st.floats(-50, 50, allow_nan=False)


def curves(dim=3, max_len=8):
    return st.integers(1, max_len).flatmap(lambda n: hnp.arrays(float, (n, dim), elements=coords))


def test_msd_examples():
    assert msd([[0, 0]], [[0, 1]]) == 1.0
    assert np.isclose(msd([[0, 0], [2, 0]], [[1, 0]]), 2 / 3)
    assert np.isclose(msd([[0, 0], [2, 0]], [[1, 0]], mode="points"), 1.0)
    with pytest.raises(InvalidArgument):
        msd([], [[0, 0]])
    with pytest.raises(InvalidArgument):
        msd([[0, 0]], [[0, 1]], mode="hausdorff")


@given(curves(), curves())
def test_msd_matches_loop_oracle(u, v):
    assert np.isclose(msd(u, v), msd_brute_force(u, v), rtol=0, atol=1e-9)
    assert np.isclose(msd(u, v, mode="points"), msd_brute_force(u, v, polyline=False), rtol=0, atol=1e-9)


@given(curves(), curves(), hnp.arrays(float, 3, elements=coords))
def test_msd_properties(u, v, shift):
    assert msd(u, v) == pytest.approx(msd(v, u), abs=1e-12)
    assert msd(u, u) == pytest.approx(0, abs=1e-9)
    assert msd(u + shift, v + shift) == pytest.approx(msd(u, v), abs=1e-9)
    pairwise = np.linalg.norm(u[:, None] - v[None], axis=2)
    assert msd(u, v) <= pairwise.max() + 1e-9
    assert msd(u, v) <= msd(u, v, mode="points") + 1e-9


def _pair(ax, sag):
    mk = lambda a: MotionCycle(0, 1, 2, {"left": (0.0, a, 0.0), "right": (1.0, a + 1.0, 1.0)})
    return CyclePair(mk(ax), mk(sag), 0, 0, 0.0)


def test_amplitude_ratio():
    assert amplitude_ratio(_pair(12, 12)) == {"left": 1.0, "right": 1.0}
    assert round(amplitude_ratio(_pair(14, 12.5))["left"], 2) == 1.12


def cycle_traj(side="left", k0=0.0, end_drift=0.0, n=61):
    t = np.linspace(0, 1, n)
    s = 14 * (1 - np.cos(2 * np.pi * t)) / 2
    ijk = np.stack([np.full(n, 50.0) + end_drift * t, s, -0.4 * s + k0], axis=1)
    labels = [CLOSED] * 3 + [OPENING] * 27 + [CLOSING] * 28 + [CLOSED] * 3
    return Trajectory3D(side, np.arange(n), t * 6, ijk, ijk[:, 2].copy(), labels)


def test_periodic_trajectory_metrics():
    tr = cycle_traj()
    assert init_final_distance(tr) == pytest.approx(0, abs=1e-12)
    opening, closing = opening_closing(tr)
    assert msd(opening, closing) == pytest.approx(0, abs=1e-9)
    assert max_displacement(tr) == pytest.approx(14 * np.hypot(1, 0.4), rel=1e-9)


def test_init_final_distance_drift():
    assert init_final_distance(cycle_traj(end_drift=2.0)) == pytest.approx(2.0)


def test_init_final_distance_needs_closed():
    tr = cycle_traj()
    tr.phases = [OPENING] * len(tr)
    with pytest.raises(NoFullCycleError):
        init_final_distance(tr)


def test_opening_closing_split_at_peak():
    tr = cycle_traj()
    opening, closing = opening_closing(tr)
    assert len(opening) + len(closing) == len(tr) + 1
    assert np.array_equal(opening[-1], closing[0])


def test_delta_k():
    left, right = cycle_traj("left", k0=1.3), cycle_traj("right")
    assert delta_k_lr(left, right) == pytest.approx(1.3)
    assert delta_k_lr(right, left) == pytest.approx(-1.3)
    assert delta_k_lr(left, cycle_traj("right", k0=1.3)) == 0
    with pytest.raises(CoverageError):
        delta_k_lr(left, None)


def metrics(subject, disp=15.0, dk=0.5, exclusion=None):
    if exclusion:
        return SubjectMetrics(subject, exclusion=exclusion)
    both = lambda v: {"left": v, "right": v}
    return SubjectMetrics(subject, None, both(1.0), both(0.2), both(0.4), dk, both(disp))


def test_report_rows_and_flags():
    rows = quality_report([metrics("s2", disp=13.0, dk=-3.0), metrics("s1")])
    assert [(r.subject, r.side) for r in rows] == [("s1", "L"), ("s1", "R"), ("s2", "L"), ("s2", "R")]
    assert rows[0].ge_14mm and not rows[2].ge_14mm
    assert rows[2].asymmetric_placement and not rows[0].asymmetric_placement


def test_report_all_excluded():
    rows = quality_report([metrics("a", exclusion="No full opening-closing cycle")])
    assert all(r.excluded_reason and r.ratio is None and r.msd_mm is None for r in rows)
    text = format_table(rows)
    assert "No full opening-closing cycle" in text


def test_report_csv_round_trip():
    rows = quality_report([metrics("s1"), metrics("s2", exclusion="No simultaneous sagittal planes imaging")])
    text = report_csv(rows, header="condyletraj test")
    assert text.startswith("# condyletraj test\n")
    back = parse_report_csv(text)
    for a, b in zip(rows, back):
        for col in ("subject", "side", "ratio", "msd_mm", "d_init_fin_mm", "delta_k_lr_mm",
                    "excluded_reason", "displacement_mm", "ge_14mm"):
            assert getattr(a, col) == getattr(b, col)
    with pytest.raises(InvalidArgument):
        parse_report_csv("a,b\n1,2\n")


def test_axial_only_rows():
    m = metrics("ax")
    m.ratio, m.delta_k = None, None
    rows = quality_report([m])
    assert rows[0].ratio is None and rows[0].asymmetric_placement is None
    assert "-" in format_table(rows).splitlines()[2]


def test_summarize():
    rows = quality_report([metrics("a", dk=1.0), metrics("b", dk=-2.0), metrics("c", exclusion="x")])
    s = summarize(rows)
    assert (s["subjects"], s["included_subjects"], s["excluded_subjects"]) == (3, 2, 1)
    assert s["delta_k_lr_mm"] == (-0.5, -2.0, 1.0)
    assert s["abs_delta_k_lr_mm_mean"] == 1.5
    assert s["msd_mm"][0] == pytest.approx(0.2)
    assert "subjects: 3 (included 2, excluded 1)" in format_summary(s)
