import math

import numpy as np
import pytest

from condyletraj import errors
from condyletraj.config import PipelineConfig
from condyletraj.errors import InvalidArgument
from condyletraj.phantom import PhantomSpec, compare_to_truth, make_dataset
from condyletraj.phases import CLOSED
from condyletraj.pipeline import process_subject


def test_ideal_run_shape(ideal_result):
    res = ideal_result
    assert not res.excluded and res.mode == "3d"
    assert set(res.trajectories) == {"left", "right"}
    for side, tr in res.trajectories.items():
        assert np.all(np.diff(tr.times) > 0)
        assert np.all(np.abs(tr.ijk[0, 1:]) <= 1e-9) and abs(tr.k_top[0]) <= 1e-9
        assert tr.phases[0] == CLOSED and tr.phases[-1] == CLOSED
        # every sample names the sagittal frames it came from
        assert tr.sagittal_frames.shape == (len(tr), 2)
        assert np.all(tr.sagittal_frames[:, 0] <= tr.sagittal_frames[:, 1])
        assert np.all(np.diff(tr.sagittal_frames[:, 0]) >= 0)
    assert res.warp is not None and res.pair is not None
    assert set(res.transforms) >= {"axial"}


def test_ideal_run_matches_truth(ideal_phantom, ideal_result):
    _, ds, truths = ideal_phantom
    cmp = compare_to_truth(ideal_result.trajectories, truths["axial"], ds.axial.geometry)
    for side in ("left", "right"):
        assert max(cmp[side]["per_axis_rmse"]) < 0.5


def test_left_right_mirror(ideal_result):
    left, right = ideal_result.trajectories["left"], ideal_result.trajectories["right"]
    assert np.allclose(left.ijk[:, 1:], right.ijk[:, 1:], atol=1e-6)
    assert np.allclose(left.ijk[:, 0], -right.ijk[:, 0], atol=1e-6)


def test_top_point_mode(ideal_phantom):
    _, ds, _ = ideal_phantom
    res = process_subject(ds, PipelineConfig(point="top"))
    tr = res.trajectories["left"]
    assert not res.excluded
    assert np.allclose(tr.ijk[:, 2], tr.k_top)
    assert tr.provenance["k"] == "sagittal top point"


def test_axial_only_mode(ideal_phantom):
    _, ds, _ = ideal_phantom
    res = process_subject(ds, PipelineConfig(axial_only=True))
    assert not res.excluded and res.mode == "axial-only"
    assert res.metrics.ratio is None and res.metrics.delta_k is None
    tr = res.trajectories["left"]
    assert np.all(np.isnan(tr.ijk[:, 2]))
    assert res.metrics.displacement["left"] > 10


def test_missing_sagittal_still_gives_2d():
    ds, _ = make_dataset(PhantomSpec(sagittal_present=False))
    res = process_subject(ds)
    assert res.exclusion == errors.NO_SIMULTANEOUS_SAGITTAL
    assert res.trajectories and res.mode == "axial-only"


def test_half_cycle_is_excluded():
    res = process_subject(make_dataset(PhantomSpec(n_cycles=0.5))[0])
    assert res.exclusion == errors.NO_FULL_CYCLE
    assert not res.trajectories


def test_right_condyle_out():
    spec = PhantomSpec(inter_sequence_rotation_deg=(0.0, 8.0, 0.0), inter_sequence_pivot=(50.0, 0.0, 0.0))
    res = process_subject(make_dataset(spec)[0])
    assert res.exclusion == errors.RIGHT_CONDYLE_OUT
    assert res.coverage.fractions["left"] >= 0.5 > res.coverage.fractions["right"]


def test_head_drift_shows_in_init_final_distance():
    spec = PhantomSpec(n_cycles=1, drift_velocity_mm_s=(2.0 / 6, 0.0, 0.0))
    res = process_subject(make_dataset(spec)[0])
    for side in ("left", "right"):
        assert 1.6 <= res.metrics.d_init_fin[side] <= 2.4


def test_tilt_shows_in_delta_k():
    spec = PhantomSpec(axial_roll_deg=-math.degrees(math.asin(1.7 / 100)))
    res = process_subject(make_dataset(spec)[0])
    assert 1.2 <= res.metrics.delta_k <= 2.2


def test_config_digest_is_stable():
    assert PipelineConfig().digest() == PipelineConfig().digest()
    assert PipelineConfig(spline_p=0.2).digest() != PipelineConfig().digest()


def test_invalid_config():
    with pytest.raises(InvalidArgument):
        PipelineConfig(point="middle")
