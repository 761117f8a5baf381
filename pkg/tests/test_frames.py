import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sila.errors import DataError, ModelFileError
from sila.frames import (IntersectionFrame, NormalizedTrajectory, RawTrajectory,
                         from_common_frame, load_frame, load_trajectories,
                         resample, save_frame, save_trajectories, to_common_frame)

I2 = np.eye(2)


def make_traj(points, t0=0.0, dt=1.0, tid="t"):
    pts = np.asarray(points, dtype=float)
    t = t0 + dt * np.arange(pts.shape[0])
    return RawTrajectory(tid, np.column_stack([t, pts]))


class TestFrameValidation:
    def test_axes_must_be_unit(self):
        with pytest.raises(DataError):
            IntersectionFrame([0, 0], [2, 0], [0, 1], 1.0)
        with pytest.raises(DataError):
            IntersectionFrame([0, 0], [1, 0], [0, 0.5], 1.0)

    def test_parallel_axes_rejected(self):
        with pytest.raises(DataError):
            IntersectionFrame([0, 0], [1, 0], [1, 0], 1.0)
        with pytest.raises(DataError):
            IntersectionFrame([0, 0], [1, 0], [-1, 0], 1.0)

    def test_width_positive(self):
        with pytest.raises(DataError):
            IntersectionFrame([0, 0], [1, 0], [0, 1], 0.0)

    def test_trajectory_needs_two_samples(self):
        with pytest.raises(DataError):
            RawTrajectory("x", np.array([[0.0, 1.0, 2.0]]))

    def test_times_strictly_increasing(self):
        with pytest.raises(DataError):
            RawTrajectory("x", np.array([[0.0, 0, 0], [0.0, 1, 1]]))

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            RawTrajectory("x", np.array([[0.0, 0, 0], [1.0, np.nan, 1]]))


class TestToCommonFrame:
    def test_identity_frame_passthrough(self):
        frame = IntersectionFrame([0, 0], [1, 0], [0, 1], 1.0)
        tr = make_traj([[2, 3], [3, 4]])
        out = to_common_frame(tr, frame)
        np.testing.assert_allclose(out.points, [[2, 3], [3, 4]])

    def test_translate_and_scale(self):
        frame = IntersectionFrame([1, 1], [1, 0], [0, 1], 2.0)
        tr = make_traj([[2, 2], [3, 3]])
        out = to_common_frame(tr, frame)
        np.testing.assert_allclose(out.points[0], [0.5, 0.5])

    def test_oblique_axes_solve_oracle(self):
        # independent linear-solver oracle for the skew basis
        a2 = np.array([0.70711, 0.70711])
        a2 = a2 / np.linalg.norm(a2)
        frame = IntersectionFrame([0, 0], [1, 0], a2, 1.0)
        tr = make_traj([[2, 1], [3, 1]])
        out = to_common_frame(tr, frame)
        expect = np.linalg.solve(np.column_stack([frame.axis1, frame.axis2]),
                                 np.array([2.0, 1.0]))
        np.testing.assert_allclose(out.points[0], expect, atol=1e-12)
        np.testing.assert_allclose(out.points[0], [1.0, np.sqrt(2)], atol=1e-4)

    def test_oblique_inverse(self):
        a2 = np.array([1.0, 1.0]) / np.sqrt(2)
        frame = IntersectionFrame([0, 0], [1, 0], a2, 1.0)
        tr = NormalizedTrajectory("t", np.array([[0.0, 1.0, np.sqrt(2)],
                                                 [1.0, 1.0, np.sqrt(2)]]))
        back = from_common_frame(tr, frame)
        np.testing.assert_allclose(back.samples[0, 1:], [2.0, 1.0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0.3, 2.8), st.floats(0.5, 10),
       st.floats(-20, 20), st.floats(-20, 20))
def test_round_trip_property(ox, oy, ang, width, px, py):
    axis2 = np.array([np.cos(ang), np.sin(ang)])
    frame = IntersectionFrame([ox, oy], [1, 0], axis2, width)
    tr = make_traj([[px, py], [px + 1, py + 1]])
    back = from_common_frame(to_common_frame(tr, frame), frame)
    np.testing.assert_allclose(back.samples, tr.samples, atol=1e-8)


class TestResample:
    def test_two_point_segment_halved(self):
        tr = NormalizedTrajectory("t", np.array([[0.0, 0, 0], [2.0, 2, 0]]))
        out = resample(tr, 1.0)
        np.testing.assert_allclose(out.samples,
                                   [[0, 0, 0], [1, 1, 0], [2, 2, 0]], atol=1e-12)

    def test_matching_dt_is_identity(self):
        s = np.array([[0.0, 0, 0], [0.5, 1, 1], [1.0, 2, 2]])
        out = resample(NormalizedTrajectory("t", s), 0.5)
        np.testing.assert_allclose(out.samples, s, atol=1e-12)

    def test_end_point_kept_on_ragged_duration(self):
        s = np.array([[0.0, 0, 0], [1.7, 1.7, 0]])
        out = resample(NormalizedTrajectory("t", s), 0.5)
        assert out.times[-1] == pytest.approx(1.7)
        np.testing.assert_allclose(np.diff(out.times)[:-1], 0.5)

    def test_too_short_errors(self):
        s = np.array([[0.0, 0, 0], [0.3, 1, 1]])
        with pytest.raises(DataError):
            resample(NormalizedTrajectory("t", s), 0.5)

    def test_bad_dt(self):
        s = np.array([[0.0, 0, 0], [1.0, 1, 1]])
        with pytest.raises(DataError):
            resample(NormalizedTrajectory("t", s), 0.0)


class TestFiles:
    def test_frame_round_trip(self, tmp_path):
        frame = IntersectionFrame([1, 2], [0, 1], [1, 0], 2.5)
        p = tmp_path / "frame.json"
        save_frame(frame, p)
        got = load_frame(p)
        np.testing.assert_allclose(got.origin, frame.origin)
        np.testing.assert_allclose(got.axis2, frame.axis2)
        assert got.sidewalk_width == frame.sidewalk_width

    def test_bad_frame_file(self, tmp_path):
        p = tmp_path / "frame.json"
        p.write_text(json.dumps({"origin": [0, 0]}))
        with pytest.raises(ModelFileError):
            load_frame(p)

    def test_trajectory_csv_round_trip(self, tmp_path):
        trs = [make_traj([[0, 0], [1, 0.25]], tid="a"),
               make_traj([[5, 5], [6, 6], [7, 7]], tid="b")]
        p = tmp_path / "trajs.csv"
        save_trajectories(trs, p)
        got = load_trajectories(p)
        assert [t.id for t in got] == ["a", "b"]
        np.testing.assert_allclose(got[0].samples, trs[0].samples)
        np.testing.assert_allclose(got[1].samples, trs[1].samples)

    def test_csv_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,t,x,y\na,0,0,0\n")
        with pytest.raises(ModelFileError):
            load_trajectories(p)

    def test_csv_bad_field_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("traj_id,t,x,y\na,0,0,0\na,1,oops,0\n")
        with pytest.raises(ModelFileError, match=":3"):
            load_trajectories(p)

    def test_csv_short_trajectory_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("traj_id,t,x,y\na,0,0,0\n")
        with pytest.raises(ModelFileError, match="trajectory a"):
            load_trajectories(p)
