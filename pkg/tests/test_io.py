import numpy as np
import pytest

from trajclass.errors import ParseError, TableFormatError, UsageError
from trajclass.io import (
    ClassifiedTrack,
    FilterPolicy,
    TableStore,
    apply_filters,
    confusion_matrix,
    count_distinct,
    count_stops,
    emit_report,
    format_summary_table,
    load_null_table,
    load_trajectories,
    percentages,
    read_report_delimited,
    save_null_table,
    write_trajectories,
)
from trajclass.labels import Label
from trajclass.processes import Brownian, Trajectory, simulate, simulate_mixture
from trajclass.teststat import build_null_table


def _write(path, text):
    path.write_text(text)
    return path


class TestTrajectoryFiles:
    def test_roundtrip_is_exact(self, tmp_path):
        trajs = [simulate(Brownian(1.0), 12, dt=0.1, seed=i, track_id=i) for i in range(3)]
        write_trajectories(tmp_path / "t.csv", trajs)
        back = load_trajectories(tmp_path / "t.csv")
        assert back.dt == 0.1 and not back.skipped
        for a, b in zip(trajs, back):
            assert a.track_id == b.track_id and b.dt == a.dt
            np.testing.assert_array_equal(a.positions, b.positions)

    def test_truth_column_roundtrip(self, tmp_path):
        trajs, truth = simulate_mixture(10, 4, n=5, seed=1)
        write_trajectories(tmp_path / "m.csv", trajs, truth)
        assert load_trajectories(tmp_path / "m.csv").truth == truth

    def test_rows_grouped_and_sorted(self, tmp_path):
        p = _write(tmp_path / "a.csv", "# dt=0.5\n2,1,5,5\n1,0,0,0\n2,0,4,4\n1,1,1,0\n1,2,1,1\n")
        ts = load_trajectories(p)
        assert [t.track_id for t in ts] == [2, 1]
        np.testing.assert_array_equal(ts.trajectories[0].positions, [[4, 4], [5, 5]])

    def test_scale_and_frame_step(self, tmp_path):
        p = _write(tmp_path / "a.csv", "# dt=0.1 scale=0.2\ntrack_id,frame,x,y\n7,4,0,0\n7,6,10,0\n7,8,10,5\n")
        t = load_trajectories(p).trajectories[0]
        assert t.dt == pytest.approx(0.2) and t.t0 == pytest.approx(0.4)
        np.testing.assert_allclose(t.positions, [[0, 0], [2, 0], [2, 1]])

    def test_dt_override(self, tmp_path):
        p = _write(tmp_path / "a.csv", "1,0,0,0\n1,1,1,1\n")
        with pytest.raises(UsageError):
            load_trajectories(p)
        assert load_trajectories(p, dt=2.0).trajectories[0].dt == 2.0

    def test_skipped_tracks(self, tmp_path):
        p = _write(tmp_path / "a.csv", "# dt=1\n"
                   "1,0,0,0\n"                      # single observation
                   "2,0,0,0\n2,0,1,1\n"             # duplicated frame
                   "3,0,0,0\n3,1,1,1\n3,3,2,2\n"    # gap
                   "4,0,0,0\n4,1,1,1\n")
        ts = load_trajectories(p)
        assert [t.track_id for t in ts] == [4]
        assert dict(ts.skipped) == {1: "too-short", 2: "duplicate-frame", 3: "nonuniform-lag"}

    @pytest.mark.parametrize("body, line", [
        ("# dt=1\n1,0,0\n", 2),
        ("# dt=1\n1,0,0,0\n1,1,abc,0\n", 3),
        ("# dt=1\n1,0,0,0\n\n1,1,nan,0\n", 4),
    ])
    def test_parse_errors_carry_line(self, tmp_path, body, line):
        with pytest.raises(ParseError) as err:
            load_trajectories(_write(tmp_path / "bad.csv", body))
        assert err.value.line == line and f"line {line}" in str(err.value)

    def test_empty_file(self, tmp_path):
        assert len(load_trajectories(_write(tmp_path / "e.csv", "# dt=1\ntrack_id,frame,x,y\n"))) == 0


class TestFilters:
    def _track(self, pts, stops=0, tid=0):
        rng = np.random.default_rng(tid)
        pos = np.cumsum(rng.standard_normal((pts - stops, 2)), axis=0)
        pos = np.vstack([pos] + [pos[-1:]] * stops)
        return Trajectory(pos, track_id=tid)

    def test_counts(self):
        t = Trajectory([[0, 0], [0, 0], [1, 1], [1, 1], [0, 0]])
        assert count_stops(t) == 2 and count_distinct(t) == 2

    def test_kept_with_no_stops(self):
        kept, skipped = apply_filters([self._track(25)])
        assert len(kept) == 1 and not skipped

    def test_motionless_rejected(self):
        kept, skipped = apply_filters([Trajectory(np.ones((30, 2)), track_id=9)])
        assert not kept and skipped == [(9, "few-distinct-positions")]

    def test_stop_threshold(self):
        # 40 points: floor(40/10) = 4 stops is too many, 3 is fine.
        kept, skipped = apply_filters([self._track(40, 3, 1), self._track(40, 4, 2)])
        assert [t.track_id for t in kept] == [1]
        assert skipped == [(2, "too-many-stops")]

    def test_length_bounds(self):
        pol = FilterPolicy(min_distinct_positions=2, min_length=10, max_length=20)
        kept, skipped = apply_filters([self._track(5, tid=1), self._track(15, tid=2), self._track(30, tid=3)], pol)
        assert [t.track_id for t in kept] == [2]
        assert dict(skipped) == {1: "too-short", 3: "too-long"}

    def test_invalid_policy(self):
        with pytest.raises(ValueError):
            FilterPolicy(stop_divisor=0)


class TestReports:
    rows = [
        ClassifiedTrack(1, 30, Label.BROWNIAN, 1.2, 0.4, 0.6, 0.8),
        ClassifiedTrack("b", 30, Label.SUBDIFFUSION, 0.5, 0.001, 0.999, 0.002),
        ClassifiedTrack(3, 29, Label.NOT_MOVING),
    ]

    def test_percentages_sum_to_100(self):
        labels = ["a", "b", "c"]
        pct = percentages({"a": 1, "b": 1, "c": 1}, labels)
        assert sum(pct.values()) == pytest.approx(100.0)
        assert sorted(pct.values()) == [33.3, 33.3, 33.4]
        assert percentages({}, labels) == {"a": 0.0, "b": 0.0, "c": 0.0}

    def test_delimited_roundtrip(self, tmp_path):
        paths = emit_report(self.rows, tmp_path, "r", extra_header={"mode": "single"})
        text = paths["delimited"].read_text()
        assert text.startswith("# schema=trajclass-report/1\n")
        assert "# mode=single" in text
        back = read_report_delimited(paths["delimited"])
        assert [r.track_id for r in back] == [1, "b", 3]
        assert back[1] == self.rows[1]
        assert back[2].t_stat is None and back[2].decision is Label.NOT_MOVING

    def test_summary_table(self):
        text = format_summary_table(self.rows, "title")
        assert "NotMoving" in text and "100.0" in text

    def test_confusion(self):
        _, labels, mat = confusion_matrix(self.rows, {1: "H0", "b": "H1", 3: "Subdiffusion"})
        assert mat[0, labels.index(Label.BROWNIAN)] == 1
        assert mat[1, labels.index(Label.SUBDIFFUSION)] == 1
        assert mat[1, labels.index(Label.NOT_MOVING)] == 1

    def test_map_output(self, tmp_path):
        trajs = [simulate(Brownian(), 10, seed=i, track_id=i) for i in range(3)]
        rows = [ClassifiedTrack(i, 10, Label.BROWNIAN) for i in range(3)]
        paths = emit_report(rows, tmp_path, "r", ("map-vector-graphic",), trajectories=trajs)
        svg = paths["map-vector-graphic"].read_text()
        assert svg.lstrip().startswith("<?xml") and "<svg" in svg


class TestNullTableFiles:
    def test_roundtrip(self, tmp_path, small_table):
        p = save_null_table(small_table, tmp_path / "t.tbl")
        assert load_null_table(p) == small_table

    def test_corruption_detected(self, tmp_path, small_table):
        p = save_null_table(small_table, tmp_path / "t.tbl")
        raw = bytearray(p.read_bytes())
        raw[-3] ^= 0xFF
        p.write_bytes(bytes(raw))
        with pytest.raises(TableFormatError):
            load_null_table(p)

    def test_truncation_detected(self, tmp_path, small_table):
        p = save_null_table(small_table, tmp_path / "t.tbl")
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(TableFormatError):
            load_null_table(p)

    def test_not_a_table(self, tmp_path):
        with pytest.raises(TableFormatError):
            load_null_table(_write(tmp_path / "x.tbl", "hello"))

    def test_store_persists(self, tmp_path):
        store = TableStore(tmp_path, N=1001, seed=2)
        a = store.get(6)
        files = list(tmp_path.iterdir())
        assert len(files) == 1
        b = TableStore(tmp_path, N=1001, seed=2).get(6)
        assert a == b == build_null_table(6, 1001, 2)
        assert store.get(6) is a
