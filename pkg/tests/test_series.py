import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import emtsim as em


def make_series(times, columns):
    names = tuple(columns)
    values = np.column_stack([columns[n] for n in names]) if names else \
        np.zeros((len(times), 0))
    return em.TimeSeries(names=names, times=np.asarray(times, dtype=float),
                         values=values)


class TestTimeSeries:
    def test_monotone_times_enforced(self):
        with pytest.raises(em.DimensionError):
            make_series([0.0, 0.1, 0.1], {"a": [1.0, 2.0, 3.0]})

    def test_shape_enforced(self):
        with pytest.raises(em.DimensionError):
            em.TimeSeries(("a",), np.array([0.0, 1.0]), np.zeros((3, 1)))

    def test_column_lookup(self):
        s = make_series([0.0, 1.0], {"a": [1.0, 2.0], "b": [3.0, 4.0]})
        assert np.array_equal(s.column("b"), [3.0, 4.0])
        with pytest.raises(em.UsageError):
            s.column("missing")


class TestCsv:
    def test_empty_series_header_only(self, tmp_path):
        p = tmp_path / "empty.csv"
        em.write_csv(make_series([], {"a": []}), p)
        assert p.read_text() == "time_s,a\n"
        back = em.read_csv(p)
        assert back.names == ("a",) and len(back) == 0

    @given(vals=st.lists(st.floats(allow_nan=False, allow_infinity=False,
                                   width=64), min_size=1, max_size=20))
    def test_round_trip_bit_identical(self, tmp_path_factory, vals):
        p = tmp_path_factory.mktemp("csv") / "rt.csv"
        times = np.arange(len(vals), dtype=float)
        s = make_series(times, {"sig": vals})
        em.write_csv(s, p)
        back = em.read_csv(p)
        assert np.array_equal(back.times, s.times)
        assert np.array_equal(back.values, s.values)

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time_s,a\n0.0,1.0\n0.1,nope\n")
        with pytest.raises(em.CsvFormatError) as info:
            em.read_csv(p)
        assert info.value.line_no == 3

    def test_wrong_field_count_names_line(self, tmp_path):
        p = tmp_path / "bad2.csv"
        p.write_text("time_s,a\n0.0,1.0,2.0\n")
        with pytest.raises(em.CsvFormatError) as info:
            em.read_csv(p)
        assert info.value.line_no == 2

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad3.csv"
        p.write_text("t,a\n")
        with pytest.raises(em.CsvFormatError):
            em.read_csv(p)

    def test_comma_in_name_rejected(self, tmp_path):
        with pytest.raises(em.UsageError):
            em.write_csv(make_series([0.0], {"a,b": [1.0]}), tmp_path / "x.csv")


class TestCompare:
    def run_pair(self, offset=0.0):
        t = np.linspace(0.0, 1.0, 11)
        run = make_series(t, {"a": np.sin(t), "b": np.cos(t)})
        t_ref = np.linspace(0.0, 1.0, 101)
        ref = make_series(t_ref, {"a": np.sin(t_ref) + offset,
                                  "b": np.cos(t_ref) + offset})
        return run, ref

    def test_identical_series_zero_errors(self):
        run, _ = self.run_pair()
        report = em.compare(run, run, None, (0.0, 1.0))
        for name in ("a", "b"):
            assert report[name].max_abs == 0.0
            assert report[name].rms == 0.0

    def test_constant_offset(self):
        run, ref = self.run_pair(offset=0.01)
        report = em.compare(run, ref, "a", (0.0, 1.0))
        assert report["a"].max_abs == pytest.approx(0.01, rel=1e-9)
        assert report["a"].rms == pytest.approx(0.01, rel=1e-9)

    def test_window_outside_overlap(self):
        run, ref = self.run_pair()
        with pytest.raises(em.WindowError):
            em.compare(run, ref, "a", (0.5, 2.0))
        with pytest.raises(em.WindowError):
            em.compare(run, ref, "a", (0.9, 0.1))

    def test_missing_signal(self):
        run, ref = self.run_pair()
        with pytest.raises(em.UsageError):
            em.compare(run, ref, "zz", (0.0, 1.0))

    def test_sub_window(self):
        run, ref = self.run_pair(offset=0.01)
        report = em.compare(run, ref, None, (0.2, 0.7))
        assert set(report.errors) == {"a", "b"}
        assert report["b"].max_abs == pytest.approx(0.01, rel=1e-6)
