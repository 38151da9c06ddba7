import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deaiml import tabular
from deaiml.errors import ConfigError, DataError
from deaiml.tabular import DmuPanel, FrontierSpec, Schema

SCHEMA = {"id": "school", "group": "type", "inputs": ["ses"], "outputs": ["math", "read"],
          "covariates": ["size"], "stratum": "region"}


def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_roundtrip(tmp_path):
    r = np.random.default_rng(0)
    cov = r.normal(size=(6, 2))
    cov[1, 0] = np.nan
    panel = DmuPanel.from_arrays(r.uniform(1, 5, (6, 2)), r.uniform(1, 5, (6, 1)), groups=list("aabbab"),
                                 covariates=cov, strata=["n", "s", "n", "s", "n", "s"])
    schema = tabular.write_csv(panel, tmp_path / "p.csv")
    back = tabular.load_csv(tmp_path / "p.csv", schema)
    assert back.ids == panel.ids and back.group_labels == panel.group_labels and back.strata == panel.strata
    assert np.array_equal(back.X, panel.X) and np.array_equal(back.Y, panel.Y)
    assert np.array_equal(back.C, panel.C, equal_nan=True)


def test_load_csv_reports_every_bad_row(tmp_path):
    p = _write(tmp_path, "school,type,ses,math,read,size,region\n"
                         "s1,pub,1.0,2.0,3.0,NA,n\n"
                         "s2,pub,,2.0,3.0,1,n\n"
                         "s3,pub,1.0,x,3.0,1,n\n"
                         "s1,pri,1.0,2.0,3.0,1,s\n"
                         "s4,pri,1.0,0.0,3.0,1,s\n"
                         "s5,pri,1.0\n")
    with pytest.raises(DataError) as err:
        tabular.load_csv(p, SCHEMA)
    msg = str(err.value)
    for needle in ("row 2", "missing value", "non-numeric", "duplicate id", "strictly positive", "expected 7 fields"):
        assert needle in msg


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError):
        tabular.load_csv(tmp_path / "nope.csv", SCHEMA)
    with pytest.raises(DataError):
        tabular.load_csv(_write(tmp_path, "school,type\n"), SCHEMA)
    with pytest.raises(DataError):
        tabular.load_csv(_write(tmp_path, ""), SCHEMA)
    with pytest.raises(ConfigError):
        Schema.from_mapping({"id": "a", "group": "b", "inputs": ["x"]})
    with pytest.raises(ConfigError):
        Schema("a", "b", ("x",), ("x",))


def test_panel_validation():
    with pytest.raises(DataError):
        DmuPanel.from_arrays([[1.0], [2.0]], [[1.0], [2.0]], ids=["a", "a"])
    with pytest.raises(DataError):
        DmuPanel.from_arrays([[-1.0]], [[1.0]])
    with pytest.raises(DataError):
        DmuPanel.from_arrays([[1.0]], [[np.nan]])
    with pytest.raises(DataError):
        tabular.split_by_group(DmuPanel.from_arrays([[1.0]], [[1.0]]), "missing")


def test_frontier_spec():
    panel = DmuPanel.from_arrays(np.ones((3, 2)), np.ones((3, 2)), input_names=("a", "b"), output_names=("c", "d"))
    spec = FrontierSpec.for_panel(panel, ["b"], ["c", "d"], "crs")
    assert spec.rts == "CRS" and spec.input_columns == (1,)
    X, Y = spec.matrices(panel)
    assert X.shape == (3, 1) and Y.shape == (3, 2)
    with pytest.raises(ConfigError):
        FrontierSpec.for_panel(panel, ["zzz"])
    with pytest.raises(ConfigError):
        FrontierSpec((0,), (0,), "NIRS")


def test_binarize():
    s = np.array([0.5, 0.7, 0.9, 1.0])
    np.testing.assert_array_equal(tabular.binarize_efficiency(s), [0, 0, 1, 1])
    np.testing.assert_array_equal(tabular.binarize_efficiency(s, 0.9), [0, 0, 0, 1])
    with pytest.raises(ValueError):
        tabular.binarize_efficiency(s, "median")
    with pytest.raises(ValueError):
        tabular.binarize_efficiency([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_describe_quartiles(values):
    d = tabular.describe(values)
    v = sorted(values)
    n = len(v)

    def q(p):  # linear interpolation between order statistics
        h = (n - 1) * p
        lo = math.floor(h)
        return v[lo] + (h - lo) * (v[min(lo + 1, n - 1)] - v[lo])

    assert d["iqr"] == pytest.approx(q(0.75) - q(0.25), abs=1e-9)
    assert d["n"] == n and d["min"] == v[0] and d["max"] == v[-1]


def test_describe_empty_and_nan():
    assert tabular.describe([])["n"] == 0
    assert tabular.describe([1.0, np.nan, 3.0])["mean"] == 2.0


def test_welch_against_formula():
    a, b = np.array([1.0, 2.0, 3.0, 4.5]), np.array([2.0, 4.0, 6.5])
    va, vb = a.var(ddof=1) / 4, b.var(ddof=1) / 3
    t, p = tabular.welch_test(a, b)
    assert t == pytest.approx((a.mean() - b.mean()) / math.sqrt(va + vb))
    assert 0 < p < 1
    assert all(math.isnan(x) for x in tabular.welch_test([1.0], [2.0, 3.0]))


def test_group_summary():
    r = np.random.default_rng(2)
    panel = DmuPanel.from_arrays(r.uniform(1, 2, (20, 1)), r.uniform(1, 2, (20, 1)),
                                 groups=["a"] * 10 + ["b"] * 10, covariates=r.normal(size=(20, 1)))
    gs = tabular.group_summary(panel, "a", "b")
    assert [row.name for row in gs.rows] == ["y0", "x0", "c0"]
    assert "Welch" in gs.render_markdown()


def test_records_roundtrip(tmp_path):
    rows = [{"g": "a", "x": 0.1, "n": 3, "flag": True, "miss": float("nan")},
            {"g": "007", "x": 1 / 3, "n": 4, "flag": False, "miss": None}]
    p = tmp_path / "t.csv"
    tabular.write_records(p, rows)
    back = tabular.read_records(p, text_columns=("g",))
    assert back[0]["g"] == "a" and back[1]["g"] == "007"
    assert back[1]["x"] == 1 / 3 and back[0]["n"] == 3 and back[0]["flag"] is True
    assert math.isnan(back[0]["miss"]) and back[1]["miss"] is None
    assert p.read_bytes().count(b"\r") == 0
