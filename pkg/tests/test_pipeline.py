import json

import pytest

from deaiml import cli
from deaiml.config import load_config
from deaiml.pipeline import STAGES, Pipeline, StageError
from deaiml.synth import write_synthetic

from layout import layout_problems, output_digest

SMALL = dict(bootstrap_reps=100, sd_reps=200, k_folds=3, top_k=10,
             gbt_grid={"n_estimators": [15], "subsample": [0.7], "max_depth": [2, 3], "learning_rate": [0.1]},
             logit_C=(1.0,))


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    d = tmp_path_factory.mktemp("proj")
    _, conf = write_synthetic(d, n=160, seed=2, **SMALL)
    return d, conf


@pytest.fixture(scope="module")
def first_run(project):
    d, conf = project
    out = d / "run1"
    assert cli.run(["pipeline", "--config", str(conf), "--out", str(out)]) == 0
    return out


def test_layout_matches_tables(project, first_run):
    cfg = load_config(project[1])
    assert layout_problems(first_run, cfg) == []
    m = json.loads((first_run / "manifest.json").read_text())
    assert set(m["stages"]) == set(STAGES) and not any(m["cached"].values())
    assert m["defaults"]["sd_scores"] == "tebc"


def test_rerun_is_cached_then_forced(project, first_run, capsys):
    _, conf = project
    before = output_digest(first_run)
    assert cli.run(["pipeline", "--config", str(conf), "--out", str(first_run)]) == 0
    assert capsys.readouterr().out.count("cached") == 4
    assert cli.run(["pipeline", "--config", str(conf), "--out", str(first_run), "--force",
                    "--stage", "sdtest"]) == 0
    printed = capsys.readouterr().out
    assert "sdtest: cached" not in printed and "dea: cached" in printed
    assert output_digest(first_run) == before


def test_fresh_run_is_bit_identical_and_jobs_free(project, first_run):
    _, conf = project
    other = project[0] / "run2"
    assert cli.run(["pipeline", "--config", str(conf), "--out", str(other), "--jobs", "2"]) == 0
    assert output_digest(other) == output_digest(first_run)
    m1 = json.loads((first_run / "manifest.json").read_text())
    m2 = json.loads((other / "manifest.json").read_text())
    assert m1["manifest_hash"] == m2["manifest_hash"]


def test_seed_change_invalidates_cache(project, first_run, tmp_path):
    _, conf = project
    cfg = load_config(conf).with_overrides(seed=9, out=str(first_run))
    pipe = Pipeline(cfg)
    assert not pipe.stamp_valid("dea", pipe.stage_key("dea"))


def test_tampered_output_is_recomputed(project, tmp_path):
    _, conf = project
    out = tmp_path / "r"
    assert cli.run(["dea", "--config", str(conf), "--out", str(out)]) == 0
    target = next((out / "dea").glob("scores_*.csv"))
    original = target.read_bytes()
    target.write_bytes(original + b"x")
    pipe = Pipeline(load_config(conf).with_overrides(out=str(out)))
    assert not pipe.stamp_valid("dea", pipe.stage_key("dea"))
    assert not pipe.run(("dea",)).stages["dea"].cached
    assert target.read_bytes() == original


def test_missing_upstream_is_a_data_error(project, tmp_path, capsys):
    _, conf = project
    assert cli.run(["sdtest", "--config", str(conf), "--out", str(tmp_path / "empty")]) == 3
    assert "run it first" in capsys.readouterr().err
    with pytest.raises(StageError):
        Pipeline(load_config(conf).with_overrides(out=str(tmp_path / "e2"))).run(("explain",))


def test_report_and_lp_dump(project, first_run, capsys):
    _, conf = project
    assert cli.run(["report", "--config", str(conf), "--out", str(first_run)]) == 0
    text = (first_run / "report.md").read_text()
    for heading in ("Panel A", "Panel B", "Panel C", "H0: private dominates public", "Gradient boosted trees",
                    "Leading features"):
        assert heading in text
    assert cli.run(["dea", "--config", str(conf), "--out", str(first_run), "--dump-lp", "u00003"]) == 0
    lp = (first_run / "debug" / "lp_cognitive_u00003.lp").read_text()
    assert lp.splitlines()[1] == "Maximize" and lp.rstrip().endswith("End")
    assert cli.run(["dea", "--config", str(conf), "--out", str(first_run), "--dump-lp", "zzz"]) == 3


def test_exit_codes(tmp_path, project, capsys):
    assert cli.run(["pipeline", "--config", str(tmp_path / "none.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text(project[1].read_text().replace("reps = 100", "reps = 5", 1))
    assert cli.run(["dea", "--config", str(bad)]) == 2
    moved = tmp_path / "moved.toml"
    moved.write_text(project[1].read_text())  # data path now resolves to a missing file
    assert cli.run(["dea", "--config", str(moved), "--out", str(tmp_path / "o")]) == 3
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    (corrupt / "panel.csv").write_text((project[0] / "panel.csv").read_text().replace("\n", "\nbroken,row\n", 1))
    (corrupt / "config.toml").write_text(project[1].read_text())
    assert cli.run(["dea", "--config", str(corrupt / "config.toml"), "--out", str(tmp_path / "o2")]) == 3
    assert "expected" in capsys.readouterr().err


def test_simulate_command(tmp_path, capsys):
    assert cli.run(["simulate", str(tmp_path / "sim"), "--n", "80", "--seed", "3"]) == 0
    cfg = load_config(tmp_path / "sim" / "config.toml")
    assert cfg.seed == 3 and cfg.bootstrap_reps == 500
