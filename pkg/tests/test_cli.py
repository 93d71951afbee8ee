import filecmp
import json

import pytest
import yaml

from gridgdp import synth
from gridgdp.cli import main
from gridgdp.impact import read_impact_table


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(d), "--seed", "0"]) == 0
    return d


def _run(data_dir, out, *extra):
    return main(
        ["run", "--data", str(data_dir), "--countries", "SYA", "--out", str(out), "--draws", "200", "--no-placebo2", *extra]
    )


def test_synth_writes_fixture_countries(data_dir):
    for spec in synth.fixture_specs(0):
        assert (data_dir / f"{spec.country}_load.csv").exists()
        assert (data_dir / f"{spec.country}_temp.csv").exists()
    assert set(yaml.safe_load((data_dir / "config.yaml").read_text())["countries"]) >= {"SYA", "SYB", "SYC"}


def test_unknown_country_is_invalid(data_dir, tmp_path, capsys):
    assert main(["run", "--data", str(data_dir), "--countries", "SYA,ZZ", "--out", str(tmp_path)]) == 2
    assert "ZZ" in capsys.readouterr().err
    assert not (tmp_path / "SYA").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--data", "/nonexistent", "--out", "x"],
        ["run", "--out", "x"],
        ["run", "--data", ".", "--out", "x", "--mode", "hourly"],
        ["frobnicate"],
    ],
)
def test_bad_arguments(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_manifest_unknown_key(data_dir, tmp_path):
    m = tmp_path / "m.yaml"
    m.write_text(yaml.safe_dump({"data_dir": str(data_dir), "out": str(tmp_path), "colour": "blue"}))
    assert main(["run", "--manifest", str(m)]) == 2


@pytest.fixture(scope="module")
def two_runs(data_dir, tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    assert _run(data_dir, a) == 0
    assert _run(data_dir, b) == 0
    return a, b


def test_run_writes_outputs(two_runs):
    out = two_runs[0]
    for name in ("impact_daily.csv", "impact_weekly.csv", "impact_model.json", "prefilter.json", "diagnostics.txt",
                 "gdp_quarterly.csv", "gdp_monthly.txt", "gaps.csv", "daily_series.csv"):
        assert (out / "SYA" / name).stat().st_size > 0, name
    for name in ("summary_diagnostics.txt", "summary_gdp_monthly.csv", "provenance.json"):
        assert (out / name).exists()
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["status"] == {"SYA": "ok"}
    assert prov["manifest"]["draws"] == 200


def test_reruns_are_byte_identical(two_runs):
    a, b = two_runs
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    # provenance records the output directory itself; everything else must match byte for byte
    assert cmp.diff_files in ([], ["provenance.json"])
    sub = filecmp.dircmp(a / "SYA", b / "SYA")
    assert sub.common_files and not sub.diff_files
    pa, pb = (json.loads((d / "provenance.json").read_text()) for d in (a, b))
    pa["manifest"].pop("out"), pb["manifest"].pop("out")
    assert pa == pb


def test_impact_table_header(two_runs):
    frame, meta = read_impact_table(two_runs[0] / "SYA" / "impact_weekly.csv")
    assert meta["country"] == "SYA" and meta["seed"] == "0" and meta["draws"] == "200"
    assert meta["estimator"] == "ml_arma" and "," in meta["order"]
    assert list(frame.columns) == ["impact_pct", "lo95", "hi95"]
    assert (frame["lo95"] <= frame["hi95"]).all()


def test_seed_changes_intervals_only(data_dir, two_runs, tmp_path):
    assert _run(data_dir, tmp_path, "--seed", "1") == 0
    a, _ = read_impact_table(two_runs[0] / "SYA" / "impact_daily.csv")
    b, _ = read_impact_table(tmp_path / "SYA" / "impact_daily.csv")
    assert (a["impact_pct"] == b["impact_pct"]).all()
    assert (a["lo95"] != b["lo95"]).any() and (a["hi95"] != b["hi95"]).any()


def test_stage_commands(data_dir, tmp_path):
    base = ["--data", str(data_dir), "--countries", "SYC", "--out", str(tmp_path), "--draws", "100"]
    assert main(["ingest", *base]) == 0
    assert main(["fit", *base]) == 0
    assert main(["impact", *base]) == 0
    assert main(["gdp", *base]) == 0
    d = tmp_path / "SYC"
    assert (d / "impact_draws.npy").exists() and (d / "gdp_monthly.txt").exists()
    assert main(["report", *base, "--no-placebo2"]) == 0
    assert "SYC" in (tmp_path / "summary_diagnostics.txt").read_text()


def test_partial_failure_exit_code(data_dir, tmp_path):
    broken = tmp_path / "data"
    broken.mkdir()
    for f in data_dir.iterdir():
        (broken / f.name).write_bytes(f.read_bytes())
    (broken / "SYC_load.csv").write_text("timestamp,load_mw\n2020-01-01T00:00,abc\n")
    out = tmp_path / "out"
    code = main(["run", "--data", str(broken), "--countries", "SYA,SYC", "--out", str(out), "--draws", "50",
                 "--no-placebo2"])
    assert code == 1
    assert (out / "SYC" / "error.txt").exists()
    assert (out / "SYA" / "impact_daily.csv").exists()
