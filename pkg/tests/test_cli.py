import json
import shutil
import subprocess
import sys

import pytest

from crceval import cli as cli_mod
from crceval.cli import main
from crceval.fixture import make_fixture
from crceval.report import CONFIG_KEYS, SECTIONS, RunConfig


@pytest.fixture
def work(tmp_path, fixture_dir):
    d = tmp_path / "fx"
    shutil.copytree(fixture_dir, d)
    return d


def edit_config(d, **changes):
    path = d / "config.json"
    doc = json.loads(path.read_text())
    doc.update(changes)
    for k, v in list(doc.items()):
        if v is None:
            del doc[k]
    path.write_text(json.dumps(doc))
    return path


def run(*args):
    return main([str(a) for a in args])


def test_bundled_fixture_matches_generator(fixture_dir):
    for name, content in make_fixture(649).items():
        assert (fixture_dir / name).read_text(encoding="utf-8") == content, name


def test_report_is_byte_identical(work, tmp_path):
    cfg = work / "config.json"
    assert run("--config", cfg, "--out", tmp_path / "a", "--fixed-clock", "report") == 0
    assert run("--config", cfg, "--out", tmp_path / "b", "--fixed-clock", "report") == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in ("report.json", "fit_fe.json", "fit_fep.json", "year_effects.csv", "indicators.json",
              "network.json", "keywords.csv", "mosaic.json"):
        assert n in names
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_report_contents(work, tmp_path):
    assert run("--config", work / "config.json", "--out", tmp_path, "--fixed-clock", "report") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert list(rep["sections"]) == list(SECTIONS)
    assert rep["metadata"]["generated_at"] == "1970-01-01T00:00:00Z"
    fep = rep["sections"]["fep"]
    assert fep["converged"] is True
    reasons = {r["reason"]: r for r in fep["drop_report"]}
    assert reasons["singleton_group"]["dropped_singletons"] == 5
    assert reasons["all_zero_outcome"]["dropped_units"]
    fe = rep["sections"]["fe"]
    assert fe["n_obs"] == 201 and fe["base_year"] == 2005
    assert rep["sections"]["keywords"]["overlap"] == pytest.approx(38 / 75)
    assert rep["sections"]["indicators"]["center"]["n_pub"] == 760
    assert rep["sections"]["network"]["n_jel"] == 20
    header = (tmp_path / "year_effects.csv").read_text().splitlines()[0]
    assert "year" in header


def test_config_hash_tracks_fields(work):
    base = RunConfig.load(work / "config.json")
    again = RunConfig.load(work / "config.json")
    assert base.config_hash() == again.config_hash()
    doc = json.loads((work / "config.json").read_text())
    reordered = dict(reversed(list(doc.items())))
    assert RunConfig.from_dict(reordered, work).config_hash() == base.config_hash()
    for key, value in [("keywords_k", 74), ("network_format", "dot"), ("lags", False), ("ra_reading", "total")]:
        changed = RunConfig.from_dict({**doc, key: value}, work)
        assert changed.config_hash() != base.config_hash(), key


@pytest.mark.parametrize("cmd, files", [
    ("fit-fe", ["fit_fe.json", "year_effects.csv"]),
    ("fit-fep", ["fit_fep.json", "year_effects.csv"]),
    ("indicators", ["indicators.json"]),
    ("network", ["network.json"]),
    ("keywords", ["keywords.csv"]),
    ("mosaic", ["mosaic.json"]),
])
def test_subcommands(work, tmp_path, cmd, files):
    assert run("--config", work / "config.json", "--out", tmp_path, cmd) == 0
    for f in files:
        assert (tmp_path / f).exists()


def test_format_switch(work, tmp_path):
    assert run("--config", work / "config.json", "--out", tmp_path, "--format", "json", "keywords") == 0
    assert (tmp_path / "keywords.json").exists()
    assert run("--config", work / "config.json", "--out", tmp_path, "--format", "csv", "mosaic") == 0
    assert (tmp_path / "mosaic.csv").read_text().startswith("gender")


def test_network_formats(work, tmp_path):
    for fmt in ("dot", "graphml"):
        edit_config(work, network_format=fmt)
        assert run("--config", work / "config.json", "--out", tmp_path, "network") == 0
        assert (tmp_path / f"network.{fmt}").exists()


def test_lag_fit(work, tmp_path):
    edit_config(work, lags=True)
    assert run("--config", work / "config.json", "--out", tmp_path, "fit-fe") == 0
    doc = json.loads((tmp_path / "fit_fe.json").read_text())
    assert "n_dp_lag1" in doc["coefficients"]


def test_ingest_check(work, capsys):
    assert run("--config", work / "config.json", "ingest-check") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_obs"] == 206 and out["n_units"] == 35
    assert out["life_spans"] == {"1": 5, "2": 1, "3": 1, "4": 12, "8": 11, "12": 5}


def test_exit_code_input_errors(work, tmp_path):
    assert run("--config", tmp_path / "missing.json", "report") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("--config", bad, "report") == 1
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert run("--config", bad, "report") == 1
    (work / "panel.csv").write_text((work / "panel.csv").read_text().replace("SP01,2005,", "SP01,20x5,", 1))
    assert run("--config", work / "config.json", "--out", tmp_path / "o", "fit-fe") == 1
    assert run("fit-fe") == 1
    assert run("--config", work / "config.json", "no-such-command") == 1


def test_exit_code_nonconvergence(work, tmp_path):
    edit_config(work, fep_max_iter=1)
    assert run("--config", work / "config.json", "--out", tmp_path, "fit-fep") == 2
    assert run("--config", work / "config.json", "--out", tmp_path / "r", "--fixed-clock", "report") == 2
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["sections"]["fep"]["converged"] is False


def test_exit_code_internal(work, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli_mod, "run_report", boom)
    assert run("--config", work / "config.json", "--out", tmp_path, "report") == 3


def test_help_lists_config_keys(capsys):
    assert run("--help") == 0
    out = capsys.readouterr().out
    for key in CONFIG_KEYS:
        assert key in out
    for cmd in ("ingest-check", "fit-fe", "fit-fep", "indicators", "network", "keywords", "mosaic", "report"):
        assert cmd in out


def test_make_fixture(tmp_path):
    assert run("--out", tmp_path, "--seed", 7, "make-fixture") == 0
    assert (tmp_path / "config.json").exists()
    assert (tmp_path / "panel.csv").read_text() == make_fixture(7)["panel.csv"]


def test_console_script(work, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crceval.cli", "--config", str(work / "config.json"),
                           "--out", str(tmp_path), "mosaic"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
