import csv
import io
import json
from importlib.resources import files

import numpy as np
import pytest
from click.testing import CliRunner

from vecselnoise import ModelParams
from vecselnoise.cli import main
from vecselnoise.model import load_config

REFERENCE = str(files("vecselnoise").joinpath("data/reference.cfg"))


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def cfg(tmp_path):
    def make(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return make


def data_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(lines))))


def test_reference_config_is_default():
    p = load_config(REFERENCE).params
    assert p == ModelParams().with_pump_ratio(1.01)


def test_steady_reference(runner):
    res = runner.invoke(main, ["steady", "--config", REFERENCE])
    assert res.exit_code == 0, res.output
    values = {}
    for ln in res.output.splitlines():
        key, _, val = ln.strip().partition(" = ")
        values.setdefault(key, val)  # first I_a is the closed form
    assert float(values["threshold R_a"]) == pytest.approx(5e5, rel=1e-12)
    assert float(values["I_a"]) == pytest.approx(5555.56, rel=1e-6)


def test_steady_below_threshold(runner, cfg):
    res = runner.invoke(main, ["steady", "--config", cfg("pump_ratio = 0.5\n")])
    assert res.exit_code == 0
    assert "not lasing" in res.output


def test_steady_degenerate_config(runner, cfg):
    res = runner.invoke(main, ["steady", "--config", cfg("kappa_ap = 1\n")])
    assert res.exit_code == 2
    assert "config error" in res.output


def test_malformed_config_line_number(runner, cfg):
    res = runner.invoke(main, ["steady", "--config", cfg("xi_a = 0.4\nwhat = 1\n")])
    assert res.exit_code == 2
    assert "line 2" in res.output


def test_missing_config_file(runner, tmp_path):
    res = runner.invoke(main, ["steady", "--config", str(tmp_path / "nope.cfg")])
    assert res.exit_code == 2


def test_spectrum_unstable_exit_3(runner):
    res = runner.invoke(main, ["spectrum", "--config", REFERENCE, "--omega-points", "10"])
    assert res.exit_code == 3
    assert "eigenvalue" in res.output


def test_spectrum_csv_roundtrip(runner, cfg, tmp_path):
    out = tmp_path / "s.csv"
    res = runner.invoke(main, ["spectrum", "--config", cfg("pump_ratio = 0.5\n"), "--out", str(out),
                               "--omega-points", "50"])
    assert res.exit_code == 0, res.output
    text = out.read_text()
    header = [ln for ln in text.splitlines() if ln.startswith("#")]
    assert any(ln.startswith("# xi_a = ") for ln in header)
    assert any("non-lasing" in ln for ln in header)
    rows = data_rows(text)
    assert rows[0] == ["Omega", "C_aa", "C_bb", "C_ab", "d_aa", "d_bb", "d_ab"]
    vals = np.array(rows[1:], float)
    assert vals.shape == (50, 7)
    from vecselnoise import build_system
    ref = build_system(ModelParams().with_pump_ratio(0.5)).sweep(np.geomspace(1e-2, 1e4, 50))
    # 17 significant digits recover the doubles exactly
    assert np.array_equal(vals[:, 1], ref.C_aa)
    assert np.array_equal(vals[:, 0], ref.Omega)


def test_spectrum_byte_identical(runner, cfg, tmp_path):
    c = cfg("pump_ratio = 0.5\np = 1\n")
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        res = runner.invoke(main, ["spectrum", "--config", c, "--out", str(path), "--omega-points", "40"])
        assert res.exit_code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_spectrum_jsonl(runner, cfg, tmp_path):
    path = tmp_path / "s.jsonl"
    res = runner.invoke(main, ["spectrum", "--config", cfg("pump_ratio = 0.5\n"), "--format", "jsonl",
                               "--out", str(path), "--omega-points", "12", "--linear",
                               "--omega-min", "1", "--omega-max", "12"])
    assert res.exit_code == 0, res.output
    recs = [json.loads(ln) for ln in path.read_text().splitlines()]
    assert len(recs) == 12
    assert list(recs[0]) == ["Omega", "C_aa", "C_bb", "C_ab", "d_aa", "d_bb", "d_ab"]
    assert [r["Omega"] for r in recs] == list(np.linspace(1, 12, 12))
    meta = json.loads((tmp_path / "s.jsonl.meta.json").read_text())
    assert meta["xi_a"] == "0.80000000000000004"


def test_spectrum_allow_unstable_labels_output(runner):
    res = runner.invoke(main, ["spectrum", "--config", REFERENCE, "--omega-points", "5", "--allow-unstable"])
    assert res.exit_code == 0
    assert "# stability_gate = off" in res.output


@pytest.mark.parametrize("args", [
    ["--omega-points", "1"],
    ["--omega-min", "10", "--omega-max", "1"],
])
def test_spectrum_grid_rejected(runner, args):
    res = runner.invoke(main, ["spectrum"] + args)
    assert res.exit_code == 2


def test_sweep_xi_files(runner, cfg, tmp_path):
    outdir = tmp_path / "sw"
    res = runner.invoke(main, ["sweep", "--config", cfg("pump_ratio = 0.5\n"), "--out", str(outdir),
                               "--sweep", "xi=0.1,0.4,0.5,0.8", "--omega-points", "20"])
    assert res.exit_code == 0, res.output
    names = sorted(p.name for p in outdir.iterdir())
    assert names == ["index.csv", "xi_000.csv", "xi_001.csv", "xi_002.csv", "xi_003.csv"]
    index = data_rows((outdir / "index.csv").read_text())
    assert [r[1] for r in index[1:]] == ["0.10000000000000001", "0.40000000000000002", "0.5",
                                         "0.80000000000000004"]
    assert all(r[3] == "ok" for r in index[1:])
    assert "# xi_b = 0.40000000000000002" in (outdir / "xi_001.csv").read_text()


def test_sweep_records_failures_in_index(runner, tmp_path):
    outdir = tmp_path / "sw"
    res = runner.invoke(main, ["sweep", "--config", REFERENCE, "--out", str(outdir), "--sweep", "p=0,1",
                               "--omega-points", "5"])
    assert res.exit_code == 3
    index = (outdir / "index.csv").read_text()
    assert "drift matrix is not stable" in index


@pytest.mark.parametrize("spec", ["xi=", "xi", "kappa=1,2", "p=a"])
def test_sweep_bad_spec(runner, tmp_path, spec):
    res = runner.invoke(main, ["sweep", "--out", str(tmp_path / "x"), "--sweep", spec])
    assert res.exit_code == 2


def test_validate_below_threshold(runner, cfg):
    res = runner.invoke(main, ["validate", "--config", cfg("pump_ratio = 0.5\n")])
    assert res.exit_code == 0, res.output
    assert "spectrum oracles skipped" in res.output


def test_validate_default_config_passes(runner, tmp_path):
    res = runner.invoke(main, ["validate", "--config", REFERENCE, "--out", str(tmp_path / "r.json")])
    rec = json.loads((tmp_path / "r.json").read_text())
    assert rec["jacobian_residual"] <= 1e-6
    assert res.exit_code == 0, res.output


def test_dichroism_flag(runner):
    res = runner.invoke(main, ["spectrum", "--dichroism-sign", "minus", "--omega-points", "3",
                               "--allow-unstable", "--closed-form"])
    assert res.exit_code == 0
    assert "# dichroism_sign_a = -1" in res.output


@pytest.mark.slow
def test_toy_verify_runs(runner):
    res = runner.invoke(main, ["toy-verify", "--g", "0.01", "--fock-cutoff", "3", "--window", "20"])
    assert res.exit_code in (0, 4)
    assert "dispersive shift" in res.output


def test_toy_verify_bad_config(runner):
    res = runner.invoke(main, ["toy-verify", "--fock-cutoff", "1"])
    assert res.exit_code == 2
