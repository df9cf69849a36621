import json
import subprocess
import sys

import numpy as np
import pytest

from emgwin import cli, sweep
from emgwin.dataio import load_dataset, load_model

TINY_SYNTH = ["--subjects", "2", "--sessions", "1", "--trials", "2", "--rate", "256",
              "--channels", "8"]
TINY_NET = ["--epochs", "2", "--lr", "1e-3", "--filters", "2,2,4,4", "--dense-units", "8"]


def run(*args):
    return cli.main([str(a) for a in args])


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "run_manifest.json"}


def test_synth_is_deterministic(tmp_path):
    assert run("synth", "--seed", 7, "--scale", "small", "--subjects", 1, "--out", tmp_path / "a") == 0
    assert run("synth", "--seed", 7, "--scale", "small", "--subjects", 1, "--out", tmp_path / "b") == 0
    assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["master_seed"] == 7
    assert manifest["config"]["scale"] == "small" and "finished_at" in manifest


def test_pipeline_end_to_end(tmp_path):
    d, p, f = tmp_path / "d", tmp_path / "p", tmp_path / "f"
    assert run("synth", "--out", d, *TINY_SYNTH) == 0
    assert run("preprocess", "--in", d, "--out", p) == 0
    recs = load_dataset(p)
    assert len(recs) == 2 and abs(recs[0].samples[:, recs[0].labels == 1].std(axis=1) - 1).max() < 1e-5
    assert run("segment", "--in", p, "--out", f, "--window", 32, "--overlap", 0.5,
               "--subjects", "S01") == 0
    assert run("train", "--frames", f, "--out", tmp_path / "m.bin", "--kernel", 3,
               "--curves", tmp_path / "c.csv", "--report", tmp_path / "rep.json", *TINY_NET) == 0
    net = load_model(tmp_path / "m.bin")
    assert net.spec.window == 32 and net.spec.channels == 8
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 3
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert 0 <= rep["test_accuracy"] <= 1
    assert (tmp_path / "m.run.json").is_file()


def test_sweep_and_report(tmp_path):
    d = tmp_path / "d"
    run("synth", "--out", d, *TINY_SYNTH)
    args = ["sweep", "--in", d, "--out", tmp_path / "r.csv", "--windows", "16,24",
            "--overlaps", "0,0.75", "--kernels", "3,7", "--seeds", 2, "--no-timing", *TINY_NET]
    assert run(*args) == 0
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2 * 2 * 2
    assert all(r.endswith(",0.00") for r in rows[1:])
    assert run("report", "--csv", tmp_path / "r.csv", "--plots", tmp_path / "plots") == 0
    svgs = {p.name for p in (tmp_path / "plots").glob("*.svg")}
    assert {"overlap_T16.svg", "overlap_T24.svg", "f1_vs_window.svg"} <= svgs
    assert (tmp_path / "plots" / "run_manifest.json").is_file()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tiny run\nout = %s\nsubjects = 1\nsessions=1\nrate = 256\nchannels = 4\n"
                   "trials = 1\nseed = 3\n" % (tmp_path / "d"))
    args = cli.parse_args(["synth", "--config", str(cfg), "--seed", "9"])
    assert args.seed == 9 and args.subjects == 1 and args.rate == 256.0
    assert run("synth", "--config", cfg) == 0
    (rec,) = load_dataset(tmp_path / "d")
    assert rec.samples.shape == (4, 4 * 2 * 1280)


def test_sweep_defaults_match_grid():
    args = cli.parse_args(["sweep", "--in", "d", "--out", "r.csv"])
    g = sweep.SweepGrid()
    assert (args.windows, args.overlaps, args.kernels) == (g.windows, g.overlaps, g.kernels)
    assert args.epochs == 35 and args.lr == 1e-4 and args.filters == (32, 32, 64, 64)


def test_exit_codes(tmp_path, capsys):
    assert run("train", "--frames", tmp_path / "none", "--out", tmp_path / "m.bin") == 2
    assert "data error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key = 1\n")
    assert run("synth", "--config", bad, "--out", tmp_path / "x") == 1
    assert run("synth", "--out", tmp_path / "x", "--subjects", 0) == 1


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from emgwin.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("loss became non-finite")

    monkeypatch.setattr(cli.training, "train", boom)
    d, f = tmp_path / "d", tmp_path / "f"
    run("synth", "--out", d, *TINY_SYNTH)
    run("segment", "--in", d, "--out", f, "--window", 16)
    assert run("train", "--frames", f, "--out", tmp_path / "m.bin") == 3


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "emgwin.cli", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for cmd in ("synth", "preprocess", "segment", "train", "sweep", "report"):
        assert cmd in out
