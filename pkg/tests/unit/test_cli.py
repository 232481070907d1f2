from __future__ import annotations
import json

import pandas as pd

from hokam import run, sweep

_SMALL_MEASURE = ["--set", "measure.samples=100", "--set", "measure.K=4", "--set", "measure.J=3"]


def test_measure_run_writes_tables_and_manifest(tmp_path):
    out = tmp_path / "measure"
    code = run.main(["measure", "-o", str(out), "--backend", "reference", *_SMALL_MEASURE])
    assert code == 0
    for name in ("measure.csv", "plot_data.csv", "manifest.json"):
        assert (out / name).exists()
    table = pd.read_csv(out / "measure.csv")
    assert len(table) == 4
    with open(out / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    assert manifest["experiment"] == "measure"
    assert manifest["files"]["measure"] == "measure.csv"


def test_same_seed_reproduces_tables(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run.main(["measure", "-o", str(out), "--seed", "5", *_SMALL_MEASURE]) == 0
    pd.testing.assert_frame_equal(pd.read_csv(a / "measure.csv"), pd.read_csv(b / "measure.csv"))


def test_bad_overrides_exit_one(tmp_path):
    assert run.main(["measure", "-o", str(tmp_path), "--set", "measure.samples"]) == 1
    assert run.main(["measure", "-o", str(tmp_path), "--set", "measure.nope=1"]) == 1
    assert run.main(["-o", str(tmp_path)]) == 1


def test_oracle_rejects_x_dependent_potential(tmp_path):
    code = run.main(
        ["oracle", "-o", str(tmp_path), "--set", "reduce.potential=cos_theta_decay", "--set", "basis.J=4"]
    )
    assert code == 1


def test_resonant_frequency_exits_two(tmp_path):
    code = run.main(
        [
            "reduce", "-o", str(tmp_path),
            "--set", "reduce.omega=[1.0]",
            "--set", "reduce.potential=cos_theta",
            "--set", "basis.J=4",
        ]
    )
    assert code == 2


def test_list_exits_zero():
    assert run.main(["--list"]) == 0


def test_sweep_inline_grid(tmp_path):
    cfg = tmp_path / "base.yaml"
    cfg.write_text(
        "meta:\n  experiment: measure\n"
        "measure:\n  samples: 100\n  K: 4\n  J: 3\n",
        encoding="utf-8",
    )
    out = tmp_path / "sweep"
    code = sweep.main(["-c", str(cfg), "-o", str(out), "--grid", "measure.tau=2.0,3.0", "--vary-seed"])
    assert code == 0
    big = pd.read_csv(out / "sweep.csv")
    assert big["point"].tolist() == [0, 1]
    assert big["measure.tau"].tolist() == [2.0, 3.0]
    assert (big["exit_code"] == 0).all()
    assert big["seed_root"].nunique() == 2
    assert (out / "manifest.json").exists()
