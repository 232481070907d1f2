from __future__ import annotations
import pathlib
import numpy as np
import pytest

from hokam import params
from hokam.run import run_experiment


@pytest.mark.perf
def test_full_size_oracle():
    cfg = params.load_config(pathlib.Path(__file__).parents[2] / "configs" / "oracle.yaml")
    out = run_experiment(cfg)
    summary = out["summary"]
    assert len(out["oracle_diff"]) == 32
    assert summary["max_diff"] < 1e-9
    assert summary["max_diag_deviation"] < 1e-8
    assert summary["max_offdiag"] < 1e-8
    assert summary["symplectic_defect"] < 1e-10
    assert np.isclose(abs(summary["global_phase"]), 1.0)
