from __future__ import annotations
import logging
import numpy as np
import pytest

from hokam.divisors import FrequencySet
from hokam.engine import conjugacy_residual, kam_step, run
from hokam.errors import DivergenceError
from hokam.hamiltonian import NormParams, TaylorHamiltonian, majorant_norm
from hokam.lie import symplectic_defect
from hokam.schedule import make_schedule

GOLDEN = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def _real(terms, J: int = 3, K: int = 1) -> TaylorHamiltonian:
    A = TaylorHamiltonian.from_terms(1, J, terms, K=K, D=2)
    return 0.5 * (A + A.conjugate())


def _setup():
    freqs = FrequencySet([GOLDEN], [1.0, 3.0, 5.0])
    P = _real(
        [
            (((1,), (0,), {1: 1}, {2: 1}), 0.01),
            (((1,), (0,), {1: 1}, {1: 1}), 0.005j),
            (((-1,), (0,), {3: 1}, {2: 1}), 0.008),
            (((0,), (0,), {1: 1}, {1: 1}), 0.01),
            (((1,), (0,), {2: 2}, {}), 0.004),
        ]
    )
    sched = make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=5, K0=2, K_limit=8)
    return freqs, P, sched, NormParams(s=0.1, r=1.0)


def test_single_step_moves_frequencies_and_contracts():
    freqs, P, sched, norm = _setup()
    step = kam_step(freqs, P, sched, 0, norm=norm)
    assert np.isclose(step.freqs.Omega[0], 1.01)
    assert np.isclose(step.freqs.omega[0], GOLDEN)
    assert step.record["eps_next"] < step.record["eps_majorant"]
    assert step.phi is not None and step.phi.theta_fixed
    assert step.P.is_real(1e-10)


def test_run_converges_with_composed_map():
    freqs, P, sched, norm = _setup()
    res = run(freqs, P, sched, norm=norm, target=1e-9)
    tr = res.trace
    assert len(tr) >= 2
    assert np.all(tr["eps_next"] < tr["eps_majorant"])
    assert res.eps_final <= 1e-9
    assert res.map is not None and len(res.maps) == len(tr)
    assert symplectic_defect(res.map) < 1e-10
    assert conjugacy_residual(freqs, P, res, norm) < 1e-7
    assert res.final_report is not None
    assert len(res.generators) == len(tr)


def test_zero_perturbation_stops_immediately():
    freqs, _, sched, norm = _setup()
    res = run(freqs, TaylorHamiltonian.zero(1, 3, K=1), sched, norm=norm)
    assert len(res.trace) == 0
    assert np.allclose(res.freqs.Omega, freqs.Omega)


def test_action_dependent_terms_take_the_lie_path():
    freqs, _, sched, norm = _setup()
    P = _real([(((1,), (1,), {}, {}), 0.001), (((1,), (0,), {1: 1}, {2: 1}), 0.002)])
    step = kam_step(freqs, P, sched, 0, norm=norm)
    assert step.phi is None
    assert step.record["eps_next"] < step.record["eps_majorant"]

    res = run(freqs, P, sched, norm=norm, target=1e-12, max_nu=2)
    assert res.map is None
    with pytest.raises(ValueError):
        conjugacy_residual(freqs, P, res, norm)
    assert majorant_norm(res.P, norm).total < majorant_norm(P, norm).total


def test_missed_gate_is_recorded_and_only_strict_raises(caplog):
    freqs, P, sched, norm = _setup()
    logger = logging.getLogger("hokam.engine")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.INFO, logger="hokam.engine"):
            step = kam_step(freqs, P, sched, 0, norm=norm)
    finally:
        logger.removeHandler(caplog.handler)
    assert not step.record["gate_ok"]
    assert step.record["eps_majorant"] > step.record["gate"]
    gate_lines = [r for r in caplog.records if "[gate]" in r.getMessage()]
    assert gate_lines and all(r.levelno == logging.INFO for r in gate_lines)
    with pytest.raises(DivergenceError):
        kam_step(freqs, P, sched, 0, norm=norm, strict=True)
