from __future__ import annotations
import logging
import numpy as np
import pytest

from hokam.schedule import KAPPA, default_t, make_schedule


def test_sequences_follow_their_recurrences():
    sc = make_schedule(s0=0.2, alpha0=0.015, M0=1.0, tau=4.0, t=default_t(4.0, 1), max_nu=6, K0=8)
    assert sc.max_nu == 6
    assert np.isclose(sc.alpha[0], 0.015)
    assert np.allclose(sc.alpha[-1], 0.0075 * (1 + 2.0**-6))
    assert np.all(np.diff(sc.alpha) < 0) and np.all(sc.alpha > 0.0075)
    assert np.allclose(sc.sigma[1:] / sc.sigma[:-1], 0.5)
    assert np.all(sc.s > 0) and np.isclose(sc.s[0], 0.2)
    assert np.all(np.diff(sc.eps) < 0)
    assert np.isclose(sc.eps[1], sc.c1 * sc.eps[0] ** KAPPA / (sc.alpha[0] * sc.sigma[0] ** sc.t) ** (KAPPA - 1))
    assert sc.K.tolist() == [8, 16, 32, 64, 64, 64, 64]
    assert np.allclose(sc.lam, sc.alpha / sc.M)


def test_gate_with_measured_eps():
    sc = make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=3, K0=4)
    assert np.isclose(sc.gate(1), sc.gate(1, sc.eps[1]))
    assert sc.gate(1, 8 * sc.eps[1]) > sc.gate(1)


def test_frame_columns_and_default_t():
    assert default_t(4.0, 1) == 10.0
    df = make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=2, K0=4).to_frame()
    assert list(df.columns) == ["nu", "alpha", "M", "lambda", "eps", "sigma", "eta", "s", "r", "K"]
    assert len(df) == 3


@pytest.mark.parametrize(
    "kw",
    [
        dict(s0=0.0),
        dict(alpha0=0.0),
        dict(alpha0=1.5),
        dict(M0=-1.0),
        dict(c0=0.5),
        dict(max_nu=-1),
    ],
)
def test_invalid_inputs(kw):
    args = dict(s0=0.2, alpha0=0.015, M0=1.0, tau=4.0, t=10.0)
    args.update(kw)
    with pytest.raises(ValueError):
        make_schedule(**args)


def test_cutoff_cap_is_logged(caplog):
    logger = logging.getLogger("hokam.schedule")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.WARNING, logger="hokam.schedule"):
            sc = make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=4, K0=8, K_limit=16)
            capped = [r for r in caplog.records if "K_limit=16" in r.getMessage()]
            caplog.clear()
            make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=1, K0=8, K_limit=16)
            uncapped = [r for r in caplog.records if "K_limit" in r.getMessage()]
    finally:
        logger.removeHandler(caplog.handler)
    assert sc.K.tolist() == [8, 16, 16, 16, 16]
    assert len(capped) == 1 and "nu=2" in capped[0].getMessage()
    assert uncapped == []
