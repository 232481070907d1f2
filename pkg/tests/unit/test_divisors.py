from __future__ import annotations
import numpy as np
import pytest

from hokam.divisors import (
    DivisorIndex,
    FrequencySet,
    certify,
    certify_via_diophantine,
    diophantine,
    divisor,
    excluded_fraction,
    gap_constant,
    measure_scan,
    sample_margins,
    threshold,
)
from hokam.registry import get_frequency_model

GOLDEN = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def test_single_divisor_and_threshold():
    freqs = FrequencySet([0.7], [1.0, 3.0, 5.0])
    idx = DivisorIndex((1,), ((1, 1), (2, -1)))
    assert np.isclose(divisor(idx, freqs), -1.3)
    assert idx.bracket == 2 and idx.l1 == 1
    assert np.isclose(threshold(idx, 0.1, 2.0), 0.1)


def test_index_validation():
    with pytest.raises(ValueError):
        DivisorIndex((0,))
    with pytest.raises(ValueError):
        DivisorIndex((1,), ((1, 2), (2, 1)))
    # opposite entries on one mode merge away
    assert DivisorIndex((1,), ((2, 1), (2, -1))).l == ()


def test_gap_law_extension():
    freqs = FrequencySet([0.5], [1.0, 3.0, 5.0])
    Omega, err = freqs.extended(5)
    assert np.allclose(Omega, [1, 3, 5, 7, 9])
    assert np.all(err == 0)
    assert gap_constant([1.0, 3.0, 5.0]) == 2.0


def test_rational_rotation_fails_diophantine():
    rep = diophantine([0.5], alpha=0.01, tau=3.0, K=2)
    assert not rep.passed
    assert rep.worst_value == 0.0
    assert abs(rep.b) == 1


def test_golden_rotation_passes():
    rep = diophantine([GOLDEN], alpha=0.015, tau=4.0, K=8)
    assert rep.passed and rep.margin >= 0.015

    freqs = FrequencySet([GOLDEN], 2.0 * np.arange(1, 7) - 1.0)
    full = certify(freqs, alpha=0.015, tau=4.0, K=8)
    fast = certify_via_diophantine(freqs, alpha=0.015, tau=4.0, K=8)
    assert full.passed and fast.passed
    assert full.count_checked > 0


def test_exact_resonance_is_reported():
    freqs = FrequencySet([1.0], [1.0, 3.0, 5.0])
    rep = certify(freqs, alpha=0.01, tau=2.0, K=2)
    assert not rep.passed
    assert abs(rep.worst_value) < 1e-12
    with pytest.raises(ValueError):
        certify_via_diophantine(FrequencySet([GOLDEN], [1.0, 3.1]), 0.01, 3.0, 2)


def test_excluded_fraction_shrinks_with_alpha():
    model = get_frequency_model("constant_gap")
    m = sample_margins([[0.5, 2.5]], model, tau=3.0, K=6, J=4, samples=120, seed=3)
    assert m.shape == (120,)
    fr = [excluded_fraction(m, a) for a in (0.4, 0.2, 0.1, 0.05, 0.0)]
    assert all(a >= b for a, b in zip(fr, fr[1:]))
    assert fr[-1] == 0.0

    df = measure_scan([[0.5, 2.5]], [0.2, 0.05], 3.0, 6, 4, model, 120, 3)
    assert list(df.columns) == ["alpha", "fraction_excluded", "samples", "seed", "K", "J", "tau"]
    assert np.isclose(df.loc[0, "fraction_excluded"], fr[1])
    with pytest.raises(ValueError):
        measure_scan([[0.5, 2.5]], [0.2], 3.0, 6, 4, model, 50, 3)
