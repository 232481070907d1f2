from __future__ import annotations
import numpy as np

from hokam.rng import RngBundle, Stream, make_seedseq, seed_root, substream


def test_substreams_depend_only_on_root_and_keys():
    a = np.random.default_rng(substream(make_seedseq(123), 4, 5)).random(4)
    b = np.random.default_rng(substream(make_seedseq(123), 4, 5)).random(4)
    c = np.random.default_rng(substream(make_seedseq(123), 4, 6)).random(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_bundle_streams_restart_from_the_beginning():
    rngs = RngBundle(42)
    assert np.array_equal(rngs.for_sample(7).random(3), rngs.for_sample(7).random(3))
    assert not np.allclose(rngs.for_sample(0).random(3), rngs.for_sample(1).random(3))
    assert not np.allclose(rngs.for_restart(0, 0).random(3), rngs.for_restart(0, 1).random(3))
    # same key under different tags
    assert not np.allclose(rngs.for_family(8).random(3), rngs.for_point(8).random(3))


def test_bundle_matches_explicit_substream():
    rngs = RngBundle(9)
    direct = np.random.default_rng(substream(9, Stream.POINT, 3)).random(2)
    assert np.array_equal(rngs.for_point(3).random(2), direct)


def test_root_normalization():
    ss = make_seedseq(5)
    assert RngBundle(ss).root == seed_root(ss)
    assert RngBundle(None).root == 0
    assert RngBundle(2**32 + 7).root == 7
