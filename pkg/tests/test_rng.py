from __future__ import annotations

import hashlib

import numpy as np
import pytest

from callgym.rng import MASK64, derive_key, stream


def test_same_key_same_stream():
    a = stream(7, "maze2d", "generate").integers(0, 1 << 30, size=8)
    b = stream(7, "maze2d", "generate").integers(0, 1 << 30, size=8)
    assert np.array_equal(a, b)


def test_domains_are_independent():
    a = stream(7, "maze2d", "generate").random(4)
    b = stream(7, "maze2d", "solver").random(4)
    c = stream(8, "maze2d", "generate").random(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_domain_path_is_not_concatenation():
    assert derive_key(1, "ab", "c") != derive_key(1, "a", "bc")


def test_key_is_128_bits_and_seed_checked():
    k = derive_key(MASK64, "x")
    assert 0 <= k < 1 << 128
    with pytest.raises(ValueError):
        derive_key(-1)
    with pytest.raises(ValueError):
        derive_key(MASK64 + 1)


def test_key_matches_independent_digest():
    h = hashlib.blake2b(digest_size=16, person=b"callgym-rng")
    h.update((5).to_bytes(8, "little") + b"\x1fgen" + b"\x1f3")
    assert derive_key(5, "gen", 3) == int.from_bytes(h.digest(), "little")


def test_frozen_draws():
    # pins the key derivation and bit generator; a change here reshuffles every task
    assert derive_key(0, "frozen") == 0x36FAA9A99503EB0EB2F4CB232A30528F
    assert stream(0, "frozen").integers(0, 10**9, size=3).tolist() == [316888533, 966820798, 473771958]
