"""
TDD 테스트: 키 난수 스트림 테스트
"""
import numpy as np
import pytest
from src.utils.rng import (
    STREAM_COIN,
    STREAM_SPLIT,
    coin_flip,
    coin_flips,
    keyed_hash,
    make_generator,
    sub_seed,
)


class TestCoinFlips:
    """(seed, u, i, j) 키 동전 테스트"""

    def test_deterministic(self):
        assert coin_flip(7, 3, 1, 2) == coin_flip(7, 3, 1, 2)

    def test_vectorized_matches_scalar(self):
        items_i = np.array([0, 1, 2, 5, 9])
        items_j = np.array([1, 4, 3, 8, 11])
        flips = coin_flips(11, 4, items_i, items_j)

        assert flips.dtype == np.uint8
        assert flips.tolist() == [coin_flip(11, 4, int(i), int(j)) for i, j in zip(items_i, items_j)]

    def test_balanced(self):
        """대략 절반이 1"""
        i, j = np.triu_indices(500, k=1)
        flips = coin_flips(0, 0, i, j)
        assert 0.48 < flips.mean() < 0.52

    def test_seed_changes_stream(self):
        i, j = np.triu_indices(40, k=1)
        assert not np.array_equal(coin_flips(0, 0, i, j), coin_flips(1, 0, i, j))
        assert not np.array_equal(coin_flips(0, 0, i, j), coin_flips(0, 1, i, j))

    def test_large_seed(self):
        seed = (1 << 64) - 1
        assert coin_flip(seed, 0, 0, 1) in (0, 1)


class TestDerivedStreams:
    """하위 생성기 테스트"""

    def test_keyed_hash_broadcasts(self):
        values = keyed_hash(5, STREAM_COIN, 1, np.arange(4))
        assert values.shape == (4,)
        assert len(set(values.tolist())) == 4

    def test_make_generator_reproducible(self):
        a = make_generator(3, STREAM_SPLIT, 0).random(5)
        b = make_generator(3, STREAM_SPLIT, 0).random(5)
        c = make_generator(3, STREAM_SPLIT, 1).random(5)

        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_sub_seed(self):
        seed = sub_seed(7, 200, 1)

        assert seed == sub_seed(7, 200, 1)
        assert seed != sub_seed(7, 200, 2)
        assert 0 <= seed < (1 << 64)
        assert isinstance(seed, int)
