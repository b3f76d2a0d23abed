"""
TDD 테스트: 합의도 캐시 테스트
"""
from unittest.mock import MagicMock

import pytest
from src.utils.cache import AgreementCache


class TestAgreementCache:
    """LRU 캐시 테스트"""

    @pytest.fixture
    def cache(self):
        return AgreementCache(max_entries=2)

    def test_set_and_get(self, cache):
        cache.set("a", 1)

        assert cache.get("a") == 1
        assert cache.exists("a")
        assert cache.get("missing") is None

    def test_lru_eviction(self, cache):
        """가장 오래 사용하지 않은 항목 제거"""
        cache.set("a", 1)
        cache.set("b", 2)
        cache.get("a")
        cache.set("c", 3)

        assert cache.exists("a")
        assert not cache.exists("b")
        assert cache.exists("c")

    def test_get_or_compute_calls_once(self, cache):
        compute = MagicMock(return_value="row")

        assert cache.get_or_compute("k", compute) == "row"
        assert cache.get_or_compute("k", compute) == "row"
        compute.assert_called_once()

    def test_delete(self, cache):
        cache.set("a", 1)
        assert cache.delete("a")
        assert not cache.delete("a")

    def test_clear_pattern(self):
        cache = AgreementCache()
        cache.set(AgreementCache.row_key("abc", "all_pairs", 0), 1)
        cache.set(AgreementCache.row_key("abc", "all_pairs", 1), 2)
        cache.set(AgreementCache.row_key("def", "all_pairs", 0), 3)

        assert cache.clear_pattern("agreement:abc:*") == 2
        assert cache.get_cache_info()["cache_size"] == 1

    def test_cache_info_and_clear(self, cache):
        cache.set("a", 1)
        cache.get("a")
        cache.get("b")
        info = cache.get_cache_info()

        assert info["hits"] == 1
        assert info["misses"] == 1
        assert info["max_entries"] == 2

        cache.clear()
        assert cache.get_cache_info() == {
            "cache_type": "local", "cache_size": 0, "max_entries": 2, "hits": 0, "misses": 0,
        }
