"""
합의도(agreement) 행 캐시 매니저

같은 학습 행렬에 대해 여러 그리드 포인트가 R_{u,·} 행을 재사용한다.
"""
import fnmatch
import logging
import threading
from collections import OrderedDict
from typing import Any, Callable, Dict, Optional


class AgreementCache:
    """스레드 안전 LRU 캐시"""

    def __init__(self, max_entries: int = 8192):
        self.max_entries = max_entries
        self.logger = logging.getLogger(__name__)
        self._local_cache: "OrderedDict[str, Any]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def row_key(fingerprint: str, mode: str, user: int) -> str:
        return f"agreement:{fingerprint}:{mode}:{user}"

    def get(self, key: str) -> Optional[Any]:
        """캐시에서 데이터 조회"""
        with self._lock:
            value = self._local_cache.get(key)
            if value is None:
                self.misses += 1
                return None
            self._local_cache.move_to_end(key)
            self.hits += 1
            return value

    def set(self, key: str, value: Any) -> bool:
        """캐시에 데이터 저장"""
        with self._lock:
            self._local_cache[key] = value
            self._local_cache.move_to_end(key)
            # 크기 제한 초과 시 가장 오래된 항목 제거
            while len(self._local_cache) > self.max_entries:
                self._local_cache.popitem(last=False)
        return True

    def get_or_compute(self, key: str, compute: Callable[[], Any]) -> Any:
        """없으면 계산 후 저장. 동시 계산은 같은 값을 내므로 잠금 밖에서 수행"""
        value = self.get(key)
        if value is not None:
            return value
        value = compute()
        self.set(key, value)
        return value

    def delete(self, key: str) -> bool:
        """캐시에서 데이터 삭제"""
        with self._lock:
            if key in self._local_cache:
                del self._local_cache[key]
                return True
            return False

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._local_cache

    def clear_pattern(self, pattern: str) -> int:
        """패턴에 맞는 캐시 키들 삭제"""
        with self._lock:
            keys_to_delete = [key for key in self._local_cache if fnmatch.fnmatch(key, pattern)]
            for key in keys_to_delete:
                del self._local_cache[key]
        if keys_to_delete:
            self.logger.debug(f"Cleared {len(keys_to_delete)} cache keys matching pattern: {pattern}")
        return len(keys_to_delete)

    def clear(self) -> None:
        with self._lock:
            self._local_cache.clear()
            self.hits = 0
            self.misses = 0

    def get_cache_info(self) -> Dict[str, Any]:
        """캐시 정보 반환"""
        with self._lock:
            return {
                "cache_type": "local",
                "cache_size": len(self._local_cache),
                "max_entries": self.max_entries,
                "hits": self.hits,
                "misses": self.misses,
            }
