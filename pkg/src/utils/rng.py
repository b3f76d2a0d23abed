"""
카운터 기반 키 난수 스트림

동전 던지기는 (seed, u, i, j) 키만으로 결정되므로 평가 순서나
스레드 스케줄과 무관하게 재현된다. 혼합 함수는 SplitMix64 마무리 단계를
uint64 배열 연산으로 벡터화한 것이다.
"""
from typing import Union

import numpy as np

ArrayLike = Union[int, np.ndarray]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S63 = np.uint64(63)

# 스트림 구분 태그
STREAM_COIN = 0xC011
STREAM_MODEL = 0x5EED
STREAM_ORACLE = 0x0AC1
STREAM_SPLIT = 0x5917
STREAM_TRANSFORM = 0x7A4F
STREAM_FILTER = 0xF117


def _as_u64(value: ArrayLike) -> np.ndarray:
    if isinstance(value, (int, np.integer)):
        return np.atleast_1d(np.uint64(int(value) & _MASK64))
    return np.atleast_1d(np.asarray(value).astype(np.uint64))


def _mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)


def keyed_hash(seed: int, *keys: ArrayLike) -> np.ndarray:
    """seed와 키 배열(브로드캐스트)을 64비트 값으로 혼합"""
    with np.errstate(over="ignore"):
        state = _mix64(_as_u64(seed) + _GOLDEN)
        for key in keys:
            state = _mix64(state ^ (_as_u64(key) + _GOLDEN))
    return state


def coin_flips(seed: int, user: int, items_i: ArrayLike, items_j: ArrayLike) -> np.ndarray:
    """Bern(1/2) 결과 (0/1, uint8). 키 (seed, user, i, j)"""
    bits = keyed_hash(seed, STREAM_COIN, user, items_i, items_j)
    return (bits >> _S63).astype(np.uint8)


def coin_flip(seed: int, user: int, i: int, j: int) -> int:
    return int(coin_flips(seed, user, i, j)[0])


def derive_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """하위 작업용 시드 시퀀스 (numpy Generator 입력)"""
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))


def make_generator(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


def sub_seed(seed: int, *keys: int) -> int:
    """하위 구성요소에 넘길 64비트 정수 시드"""
    return int(derive_seed(seed, *keys).generate_state(1, dtype=np.uint64)[0])
