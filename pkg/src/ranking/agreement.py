"""
사용자 간 합의도 통계

N(u,v) 공통 아이템, 비중첩 쌍 I(u,v), 합의도 R_{u,v}, 후보 이웃 W_u^{i,j}(β).
합의 지표는 평점 차이의 부호에만 의존하므로 사용자별 단조 변환에 불변이다.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..core.models import SparseRatingMatrix
from ..exceptions import SameItemException, SameUserException, ValidationException
from ..utils.cache import AgreementCache

logger = logging.getLogger(__name__)

# 한 번에 만드는 쌍 인덱스 배열의 최대 길이
_PAIR_BUDGET = 4_000_000


class AgreementMode(str, Enum):
    """R_{u,v} 계산 방식"""
    NONOVERLAPPING = "nonoverlapping"
    ALL_PAIRS = "all_pairs"


@dataclass(frozen=True)
class AgreementStat:
    """합의도 R_{u,v} 모델"""
    value: float
    pair_count: int
    mode: AgreementMode

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        if not 0.0 <= self.value <= 1.0:
            raise ValidationException(f"Agreement must be in [0, 1]: {self.value}", field="value", value=self.value)
        if self.pair_count < 0:
            raise ValidationException("pair_count must be non-negative", field="pair_count", value=self.pair_count)
        if self.pair_count == 0 and self.value != 0.0:
            raise ValidationException("Agreement over zero pairs must be 0", field="value", value=self.value)
        agreements = self.value * self.pair_count
        if abs(agreements - round(agreements)) > 1e-6 * max(1, self.pair_count):
            raise ValidationException("value * pair_count must be an integer count", field="value", value=self.value)

    @property
    def agreements(self) -> int:
        return int(round(self.value * self.pair_count))

    @classmethod
    def from_counts(cls, agreements: int, pair_count: int, mode: AgreementMode) -> "AgreementStat":
        value = agreements / pair_count if pair_count > 0 else 0.0
        return cls(value=value, pair_count=int(pair_count), mode=AgreementMode(mode))


@dataclass(frozen=True)
class AgreementRow:
    """사용자 u와 모든 사용자 v의 합의도 (index u는 자기 자신)"""
    user: int
    mode: AgreementMode
    values: np.ndarray
    common_counts: np.ndarray
    pair_counts: np.ndarray

    def stat(self, v: int) -> AgreementStat:
        return AgreementStat(float(self.values[v]), int(self.pair_counts[v]), self.mode)


def _check_distinct_users(u: int, v: int) -> None:
    if u == v:
        raise SameUserException(u)


def common_items(m: SparseRatingMatrix, u: int, v: int) -> List[int]:
    """N(u,v) = N(u) ∩ N(v), 오름차순"""
    _check_distinct_users(u, v)
    shared = np.intersect1d(m.rated_items(u), m.rated_items(v), assume_unique=True)
    return [int(i) for i in shared]


def nonoverlap_pairs(common: List[int]) -> List[Tuple[int, int]]:
    """정렬된 공통 아이템에서 (0,1), (2,3), ... 쌍 선택. 홀수 꼬리는 버림"""
    half = len(common) // 2
    return [(common[2 * l], common[2 * l + 1]) for l in range(half)]


def _discordant_pairs(x: np.ndarray, y: np.ndarray) -> int:
    """두 평점 벡터의 모든 쌍 중 부호가 반대인 쌍의 수 (블록 단위)"""
    n = len(x)
    if n < 2:
        return 0
    block = max(1, _PAIR_BUDGET // n)
    discordant = 0
    columns = np.arange(n)
    for start in range(0, n, block):
        stop = min(n, start + block)
        rows = np.arange(start, stop)
        sx = np.sign(x[None, :] - x[start:stop, None])
        sy = np.sign(y[None, :] - y[start:stop, None])
        upper = columns[None, :] > rows[:, None]
        discordant += int(np.count_nonzero((sx * sy < 0) & upper))
    return discordant


def _aligned_ratings(m: SparseRatingMatrix, u: int, shared: np.ndarray) -> np.ndarray:
    items = m.rated_items(u)
    return m.user_ratings(u)[np.searchsorted(items, shared)]


def agreement_stat(m: SparseRatingMatrix, u: int, v: int,
                   mode: AgreementMode = AgreementMode.ALL_PAIRS) -> AgreementStat:
    """R_{u,v}: 선택된 쌍 중 평점 차이 곱이 0 이상인 비율 (쌍이 없으면 0)"""
    _check_distinct_users(u, v)
    mode = AgreementMode(mode)
    shared = np.intersect1d(m.rated_items(u), m.rated_items(v), assume_unique=True)
    hu = _aligned_ratings(m, u, shared)
    hv = _aligned_ratings(m, v, shared)

    if mode == AgreementMode.NONOVERLAPPING:
        half = len(shared) // 2
        du = np.sign(hu[0:2 * half:2] - hu[1:2 * half:2])
        dv = np.sign(hv[0:2 * half:2] - hv[1:2 * half:2])
        agreements = int(np.count_nonzero(du * dv >= 0))
        return AgreementStat.from_counts(agreements, half, mode)

    c = len(shared)
    pair_count = c * (c - 1) // 2
    agreements = pair_count - _discordant_pairs(hu, hv)
    return AgreementStat.from_counts(agreements, pair_count, mode)


def _segment_pairs(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """연속 구간(길이 counts)마다 구간 내 모든 (앞, 뒤) 위치 쌍"""
    n = int(counts.sum())
    starts = np.cumsum(counts) - counts
    segment = np.repeat(np.arange(len(counts)), counts)
    position = np.arange(n) - starts[segment]
    reps = counts[segment] - position - 1
    first = np.repeat(np.arange(n), reps)
    rep_starts = np.cumsum(reps) - reps
    offset = np.arange(int(reps.sum())) - np.repeat(rep_starts, reps)
    return first, first + 1 + offset


def _row_all_pairs(hu: np.ndarray, sub: np.ndarray, observed: np.ndarray,
                   counts: np.ndarray, pair_counts: np.ndarray) -> np.ndarray:
    n_users = sub.shape[0]
    discordant = np.zeros(n_users, dtype=np.int64)
    v_start = 0
    while v_start < n_users:
        if pair_counts[v_start] > _PAIR_BUDGET:
            rows = observed[v_start]
            discordant[v_start] = _discordant_pairs(hu[rows], sub[v_start, rows])
            v_start += 1
            continue
        cumulative = np.cumsum(pair_counts[v_start:])
        v_end = v_start + max(1, int(np.searchsorted(cumulative, _PAIR_BUDGET, side="right")))
        block_obs = observed[v_start:v_end]
        flat = np.flatnonzero(block_obs)
        width = block_obs.shape[1]
        local = flat % width
        owner = flat // width
        values = sub[v_start:v_end][block_obs]
        first, second = _segment_pairs(counts[v_start:v_end])
        su = np.sign(hu[local[first]] - hu[local[second]])
        sv = np.sign(values[first] - values[second])
        discordant[v_start:v_end] += np.bincount(
            owner[first], weights=(su * sv < 0), minlength=v_end - v_start
        ).astype(np.int64)
        v_start = v_end
    return pair_counts - discordant


def _row_nonoverlapping(hu: np.ndarray, sub: np.ndarray, observed: np.ndarray,
                        counts: np.ndarray) -> np.ndarray:
    n_users, width = observed.shape
    flat = np.flatnonzero(observed)
    local = flat % width
    owner = flat // width
    values = sub[observed]
    starts = np.cumsum(counts) - counts
    position = np.arange(len(flat)) - starts[owner]
    first = np.flatnonzero((position % 2 == 0) & (position + 1 < counts[owner]))
    second = first + 1
    su = np.sign(hu[local[first]] - hu[local[second]])
    sv = np.sign(values[first] - values[second])
    return np.bincount(owner[first], weights=(su * sv >= 0), minlength=n_users).astype(np.int64)


def compute_agreement_row(m: SparseRatingMatrix, u: int,
                          mode: AgreementMode = AgreementMode.ALL_PAIRS) -> AgreementRow:
    """R_{u,v}, |N(u,v)|를 모든 v에 대해 한 번에 계산 (agreement_stat과 정확히 일치)"""
    mode = AgreementMode(mode)
    items_u = m.rated_items(u)
    hu = m.user_ratings(u)
    sub = np.ascontiguousarray(m.to_dense()[items_u, :].T)
    observed = ~np.isnan(sub)
    counts = observed.sum(axis=1).astype(np.int64)

    if mode == AgreementMode.NONOVERLAPPING:
        pair_counts = counts // 2
        agreements = _row_nonoverlapping(hu, sub, observed, counts)
    else:
        pair_counts = counts * (counts - 1) // 2
        agreements = _row_all_pairs(hu, sub, observed, counts, pair_counts)

    values = np.zeros(m.n_users, dtype=np.float64)
    nonzero = pair_counts > 0
    values[nonzero] = agreements[nonzero] / pair_counts[nonzero]
    for array in (values, counts, pair_counts):
        array.setflags(write=False)
    return AgreementRow(user=u, mode=mode, values=values, common_counts=counts, pair_counts=pair_counts)


def agreement_row(m: SparseRatingMatrix, u: int,
                  mode: AgreementMode = AgreementMode.ALL_PAIRS,
                  cache: Optional[AgreementCache] = None) -> AgreementRow:
    """캐시를 거치는 compute_agreement_row"""
    mode = AgreementMode(mode)
    if cache is None:
        return compute_agreement_row(m, u, mode)
    key = AgreementCache.row_key(m.fingerprint(), mode.value, u)
    return cache.get_or_compute(key, lambda: compute_agreement_row(m, u, mode))


def neighbor_set(m: SparseRatingMatrix, u: int, i: int, j: int, beta: int) -> List[int]:
    """W_u^{i,j}(β): |N(u,v)| ≥ β 이고 i, j를 모두 평가한 v ≠ u (오름차순)"""
    if i == j:
        raise SameItemException(i)
    if beta < 2:
        raise ValidationException(f"beta must be >= 2: {beta}", field="beta", value=beta)
    dense = m.to_dense()
    observed = ~np.isnan(dense)
    common = observed[m.rated_items(u), :].sum(axis=0)
    eligible = (common >= beta) & observed[i, :] & observed[j, :]
    eligible[u] = False
    return [int(v) for v in np.flatnonzero(eligible)]
