"""
Pairwise-Rank / Copeland / Multi-Rank 랭커

사용자마다 관측된 쌍은 평점 비교로, 나머지 쌍은 합의도 상위 k명의
이웃 투표로 선호 행렬 A를 채운 뒤 Copeland 점수로 전체 순위를 만든다.
"""
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.models import PreferenceMatrix, RankingCollection, SparseRatingMatrix
from ..exceptions import (
    InvalidModelConfigException,
    SameItemException,
)
from ..utils.cache import AgreementCache
from ..utils.rng import coin_flips
from .agreement import AgreementMode, AgreementRow, agreement_row

logger = logging.getLogger(__name__)

# 투표 블록 (열린 쌍 수 × 이웃 수) 원소 상한
_VOTE_BUDGET = 4_000_000
_SEED_LIMIT = 1 << 64


class VoteWeighting(str, Enum):
    """MR(uniform) / MRW(agreement_weighted)"""
    UNIFORM = "uniform"
    AGREEMENT_WEIGHTED = "agreement_weighted"


@dataclass(frozen=True)
class RankerConfig:
    """Multi-Rank 설정"""
    beta: int = 2
    k: int = 1
    vote_weighting: VoteWeighting = VoteWeighting.UNIFORM
    agreement_mode: AgreementMode = AgreementMode.ALL_PAIRS
    seed: int = 0

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        if isinstance(self.beta, bool) or not isinstance(self.beta, (int, np.integer)) or self.beta < 2:
            raise InvalidModelConfigException(f"beta must be an integer >= 2: {self.beta}", field="beta", value=self.beta)
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise InvalidModelConfigException(f"k must be an integer >= 1: {self.k}", field="k", value=self.k)
        if not 0 <= int(self.seed) < _SEED_LIMIT:
            raise InvalidModelConfigException(f"seed must fit in 64 unsigned bits: {self.seed}", field="seed", value=self.seed)
        try:
            object.__setattr__(self, "vote_weighting", VoteWeighting(self.vote_weighting))
            object.__setattr__(self, "agreement_mode", AgreementMode(self.agreement_mode))
        except ValueError as e:
            raise InvalidModelConfigException(str(e), field="mode")
        object.__setattr__(self, "beta", int(self.beta))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def label(self) -> str:
        return "MRW" if self.vote_weighting == VoteWeighting.AGREEMENT_WEIGHTED else "MR"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "k": self.k,
            "vote_weighting": self.vote_weighting.value,
            "agreement_mode": self.agreement_mode.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RankerConfig":
        return cls(**payload)


@dataclass(frozen=True)
class VoteOutcome:
    """Pairwise-Rank 결과"""
    decision: int
    was_coin_flip: bool
    vote_sum: float

    def __post_init__(self):
        if self.decision not in (0, 1):
            raise InvalidModelConfigException("decision must be 0 or 1", field="decision", value=self.decision)


@dataclass(frozen=True)
class UserRanking:
    """사용자 한 명의 선호 행렬과 순위"""
    user: int
    preference: PreferenceMatrix
    ranking: np.ndarray
    observed_pairs: int
    voted_pairs: int
    coin_flips: int


@dataclass
class MultiRankResult:
    """Multi-Rank 전체 결과와 집계 통계"""
    rankings: RankingCollection
    config: RankerConfig
    observed_pairs: List[int] = field(default_factory=list)
    voted_pairs: List[int] = field(default_factory=list)
    coin_flips: List[int] = field(default_factory=list)

    @property
    def total_coin_flips(self) -> int:
        return int(sum(self.coin_flips))

    @property
    def total_voted_pairs(self) -> int:
        return int(sum(self.voted_pairs))

    def summary(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "n_users": self.rankings.n_users,
            "n_items": self.rankings.n_items,
            "observed_pairs": int(sum(self.observed_pairs)),
            "voted_pairs": self.total_voted_pairs,
            "coin_flips": self.total_coin_flips,
        }


def preset_config(m: SparseRatingMatrix, name: str, seed: int = 0,
                  agreement_mode: AgreementMode = AgreementMode.NONOVERLAPPING) -> RankerConfig:
    """
    이론 기본값 프리셋

    p̂ = |Ω| / (n1 n2), β = max(2, ⌈p̂² n1 / 2⌉)
    thm1-continuous: k = 1, thm3-discrete: k = ⌈n2^0.3⌉
    """
    p_hat = m.density()
    beta = max(2, math.ceil(p_hat * p_hat * m.n_items / 2))
    if name == "thm1-continuous":
        k = 1
    elif name == "thm3-discrete":
        k = max(1, math.ceil(m.n_users ** 0.3))
    else:
        raise InvalidModelConfigException(f"Unknown preset: {name}", field="preset", value=name)
    logger.debug(f"Preset {name}: p_hat={p_hat:.4f}, beta={beta}, k={k}")
    return RankerConfig(beta=beta, k=k, agreement_mode=agreement_mode, seed=seed)


def copeland(a: PreferenceMatrix) -> np.ndarray:
    """
    Copeland 순위

    점수 I_j = Σ_{i≠j} A[j][i]. 점수 내림차순, 동점은 작은 인덱스가 높은 순위.
    반환값은 아이템별 순위 값 (1..n1, 클수록 선호).
    """
    if not isinstance(a, PreferenceMatrix):
        a = PreferenceMatrix(np.asarray(a))
    scores = a.scores()
    n = a.n_items
    order = np.lexsort((np.arange(n), -scores))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = n - np.arange(n)
    return ranks


def copeland_bits(bits: np.ndarray) -> np.ndarray:
    """원시 0/1 배열에 대한 copeland (반대칭 위반 시 MalformedPreferenceMatrix)"""
    return copeland(PreferenceMatrix(np.asarray(bits, dtype=np.int8)))


def _ranked_neighbors(row: AgreementRow, u: int, beta: int) -> np.ndarray:
    """|N(u,v)| ≥ β 인 v ≠ u 를 (R 내림차순, 인덱스 오름차순)으로 정렬"""
    eligible = row.common_counts >= beta
    eligible[u] = False
    candidates = np.flatnonzero(eligible)
    order = np.lexsort((candidates, -row.values[candidates]))
    return candidates[order]


def _sequential_sum(start: np.ndarray, terms: np.ndarray) -> np.ndarray:
    """행마다 start + terms[:,0] + terms[:,1] + ... 를 왼쪽부터 누적 (cumsum은 순차 합산)"""
    stacked = np.concatenate([start[:, None], terms], axis=1)
    return np.cumsum(stacked, axis=1)[:, -1]


def _decide(vote_sum: float) -> Optional[int]:
    if vote_sum > 0:
        return 1
    if vote_sum < 0:
        return 0
    return None


def pairwise_rank(m: SparseRatingMatrix, u: int, i: int, j: int, cfg: RankerConfig,
                  cache: Optional[AgreementCache] = None) -> VoteOutcome:
    """
    Pairwise-Rank: u에 대해 i가 j보다 선호되는지 이웃 투표로 추정

    V = W_u^{i,j}(β) 중 R_{u,v} 상위 k명 (|W| < k면 전체).
    투표 합이 0이거나 V가 비면 (seed, u, i, j) 키 동전을 사용한다.
    """
    if i == j:
        raise SameItemException(i)
    lo, hi = (i, j) if i < j else (j, i)
    row = agreement_row(m, u, cfg.agreement_mode, cache)
    dense = m.to_dense()
    ranked = _ranked_neighbors(row, u, cfg.beta)
    both = ~np.isnan(dense[lo, ranked]) & ~np.isnan(dense[hi, ranked])
    voters = ranked[both][: cfg.k]

    signs = np.sign(dense[lo, voters] - dense[hi, voters])
    if cfg.vote_weighting == VoteWeighting.AGREEMENT_WEIGHTED:
        signs = signs * row.values[voters]
    vote_sum = float(_sequential_sum(np.zeros(1), signs[None, :])[0])

    decision = _decide(vote_sum)
    was_coin_flip = decision is None
    if was_coin_flip:
        decision = int(coin_flips(cfg.seed, u, lo, hi)[0])
    if lo != i:
        decision = 1 - decision
        vote_sum = -vote_sum
    return VoteOutcome(decision=decision, was_coin_flip=was_coin_flip, vote_sum=vote_sum + 0.0)


class MultiRank:
    """Multi-Rank / Multi-Rank-Weighted 추정기"""

    def __init__(self, config: RankerConfig, cache: Optional[AgreementCache] = None):
        self.config = config
        self.cache = cache
        self.logger = logging.getLogger(__name__)

    def _observed_decisions(self, m: SparseRatingMatrix, u: int) -> Tuple[np.ndarray, np.ndarray]:
        """관측된 서로 다른 평점 쌍은 직접 결정, 나머지(need) 마스크 반환"""
        n = m.n_items
        column = np.full(n, np.nan)
        column[m.rated_items(u)] = m.user_ratings(u)
        bits = np.zeros((n, n), dtype=np.int8)
        with np.errstate(invalid="ignore"):
            bits[column[:, None] > column[None, :]] = 1
            decided = (column[:, None] != column[None, :]) & ~np.isnan(column[:, None]) & ~np.isnan(column[None, :])
        return bits, decided

    def _vote(self, m: SparseRatingMatrix, u: int, pi: np.ndarray, pj: np.ndarray,
              row: AgreementRow) -> Tuple[np.ndarray, np.ndarray]:
        """열린 쌍 (pi, pj)마다 상위 k 이웃 투표 합과 투표 수"""
        cfg = self.config
        dense = m.to_dense()
        observed = ~np.isnan(dense)
        ranked = _ranked_neighbors(row, u, cfg.beta)
        weighted = cfg.vote_weighting == VoteWeighting.AGREEMENT_WEIGHTED

        vote_sums = np.zeros(len(pi), dtype=np.float64)
        counts = np.zeros(len(pi), dtype=np.int64)
        active = np.arange(len(pi))
        start = 0
        while start < len(ranked) and len(active) > 0:
            width = max(1, _VOTE_BUDGET // len(active))
            block = ranked[start:start + width]
            start += len(block)
            ai, aj = pi[active], pj[active]
            both = observed[np.ix_(ai, block)] & observed[np.ix_(aj, block)]
            # 블록 안에서 이웃 순서대로 남은 자리(k - counts)만큼 수용
            taken = counts[active, None] + np.cumsum(both, axis=1)
            accepted = both & (taken <= cfg.k)
            with np.errstate(invalid="ignore"):
                signs = np.sign(dense[np.ix_(ai, block)] - dense[np.ix_(aj, block)])
            signs = np.where(accepted, signs, 0.0)
            if weighted:
                signs = signs * row.values[block][None, :]
            vote_sums[active] = _sequential_sum(vote_sums[active], signs)
            counts[active] += accepted.sum(axis=1)
            active = active[counts[active] < cfg.k]
        return vote_sums, counts

    def rank_user(self, m: SparseRatingMatrix, u: int) -> UserRanking:
        """사용자 u의 선호 행렬 A_u 와 Copeland 순위"""
        cfg = self.config
        n = m.n_items
        bits, decided = self._observed_decisions(m, u)
        upper_i, upper_j = np.triu_indices(n, k=1)
        need = ~decided[upper_i, upper_j]
        pi, pj = upper_i[need], upper_j[need]
        observed_pairs = int(len(upper_i) - len(pi))

        n_coins = 0
        if len(pi) > 0:
            row = agreement_row(m, u, cfg.agreement_mode, self.cache)
            vote_sums, _ = self._vote(m, u, pi, pj, row)
            decision = (vote_sums > 0).astype(np.int8)
            tie = vote_sums == 0
            if np.any(tie):
                decision[tie] = coin_flips(cfg.seed, u, pi[tie], pj[tie]).astype(np.int8)
            n_coins = int(np.count_nonzero(tie))
            bits[pi, pj] = decision
            bits[pj, pi] = 1 - decision
            if n_coins:
                self.logger.debug(f"User {u}: {n_coins} of {len(pi)} voted pairs decided by coin")

        np.fill_diagonal(bits, 0)
        preference = PreferenceMatrix(bits)
        return UserRanking(
            user=u,
            preference=preference,
            ranking=copeland(preference),
            observed_pairs=observed_pairs,
            voted_pairs=int(len(pi)),
            coin_flips=n_coins,
        )

    def fit(self, m: SparseRatingMatrix, executor: Optional[Executor] = None) -> MultiRankResult:
        """모든 사용자 순위 계산. executor가 있으면 사용자 단위로 병렬 처리 (결과 순서는 사용자 순)"""
        self.logger.info(
            f"Multi-Rank ({self.config.label}) on {m.n_items} items x {m.n_users} users, "
            f"beta={self.config.beta}, k={self.config.k}"
        )
        users = range(m.n_users)
        if executor is None:
            per_user = [self.rank_user(m, u) for u in users]
        else:
            per_user = list(executor.map(lambda u: self.rank_user(m, u), users))

        rankings = RankingCollection(np.stack([r.ranking for r in per_user]))
        result = MultiRankResult(
            rankings=rankings,
            config=self.config,
            observed_pairs=[r.observed_pairs for r in per_user],
            voted_pairs=[r.voted_pairs for r in per_user],
            coin_flips=[r.coin_flips for r in per_user],
        )
        self.logger.info(
            f"Multi-Rank done: {result.total_voted_pairs} voted pairs, {result.total_coin_flips} coin flips"
        )
        return result


def multi_rank(m: SparseRatingMatrix, cfg: RankerConfig, executor: Optional[Executor] = None,
               cache: Optional[AgreementCache] = None) -> RankingCollection:
    """Multi-Rank 순위 모음"""
    return MultiRank(cfg, cache).fit(m, executor).rankings


__all__ = [
    "VoteWeighting",
    "RankerConfig",
    "VoteOutcome",
    "UserRanking",
    "MultiRankResult",
    "MultiRank",
    "copeland",
    "copeland_bits",
    "multi_rank",
    "pairwise_rank",
    "preset_config",
]
