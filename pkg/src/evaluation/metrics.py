"""
랭킹 지표: Kendall tau, Spearman rho, NDCG@k, Precision@k

σ_u는 아이템별 순위 값 배열(클수록 선호), truth는 (item, rating) 목록이다.
지표는 사용자별 테스트 아이템에서 계산한 뒤 사용자 평균(macro)을 낸다.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..core.models import RankingCollection, SparseRatingMatrix
from ..exceptions import (
    ConstantTruthException,
    InsufficientItemsException,
    InsufficientPairsException,
    MetricException,
    ShapeMismatchException,
    ValidationException,
)

logger = logging.getLogger(__name__)

Truth = Union[Sequence[Tuple[int, float]], Tuple[np.ndarray, np.ndarray]]

METRICS = ("kendall_tau", "spearman_rho", "ndcg_at_k", "precision_at_k")

DEFAULT_K = 5
DEFAULT_RELEVANCE_THRESHOLD = 5.0


def _truth_arrays(sigma: np.ndarray, truth: Truth) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(items, ratings, 예측 순위 값)"""
    if isinstance(truth, tuple) and len(truth) == 2 and isinstance(truth[0], np.ndarray):
        items = np.asarray(truth[0], dtype=np.int64)
        ratings = np.asarray(truth[1], dtype=np.float64)
    else:
        pairs = list(truth)
        items = np.array([int(i) for i, _ in pairs], dtype=np.int64)
        ratings = np.array([float(r) for _, r in pairs], dtype=np.float64)
    if len(items) != len(ratings):
        raise ShapeMismatchException("items and ratings differ in length", expected=(len(items),), actual=(len(ratings),))
    if len(np.unique(items)) != len(items):
        raise ValidationException("truth lists an item more than once", field="truth")
    sigma = np.asarray(sigma)
    if len(items) and (items.min() < 0 or items.max() >= len(sigma)):
        raise ValidationException("truth item outside ranking", field="truth")
    return items, ratings, sigma[items].astype(np.float64)


def _top_k(predicted: np.ndarray, k: int) -> np.ndarray:
    """예측 순위 값 내림차순 상위 k개 위치"""
    return np.argsort(-predicted, kind="stable")[:k]


def kendall_tau(sigma: np.ndarray, truth: Truth) -> float:
    """
    Kendall tau: (일치 − 불일치) / (정답 평점이 다른 쌍의 수)

    정답 평점이 같은 쌍은 제외 (tau-b 아님).
    """
    _, ratings, predicted = _truth_arrays(sigma, truth)
    if len(ratings) < 2:
        raise InsufficientPairsException("kendall_tau needs at least 2 test items", metric="kendall_tau")
    iu, ju = np.triu_indices(len(ratings), k=1)
    true_sign = np.sign(ratings[iu] - ratings[ju])
    pred_sign = np.sign(predicted[iu] - predicted[ju])
    valid = true_sign != 0
    total = int(np.count_nonzero(valid))
    if total == 0:
        raise InsufficientPairsException("no test pair with distinct ratings", metric="kendall_tau")
    product = true_sign[valid] * pred_sign[valid]
    concordant = int(np.count_nonzero(product > 0))
    discordant = int(np.count_nonzero(product < 0))
    return (concordant - discordant) / total


def spearman_rho(sigma: np.ndarray, truth: Truth) -> float:
    """Spearman rho (정답 동점은 평균 순위)"""
    _, ratings, predicted = _truth_arrays(sigma, truth)
    if len(ratings) < 2:
        raise InsufficientPairsException("spearman_rho needs at least 2 test items", metric="spearman_rho")
    if np.all(ratings == ratings[0]):
        raise ConstantTruthException("all test ratings are equal", metric="spearman_rho")
    rho = stats.spearmanr(predicted, ratings)[0]
    return float(np.clip(rho, -1.0, 1.0))


def ndcg_at_k(sigma: np.ndarray, truth: Truth, k: int = DEFAULT_K) -> float:
    """
    NDCG@k, 이득 = 평점 (선형), 할인 = 1/log2(pos+1)

    음수 평점이 있으면 최소값이 0이 되도록 이동한다. 이상 DCG가 0이면 1.0.
    """
    _, ratings, predicted = _truth_arrays(sigma, truth)
    if len(ratings) == 0:
        raise InsufficientItemsException("ndcg_at_k needs a nonempty truth", metric="ndcg_at_k")
    if k < 1:
        raise ValidationException("k must be >= 1", field="k", value=k)
    gains = ratings - min(0.0, float(ratings.min()))
    cutoff = min(k, len(gains))
    discounts = 1.0 / np.log2(np.arange(2, cutoff + 2))
    dcg = float(np.sum(gains[_top_k(predicted, cutoff)] * discounts))
    ideal = float(np.sum(np.sort(gains)[::-1][:cutoff] * discounts))
    if ideal == 0.0:
        return 1.0
    return min(1.0, dcg / ideal)


def precision_at_k(sigma: np.ndarray, truth: Truth, k: int = DEFAULT_K,
                   relevance_threshold: float = DEFAULT_RELEVANCE_THRESHOLD) -> float:
    """상위 k 예측 중 정답 평점 ≥ threshold 비율"""
    _, ratings, predicted = _truth_arrays(sigma, truth)
    if k < 1:
        raise ValidationException("k must be >= 1", field="k", value=k)
    if len(ratings) < k:
        raise InsufficientItemsException(
            f"precision_at_k needs at least {k} test items, got {len(ratings)}", metric="precision_at_k"
        )
    top = _top_k(predicted, k)
    return float(np.count_nonzero(ratings[top] >= relevance_threshold)) / k


@dataclass
class MetricReport:
    """사용자별 지표 값과 평균/표준편차 (ddof=0)"""
    k: int
    relevance_threshold: float
    users_evaluated: int
    per_user: Dict[str, Dict[int, float]] = field(default_factory=lambda: {name: {} for name in METRICS})

    def values(self, metric: str) -> np.ndarray:
        by_user = self.per_user[metric]
        return np.array([by_user[u] for u in sorted(by_user)], dtype=np.float64)

    def mean(self, metric: str) -> float:
        values = self.values(metric)
        return float(values.mean()) if len(values) else float("nan")

    def std(self, metric: str) -> float:
        values = self.values(metric)
        return float(values.std()) if len(values) else float("nan")

    def count(self, metric: str) -> int:
        return len(self.per_user[metric])

    def summary(self) -> Dict[str, Dict[str, Any]]:
        return {
            name: {"mean": self.mean(name), "std": self.std(name), "users": self.count(name)}
            for name in METRICS
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "relevance_threshold": self.relevance_threshold,
            "gain": "linear",
            "users_evaluated": self.users_evaluated,
            "metrics": self.summary(),
        }

    def to_rows(self, **labels: Any) -> List[Dict[str, Any]]:
        """CSV 행 (dataset, algorithm, beta, k, seed 등 라벨 포함)"""
        rows = []
        for name in METRICS:
            row = dict(labels)
            row.update({"metric": name, "mean": self.mean(name), "std": self.std(name), "users": self.count(name)})
            rows.append(row)
        return rows


def evaluate_rankings(rankings: RankingCollection, test: SparseRatingMatrix, k: int = DEFAULT_K,
                      relevance_threshold: float = DEFAULT_RELEVANCE_THRESHOLD) -> MetricReport:
    """테스트 평점이 있는 사용자마다 지표 계산. 계산 불가 지표는 그 사용자에서 제외"""
    if rankings.n_users != test.n_users or rankings.n_items != test.n_items:
        raise ShapeMismatchException(
            "rankings and test matrix disagree in shape",
            expected=(test.n_users, test.n_items),
            actual=(rankings.n_users, rankings.n_items),
        )
    report = MetricReport(k=k, relevance_threshold=relevance_threshold, users_evaluated=0)
    metric_functions = {
        "kendall_tau": lambda s, t: kendall_tau(s, t),
        "spearman_rho": lambda s, t: spearman_rho(s, t),
        "ndcg_at_k": lambda s, t: ndcg_at_k(s, t, k),
        "precision_at_k": lambda s, t: precision_at_k(s, t, k, relevance_threshold),
    }
    skipped = {name: 0 for name in METRICS}
    for u in range(test.n_users):
        items = test.rated_items(u)
        if len(items) == 0:
            continue
        report.users_evaluated += 1
        truth = (np.asarray(items), np.asarray(test.user_ratings(u)))
        sigma = rankings.ranking(u)
        for name, function in metric_functions.items():
            try:
                report.per_user[name][u] = function(sigma, truth)
            except MetricException:
                skipped[name] += 1

    logger.debug(f"Evaluated {report.users_evaluated} users, skipped per metric: {skipped}")
    return report
