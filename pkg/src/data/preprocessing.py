"""
실험 전처리 프로토콜

인기도 필터, 40/15/45 재표본 분할과 사용자 활동 임계값, 양자화,
사용자별 무작위 단조 변환 r ↦ a·r − b
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.models import SparseRatingMatrix
from ..exceptions import InvalidModelConfigException, NotEnoughQualifyingUsersException, ValidationException
from ..utils.rng import STREAM_FILTER, STREAM_SPLIT, STREAM_TRANSFORM, make_generator
from .loaders import RatingDataset, RatingTriples, natural_key

logger = logging.getLogger(__name__)

# 부동소수 분수 × n 의 내림 보정
_FLOOR_SLACK = 1e-9


@dataclass
class SplitSpec:
    """재표본 분할 설정"""
    train_frac: float = 0.40
    val_frac: float = 0.15
    test_frac: float = 0.45
    min_train_ratings: int = 0
    min_val_ratings: int = 0
    min_test_ratings: int = 0
    n_resamples: int = 5
    seed: int = 0

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        fractions = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 or f > 1 for f in fractions):
            raise InvalidModelConfigException("split fractions must lie in [0, 1]", field="split")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise InvalidModelConfigException(f"split fractions must sum to 1, got {sum(fractions)}", field="split")
        for name in ("min_train_ratings", "min_val_ratings", "min_test_ratings"):
            if getattr(self, name) < 0:
                raise InvalidModelConfigException(f"{name} must be >= 0", field=name, value=getattr(self, name))
        if self.n_resamples < 1:
            raise InvalidModelConfigException("n_resamples must be >= 1", field="n_resamples", value=self.n_resamples)

    @classmethod
    def netflix(cls, **overrides: Any) -> "SplitSpec":
        return cls(**{"min_train_ratings": 50, "min_val_ratings": 10, "min_test_ratings": 10, **overrides})

    @classmethod
    def movielens(cls, **overrides: Any) -> "SplitSpec":
        return cls(**{"min_train_ratings": 100, "min_val_ratings": 50, "min_test_ratings": 50, **overrides})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MonotoneTransformSpec:
    """사용자별 a ∈ a_choices, b ∈ {0, ..., a−1}"""
    a_choices: Tuple[int, ...] = (1, 2, 10, 20)
    seed: int = 0

    def __post_init__(self):
        self.a_choices = tuple(int(a) for a in self.a_choices)
        if not self.a_choices or min(self.a_choices) < 1:
            raise InvalidModelConfigException("a_choices must be nonempty positive integers", field="a_choices")

    def to_dict(self) -> Dict[str, Any]:
        return {"a_choices": list(self.a_choices), "seed": self.seed}


@dataclass(frozen=True, eq=False)
class DataSplit:
    """재표본 하나의 train/val/test (남은 사용자만 0..n−1로 재색인)"""
    resample: int
    users: np.ndarray
    train_positions: np.ndarray
    val_positions: np.ndarray
    test_positions: np.ndarray
    train: SparseRatingMatrix
    val: SparseRatingMatrix
    test: SparseRatingMatrix
    dropped_users: int = 0

    @property
    def n_users(self) -> int:
        return len(self.users)

    def manifest(self) -> Dict[str, Any]:
        """재현용 JSON 매니페스트 (원본 행렬 entries() 위치)"""
        return {
            "resample": self.resample,
            "users": self.users.tolist(),
            "train": self.train_positions.tolist(),
            "val": self.val_positions.tolist(),
            "test": self.test_positions.tolist(),
            "dropped_users": self.dropped_users,
        }

    @classmethod
    def from_positions(cls, source: SparseRatingMatrix, resample: int, users: np.ndarray,
                       train: np.ndarray, val: np.ndarray, test: np.ndarray,
                       dropped_users: int = 0) -> "DataSplit":
        users = np.asarray(users, dtype=np.int64)
        parts = [np.sort(np.asarray(p, dtype=np.int64)) for p in (train, val, test)]
        return cls(
            resample=resample,
            users=users,
            train_positions=parts[0],
            val_positions=parts[1],
            test_positions=parts[2],
            train=source.select_entries(parts[0], users=users),
            val=source.select_entries(parts[1], users=users),
            test=source.select_entries(parts[2], users=users),
            dropped_users=dropped_users,
        )

    @classmethod
    def from_manifest(cls, source: SparseRatingMatrix, manifest: Dict[str, Any]) -> "DataSplit":
        return cls.from_positions(
            source,
            int(manifest["resample"]),
            np.asarray(manifest["users"], dtype=np.int64),
            manifest["train"],
            manifest["val"],
            manifest["test"],
            int(manifest.get("dropped_users", 0)),
        )

    def with_source(self, source: SparseRatingMatrix) -> "DataSplit":
        """같은 위치/사용자로 다른 평점 값(같은 Ω)의 행렬을 사용"""
        return DataSplit.from_positions(
            source, self.resample, self.users,
            self.train_positions, self.val_positions, self.test_positions, self.dropped_users,
        )


def _as_matrix(data: Union[SparseRatingMatrix, RatingDataset]) -> SparseRatingMatrix:
    return data.matrix if isinstance(data, RatingDataset) else data


def popularity_filter(triples: RatingTriples, top_items: int, n_users: Optional[int],
                      min_user_ratings: int, seed: int = 0) -> RatingTriples:
    """
    인기 아이템 상위 top_items (평점 수 내림차순, 동률은 ID 순)만 남기고
    그 아이템을 min_user_ratings개 이상 평가한 사용자 중 n_users명을 균등 추출

    Raises:
        NotEnoughQualifyingUsersException: 조건을 만족하는 사용자가 n_users보다 적을 때
    """
    if top_items < 1:
        raise ValidationException("top_items must be positive", field="top_items", value=top_items)
    if n_users is not None and n_users < 1:
        raise ValidationException("n_users must be positive", field="n_users", value=n_users)
    frame = triples.frame

    counts = frame.groupby("item").size()
    ranked = sorted(counts.items(), key=lambda entry: (-entry[1], natural_key(entry[0])))
    kept_items = {item for item, _ in ranked[:top_items]}
    filtered = frame[frame["item"].isin(kept_items)]

    per_user = filtered.groupby("user").size().reindex(frame["user"].unique(), fill_value=0)
    qualifying = sorted((u for u, c in per_user.items() if c >= min_user_ratings), key=natural_key)
    if n_users is None:
        chosen = qualifying
    else:
        if len(qualifying) < n_users:
            raise NotEnoughQualifyingUsersException(n_users, len(qualifying))
        rng = make_generator(seed, STREAM_FILTER)
        picks = np.sort(rng.choice(len(qualifying), size=n_users, replace=False))
        chosen = [qualifying[p] for p in picks]

    result = filtered[filtered["user"].isin(set(chosen))].reset_index(drop=True)
    logger.info(
        f"Popularity filter: {len(kept_items)} items, {len(chosen)} of {len(qualifying)} qualifying users, "
        f"{len(result)} ratings"
    )
    return RatingTriples(result)


def _split_sizes(n: int, spec: SplitSpec) -> Tuple[int, int]:
    n_train = int(math.floor(spec.train_frac * n + _FLOOR_SLACK))
    n_val = int(math.floor(spec.val_frac * n + _FLOOR_SLACK))
    return n_train, min(n_val, n - n_train)


def resample_split(data: Union[SparseRatingMatrix, RatingDataset], spec: SplitSpec) -> List[DataSplit]:
    """
    관측 항목을 n_resamples번 독립 셔플하여 train/val/test 분할

    ⌊train_frac·n⌋ train, ⌊val_frac·n⌋ val, 나머지 test.
    train < min_train 이거나 val < min_val 이거나 test < min_test 인 사용자는
    그 재표본의 세 부분 모두에서 제거한다.
    """
    m = _as_matrix(data)
    n = m.nnz
    n_train, n_val = _split_sizes(n, spec)
    splits = []
    for r in range(spec.n_resamples):
        rng = make_generator(spec.seed, STREAM_SPLIT, r)
        perm = rng.permutation(n)
        parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
        counts = [np.bincount(m.users[p], minlength=m.n_users) for p in parts]
        keep = (
            (counts[0] >= spec.min_train_ratings)
            & (counts[1] >= spec.min_val_ratings)
            & (counts[2] >= spec.min_test_ratings)
        )
        users = np.flatnonzero(keep)
        dropped = int(m.n_users - len(users))
        kept_parts = [p[keep[m.users[p]]] for p in parts]
        if len(users) == 0:
            logger.warning(f"Resample {r}: every user was dropped by the activity thresholds")
            users = np.zeros(0, dtype=np.int64)
        split = DataSplit.from_positions(m, r, users, *kept_parts, dropped_users=dropped)
        logger.info(
            f"Resample {r}: {split.n_users} users kept, {dropped} dropped, "
            f"{len(split.train_positions)}/{len(split.val_positions)}/{len(split.test_positions)} ratings"
        )
        splits.append(split)
    return splits


def quantize(m: SparseRatingMatrix, threshold: float = 3.0) -> SparseRatingMatrix:
    """r ≤ 3 → 1, 그 외 → 5"""
    return m.with_values(np.where(m.ratings <= threshold, 1.0, 5.0))


def sample_monotone_params(n_users: int, spec: MonotoneTransformSpec) -> Tuple[np.ndarray, np.ndarray]:
    """사용자별 (a, b)"""
    rng = make_generator(spec.seed, STREAM_TRANSFORM)
    a = rng.choice(np.asarray(spec.a_choices, dtype=np.int64), size=n_users)
    b = rng.integers(0, a)
    return a, b


def apply_monotone_transform(m: SparseRatingMatrix, a: Sequence[int], b: Sequence[int]) -> SparseRatingMatrix:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (m.n_users,) or b.shape != (m.n_users,):
        raise ValidationException("a and b need one value per user", field="a/b")
    if np.any(a <= 0) or np.any(b >= a) or np.any(b < 0):
        raise ValidationException("transform needs a > 0 and 0 <= b < a", field="a/b")
    return m.with_values(a[m.users] * m.ratings - b[m.users])


def random_monotone_transform(m: SparseRatingMatrix, spec: MonotoneTransformSpec) -> SparseRatingMatrix:
    """사용자별 r ↦ a·r − b (a ≥ 1 이므로 순서 보존)"""
    a, b = sample_monotone_params(m.n_users, spec)
    logger.debug(f"Monotone transform: a counts {dict(zip(*np.unique(a, return_counts=True)))}")
    return apply_monotone_transform(m, a, b)
