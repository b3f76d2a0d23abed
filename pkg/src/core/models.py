"""
선호 완성 핵심 데이터 모델 정의

관측 평점 행렬, 사용자별 쌍대 선호 행렬, 사용자별 랭킹 모음.
아이템/사용자는 0부터 시작하는 밀집 인덱스이며 모든 객체는 생성 후 불변이다.
"""
import hashlib
import json
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import (
    DuplicateEntryException,
    IndexOutOfRangeException,
    InvalidPermutationException,
    MalformedPreferenceMatrixException,
    ShapeMismatchException,
    ValidationException,
)

Triple = Tuple[int, int, float]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class SparseRatingMatrix:
    """관측된 평점 P_Ω(H) (item, user, rating) 모델

    사용자(열) 단위 CSC 배치로 저장하므로 N(u) 조회는 O(|N(u)|)이다.
    """

    def __init__(
        self,
        n_items: int,
        n_users: int,
        items: Sequence[int],
        users: Sequence[int],
        ratings: Sequence[float],
    ):
        if n_items <= 0 or n_users < 0:
            raise ValidationException(
                f"Matrix needs at least one item and a nonnegative user count: {n_items}x{n_users}",
                field="shape", value=(n_items, n_users)
            )
        items = np.asarray(items, dtype=np.int64).reshape(-1)
        users = np.asarray(users, dtype=np.int64).reshape(-1)
        ratings = np.asarray(ratings, dtype=np.float64).reshape(-1)
        if not (len(items) == len(users) == len(ratings)):
            raise ShapeMismatchException(
                "items, users and ratings must have equal length",
                expected=(len(items),), actual=(len(users), len(ratings))
            )
        self._check_range(items, n_items, "item")
        self._check_range(users, n_users, "user")
        if not np.all(np.isfinite(ratings)):
            raise ValidationException("Ratings must be finite", field="ratings")

        # 사용자 우선, 아이템 오름차순
        order = np.lexsort((items, users))
        items, users, ratings = items[order], users[order], ratings[order]
        if len(items) > 1:
            dup = np.flatnonzero((items[1:] == items[:-1]) & (users[1:] == users[:-1]))
            if len(dup):
                raise DuplicateEntryException(int(items[dup[0]]), int(users[dup[0]]))

        indptr = np.zeros(n_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(users, minlength=n_users), out=indptr[1:])

        self.n_items = int(n_items)
        self.n_users = int(n_users)
        # 사용자별 색인은 CSC 배열을 그대로 사용
        self._csc = sp.csc_matrix((ratings, items, indptr), shape=(n_items, n_users))
        self._csc.has_sorted_indices = True
        self._indptr = _readonly(self._csc.indptr)
        self._items = _readonly(self._csc.indices)
        self._ratings = _readonly(self._csc.data)
        self._users = _readonly(users)
        self._dense: Optional[np.ndarray] = None
        self._fingerprint: Optional[str] = None

    @staticmethod
    def _check_range(values: np.ndarray, limit: int, field: str) -> None:
        if len(values) and (values.min() < 0 or values.max() >= limit):
            bad = values[(values < 0) | (values >= limit)][0]
            raise IndexOutOfRangeException(
                f"{field} index {int(bad)} out of range [0, {limit})",
                field=field, value=int(bad), limit=limit
            )

    def _check_user(self, u: int) -> None:
        if not 0 <= u < self.n_users:
            raise IndexOutOfRangeException(
                f"user index {u} out of range [0, {self.n_users})",
                field="user", value=u, limit=self.n_users
            )

    @property
    def nnz(self) -> int:
        """관측 항목 수 |Ω|"""
        return len(self._ratings)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_items, self.n_users)

    @property
    def indptr(self) -> np.ndarray:
        return self._indptr

    @property
    def items(self) -> np.ndarray:
        """사용자 순으로 정렬된 아이템 인덱스 (CSC indices)"""
        return self._items

    @property
    def users(self) -> np.ndarray:
        return self._users

    @property
    def ratings(self) -> np.ndarray:
        return self._ratings

    def rated_items(self, u: int) -> np.ndarray:
        """N(u): 사용자 u가 평가한 아이템 (오름차순)"""
        self._check_user(u)
        return self._items[self._indptr[u]:self._indptr[u + 1]]

    def user_ratings(self, u: int) -> np.ndarray:
        """rated_items(u)와 같은 순서의 평점"""
        self._check_user(u)
        return self._ratings[self._indptr[u]:self._indptr[u + 1]]

    def user_counts(self) -> np.ndarray:
        return np.diff(self._indptr)

    def value(self, item: int, user: int) -> Optional[float]:
        """관측 평점, 미관측이면 None"""
        items = self.rated_items(user)
        pos = int(np.searchsorted(items, item))
        if pos < len(items) and items[pos] == item:
            return float(self.user_ratings(user)[pos])
        return None

    def density(self) -> float:
        """p̂ = |Ω| / (n₁·n₂)"""
        cells = self.n_items * self.n_users
        return self.nnz / float(cells) if cells else 0.0

    def entries(self) -> List[Triple]:
        """(item, user, rating) 목록 (사용자, 아이템 순)"""
        return [
            (int(i), int(u), float(r))
            for i, u, r in zip(self._items, self._users, self._ratings)
        ]

    def to_csc(self) -> sp.csc_matrix:
        """scipy CSC 사본 (행 = 아이템, 열 = 사용자)"""
        return self._csc.copy()

    def observed_mask(self) -> np.ndarray:
        """n₁×n₂ 관측 여부"""
        mask = np.zeros((self.n_items, self.n_users), dtype=bool)
        mask[self._items, self._users] = True
        return mask

    def to_dense(self) -> np.ndarray:
        """n₁×n₂ 평점 배열, 미관측은 NaN"""
        if self._dense is None:
            dense = np.full((self.n_items, self.n_users), np.nan)
            dense[self._items, self._users] = self._ratings
            self._dense = _readonly(dense)
        return self._dense

    def with_values(self, ratings: np.ndarray) -> "SparseRatingMatrix":
        """같은 Ω에 새 평점을 얹은 행렬"""
        ratings = np.asarray(ratings, dtype=np.float64)
        if ratings.shape != self._ratings.shape:
            raise ShapeMismatchException(
                "ratings must align with existing entries",
                expected=self._ratings.shape, actual=ratings.shape
            )
        return SparseRatingMatrix(self.n_items, self.n_users, self._items, self._users, ratings)

    def select_entries(self, positions: Sequence[int], users: Optional[np.ndarray] = None) -> "SparseRatingMatrix":
        """entries() 위치로 부분 행렬 생성. users가 주어지면 해당 사용자만 0..len-1로 재색인"""
        positions = np.asarray(positions, dtype=np.int64)
        items = self._items[positions]
        user_idx = self._users[positions]
        ratings = self._ratings[positions]
        if users is None:
            return SparseRatingMatrix(self.n_items, self.n_users, items, user_idx, ratings)
        users = np.asarray(users, dtype=np.int64)
        remap = np.full(self.n_users, -1, dtype=np.int64)
        remap[users] = np.arange(len(users))
        new_users = remap[user_idx]
        if len(new_users) and new_users.min() < 0:
            raise ValidationException("selected entries reference dropped users", field="users")
        return SparseRatingMatrix(self.n_items, len(users), items, new_users, ratings)

    def fingerprint(self) -> str:
        """내용 해시 (캐시 키)"""
        if self._fingerprint is None:
            digest = hashlib.sha1()
            digest.update(np.array([self.n_items, self.n_users], dtype=np.int64).tobytes())
            digest.update(self._items.astype(np.int64).tobytes())
            digest.update(self._users.astype(np.int64).tobytes())
            digest.update(self._ratings.tobytes())
            self._fingerprint = digest.hexdigest()
        return self._fingerprint

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_items": self.n_items,
            "n_users": self.n_users,
            "entries": [list(entry) for entry in self.entries()],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SparseRatingMatrix":
        return build_matrix(
            [tuple(entry) for entry in payload.get("entries", [])],
            n_items=payload["n_items"],
            n_users=payload["n_users"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SparseRatingMatrix":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseRatingMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self._items, other._items)
            and np.array_equal(self._users, other._users)
            and np.array_equal(self._ratings, other._ratings)
        )

    def __repr__(self) -> str:
        return f"SparseRatingMatrix(n_items={self.n_items}, n_users={self.n_users}, nnz={self.nnz})"


def build_matrix(triples: Iterable[Triple], n_items: int, n_users: int) -> SparseRatingMatrix:
    """(item, user, rating) 목록으로 행렬 생성

    Raises:
        DuplicateEntryException: 같은 (item, user) 키가 두 번 이상 나올 때
        IndexOutOfRangeException: 인덱스가 범위를 벗어날 때
    """
    triples = list(triples)
    if triples:
        items, users, ratings = zip(*triples)
    else:
        items, users, ratings = (), (), ()
    return SparseRatingMatrix(n_items, n_users, items, users, ratings)


def rated_items(m: SparseRatingMatrix, u: int) -> List[int]:
    """N(u)를 오름차순 리스트로 반환"""
    return [int(i) for i in m.rated_items(u)]


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    """사용자 한 명의 쌍대 선호 A_{u,:,:} 모델

    bits[i][j] = 1 이면 아이템 i를 j보다 선호. 대각선은 무시한다.
    """
    bits: np.ndarray

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        bits = np.asarray(self.bits, dtype=np.int8)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1] or bits.shape[0] == 0:
            raise ShapeMismatchException(
                "Preference matrix must be a non-empty square table",
                actual=tuple(bits.shape)
            )
        off = ~np.eye(bits.shape[0], dtype=bool)
        if np.any(((bits != 0) & (bits != 1)) & off):
            raise MalformedPreferenceMatrixException("Preference bits must be 0 or 1")
        bad = np.argwhere(((bits + bits.T) != 1) & off)
        if len(bad):
            pairs = [tuple(int(x) for x in pair) for pair in bad[bad[:, 0] < bad[:, 1]][:10]]
            raise MalformedPreferenceMatrixException(
                f"Antisymmetry violated on {len(bad) // 2} item pairs", pairs=pairs
            )
        object.__setattr__(self, "bits", _readonly(bits))

    @property
    def n_items(self) -> int:
        return self.bits.shape[0]

    def prefers(self, i: int, j: int) -> bool:
        return bool(self.bits[i, j])

    def scores(self) -> np.ndarray:
        """Copeland 점수 I_j = Σ_{i≠j} A[j][i]"""
        return self.bits.sum(axis=1, dtype=np.int64) - np.diag(self.bits).astype(np.int64)

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "PreferenceMatrix":
        """선호 순서(좋은 것부터)에 일치하는 이행적 토너먼트"""
        order = np.asarray(order, dtype=np.int64)
        position = np.empty(len(order), dtype=np.int64)
        position[order] = np.arange(len(order))
        return cls((position[:, None] < position[None, :]).astype(np.int8))


@dataclass(frozen=True)
class RankingCollection:
    """사용자별 랭킹 σ 모음

    ranks[u, i] = σ_u(i) ∈ {1..n₁}, 값이 클수록 선호도가 높다.
    """
    ranks: np.ndarray

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        ranks = np.asarray(self.ranks, dtype=np.int64)
        if ranks.ndim != 2:
            raise ShapeMismatchException("ranks must be a users x items table", actual=tuple(ranks.shape))
        n_items = ranks.shape[1]
        expected = np.arange(1, n_items + 1)
        sorted_ranks = np.sort(ranks, axis=1)
        bad = np.flatnonzero(np.any(sorted_ranks != expected[None, :], axis=1))
        if len(bad):
            raise InvalidPermutationException(
                f"Ranking of user {int(bad[0])} is not a permutation of 1..{n_items}",
                user=int(bad[0])
            )
        object.__setattr__(self, "ranks", _readonly(ranks))

    @property
    def n_users(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_items(self) -> int:
        return self.ranks.shape[1]

    def ranking(self, u: int) -> np.ndarray:
        """σ_u (아이템 → 랭크 값)"""
        return self.ranks[u]

    def order(self, u: int) -> np.ndarray:
        """가장 선호하는 아이템부터 나열"""
        return np.argsort(-self.ranks[u], kind="stable")

    @classmethod
    def from_rankings(cls, rankings: Sequence[Sequence[int]]) -> "RankingCollection":
        return cls(np.asarray(rankings, dtype=np.int64))

    @classmethod
    def from_orders(cls, orders: Sequence[Sequence[int]]) -> "RankingCollection":
        """사용자별 선호 순서(좋은 것부터)로 생성"""
        orders = np.asarray(orders, dtype=np.int64)
        n_users, n_items = orders.shape
        ranks = np.empty_like(orders)
        rows = np.repeat(np.arange(n_users), n_items)
        ranks[rows, orders.reshape(-1)] = np.tile(np.arange(n_items, 0, -1), n_users)
        return cls(ranks)

    def to_dict(self) -> Dict[str, Any]:
        return {"n_items": self.n_items, "n_users": self.n_users, "ranks": self.ranks.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RankingCollection":
        ranks = np.asarray(payload["ranks"], dtype=np.int64).reshape(
            payload["n_users"], payload["n_items"]
        )
        return cls(ranks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RankingCollection):
            return NotImplemented
        return np.array_equal(self.ranks, other.ranks)

    def __hash__(self) -> int:
        return hash(self.ranks.tobytes())
