"""
TDD 테스트: 불일치 목적함수와 ε-일관성 테스트
"""
import numpy as np
import pytest
from src.core.models import RankingCollection, build_matrix
from src.evaluation.objectives import (
    close_user_pairs,
    consistency_pairs_mask,
    dis_eps,
    dis_hat,
    eps_consistency_violations,
    normalized_dis_rate,
    separation_epsilon,
)
from src.exceptions import ShapeMismatchException, ValidationException


def sorted_rankings(H):
    """열마다 H 정렬 순위"""
    return RankingCollection(np.argsort(np.argsort(H, axis=0), axis=0).T + 1)


class TestDisEps:
    """dis_ε 테스트"""

    @pytest.fixture
    def model(self):
        rng = np.random.default_rng(0)
        F = rng.random((8, 5))
        return F, 3 * F + 1

    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
    def test_sorted_rankings_zero(self, model, eps):
        F, H = model
        assert dis_eps(sorted_rankings(H), F, H, eps) == 0

    def test_large_eps_zero(self, model):
        F, H = model
        reversed_sigma = RankingCollection(sorted_rankings(-H).ranks)
        assert dis_eps(reversed_sigma, F, H, eps=1.0) == 0

    def test_reversed_pair(self):
        F = np.array([[0.5], [0.0]])
        sigma = RankingCollection.from_rankings([[1, 2]])

        assert dis_eps(sigma, F, F, eps=0.4) == 1
        assert dis_eps(sigma, F, F, eps=0.5) == 0

    def test_full_reversal_count(self, model):
        F, H = model
        reversed_sigma = RankingCollection(sorted_rankings(-H).ranks)
        assert dis_eps(reversed_sigma, F, H, eps=0.0) == 5 * 28

    def test_nonincreasing_in_eps(self, model):
        F, H = model
        sigma = RankingCollection(np.stack([np.random.default_rng(s).permutation(8) + 1 for s in range(5)]))
        counts = [dis_eps(sigma, F, H, eps) for eps in np.linspace(0.0, 1.0, 11)]
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_shape_mismatch(self, model):
        F, H = model
        with pytest.raises(ShapeMismatchException):
            dis_eps(sorted_rankings(H), F[:4], H[:4], 0.1)

    def test_normalized_rate(self):
        assert normalized_dis_rate(6, n_items=4, n_users=2) == 0.5
        assert normalized_dis_rate(0, n_items=1, n_users=3) == 0.0


class TestDisHat:
    """관측 쌍 불일치 테스트"""

    def test_matches_all_observed(self):
        m = build_matrix([(0, 0, 5.0), (1, 0, 3.0), (2, 0, 1.0)], n_items=3, n_users=1)
        assert dis_hat(RankingCollection.from_rankings([[3, 2, 1]]), m) == 0

    def test_one_reversed_pair(self):
        m = build_matrix([(0, 0, 5.0), (1, 0, 3.0)], n_items=3, n_users=1)
        assert dis_hat(RankingCollection.from_rankings([[2, 3, 1]]), m) == 1

    def test_tied_ratings_ignored(self):
        m = build_matrix([(0, 0, 4.0), (1, 0, 4.0)], n_items=2, n_users=1)
        assert dis_hat(RankingCollection.from_rankings([[1, 2]]), m) == 0

    def test_sorted_fully_observed(self):
        rng = np.random.default_rng(2)
        H = np.stack([rng.permutation(6) + 1.0 for _ in range(3)], axis=1)
        items, users = np.nonzero(np.ones_like(H, dtype=bool))
        m = build_matrix(zip(items, users, H[items, users]), n_items=6, n_users=3)
        assert dis_hat(sorted_rankings(H), m) == 0

    def test_shape_mismatch(self):
        m = build_matrix([], n_items=2, n_users=2)
        with pytest.raises(ShapeMismatchException):
            dis_hat(RankingCollection.from_rankings([[1, 2]]), m)


class TestEpsConsistency:
    """ε-일관성 검사 테스트"""

    def test_shared_ranking(self):
        sigma = RankingCollection.from_rankings([[3, 1, 2]] * 4)
        Y = np.random.default_rng(0).random((4, 2))
        assert eps_consistency_violations(sigma, Y, eps=10.0) == []

    def test_coincident_users_one_swap(self):
        sigma = RankingCollection.from_rankings([[3, 2, 1], [2, 3, 1]])
        Y = np.zeros((2, 2))
        assert eps_consistency_violations(sigma, Y, eps=0.1) == [(0, 1, 0, 1)]

    def test_zero_eps_distinct_users(self):
        sigma = RankingCollection.from_rankings([[3, 2, 1], [1, 2, 3]])
        Y = np.array([[0.0, 0.0], [0.5, 0.5]])
        assert eps_consistency_violations(sigma, Y, eps=0.0) == []

    def test_restricted_to_mask(self):
        sigma = RankingCollection.from_rankings([[3, 2, 1], [2, 3, 1]])
        T = np.zeros((3, 3, 2), dtype=bool)
        assert eps_consistency_violations(sigma, np.zeros((2, 2)), eps=0.1, T=T) == []

    def test_shape_checks(self):
        sigma = RankingCollection.from_rankings([[2, 1], [1, 2]])
        with pytest.raises(ShapeMismatchException):
            eps_consistency_violations(sigma, np.zeros((3, 2)), eps=0.1)
        with pytest.raises(ShapeMismatchException):
            eps_consistency_violations(sigma, np.zeros((2, 2)), eps=0.1, T=np.ones((2, 2, 3), dtype=bool))

    def test_close_user_pairs(self):
        Y = np.array([[0.0], [0.05], [1.0]])
        assert close_user_pairs(Y, 0.1) == [(0, 1)]
        with pytest.raises(ValidationException):
            close_user_pairs(Y, -1.0)

    def test_consistency_pairs_mask(self):
        F = np.array([[0.0, 0.0], [0.5, 0.05]])
        H = np.array([[1.0, 1.0], [2.0, 2.0]])
        T = consistency_pairs_mask(F, H, eps=0.1)

        assert T.shape == (2, 2, 2)
        assert T[0, 1, 0] and T[1, 0, 0]
        assert not T[0, 1, 1]
        assert not T[0, 0, 0]


class TestSeparationEpsilon:
    """분리 ε 선택 테스트"""

    def test_fraction_of_pairs(self):
        F = np.random.default_rng(0).random((40, 30))
        eps = separation_epsilon(F, 0.2)
        iu, ju = np.triu_indices(40, k=1)
        separated = np.mean(np.abs(F[iu] - F[ju]) > eps)
        assert separated == pytest.approx(0.2, abs=0.01)

    def test_single_item(self):
        assert separation_epsilon(np.zeros((1, 4)), 0.2) == 0.0

    def test_invalid_fraction(self):
        with pytest.raises(ValidationException):
            separation_epsilon(np.zeros((3, 3)), 1.0)
