"""
TDD 테스트: 랭킹 지표 테스트
"""
import numpy as np
import pytest
from src.core.models import RankingCollection, build_matrix
from src.evaluation.metrics import (
    METRICS,
    MetricReport,
    evaluate_rankings,
    kendall_tau,
    ndcg_at_k,
    precision_at_k,
    spearman_rho,
)
from src.exceptions import (
    ConstantTruthException,
    InsufficientItemsException,
    InsufficientPairsException,
    ShapeMismatchException,
    ValidationException,
)


def brute_force_tau(sigma, truth):
    concordant = discordant = 0
    for a in range(len(truth)):
        for b in range(a + 1, len(truth)):
            (i, ri), (j, rj) = truth[a], truth[b]
            if ri == rj:
                continue
            if (ri - rj) * (sigma[i] - sigma[j]) > 0:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (concordant + discordant)


class TestKendallTau:
    """Kendall tau 테스트"""

    def test_identical_order(self):
        sigma = np.array([5, 4, 3, 2, 1])
        truth = [(i, float(5 - i)) for i in range(5)]
        assert kendall_tau(sigma, truth) == 1.0

    def test_reversal(self):
        sigma = np.array([1, 2, 3, 4, 5])
        truth = [(i, float(5 - i)) for i in range(5)]
        assert kendall_tau(sigma, truth) == -1.0

    def test_one_adjacent_swap(self):
        sigma = np.array([4, 3, 1, 2])
        truth = [(0, 4.0), (1, 3.0), (2, 2.0), (3, 1.0)]
        assert kendall_tau(sigma, truth) == pytest.approx(2 / 3)

    def test_tied_truth_pairs_skipped(self):
        sigma = np.array([3, 2, 1])
        truth = [(0, 5.0), (1, 5.0), (2, 1.0)]
        assert kendall_tau(sigma, truth) == 1.0

    def test_insufficient_pairs(self):
        with pytest.raises(InsufficientPairsException):
            kendall_tau(np.array([1, 2]), [(0, 3.0)])
        with pytest.raises(InsufficientPairsException):
            kendall_tau(np.array([1, 2]), [(0, 3.0), (1, 3.0)])

    def test_matches_brute_force(self):
        """임의 1000개 사례에서 쌍 세기 오라클과 정확히 일치"""
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(1000):
            n_items = int(rng.integers(2, 31))
            sigma = rng.permutation(n_items) + 1
            n_truth = int(rng.integers(2, n_items + 1))
            items = rng.choice(n_items, size=n_truth, replace=False)
            truth = [(int(i), float(r)) for i, r in zip(items, rng.integers(1, 6, n_truth))]
            if len({r for _, r in truth}) == 1:
                with pytest.raises(InsufficientPairsException):
                    kendall_tau(sigma, truth)
                continue
            assert kendall_tau(sigma, truth) == brute_force_tau(sigma, truth)
            checked += 1
        assert checked > 900

    def test_array_truth(self):
        sigma = np.array([2, 1, 3])
        truth = (np.array([0, 2]), np.array([1.0, 4.0]))
        assert kendall_tau(sigma, truth) == 1.0

    def test_duplicate_truth_items(self):
        with pytest.raises(ValidationException):
            kendall_tau(np.array([1, 2]), [(0, 1.0), (0, 2.0)])


class TestSpearmanRho:
    """Spearman rho 테스트"""

    def test_identical_and_reversed(self):
        truth = [(0, 3.0), (1, 2.0), (2, 1.0)]
        assert spearman_rho(np.array([3, 2, 1]), truth) == pytest.approx(1.0)
        assert spearman_rho(np.array([1, 2, 3]), truth) == pytest.approx(-1.0)

    def test_tie_averaged_truth(self):
        truth = [(0, 5.0), (1, 5.0), (2, 1.0)]
        assert spearman_rho(np.array([3, 2, 1]), truth) == pytest.approx(np.sqrt(3) / 2)

    def test_constant_truth(self):
        with pytest.raises(ConstantTruthException):
            spearman_rho(np.array([1, 2, 3]), [(0, 4.0), (1, 4.0), (2, 4.0)])

    def test_single_item(self):
        with pytest.raises(InsufficientPairsException):
            spearman_rho(np.array([1, 2]), [(1, 4.0)])


class TestNdcgAtK:
    """NDCG@k 테스트"""

    def test_ideal_order(self):
        assert ndcg_at_k(np.array([3, 2, 1]), [(0, 5.0), (1, 3.0), (2, 1.0)], k=2) == 1.0

    def test_equal_ratings(self):
        assert ndcg_at_k(np.array([1, 2, 3]), [(0, 4.0), (1, 4.0), (2, 4.0)], k=3) == 1.0

    def test_reversed_two_items(self):
        value = ndcg_at_k(np.array([1, 2]), [(0, 5.0), (1, 1.0)], k=2)
        expected = (1 + 5 / np.log2(3)) / (5 + 1 / np.log2(3))
        assert value == pytest.approx(expected)
        assert value == pytest.approx(0.7378, abs=1e-4)

    def test_zero_gains(self):
        assert ndcg_at_k(np.array([1, 2]), [(0, 0.0), (1, 0.0)], k=2) == 1.0

    def test_negative_ratings_shifted(self):
        value = ndcg_at_k(np.array([2, 1]), [(0, -1.0), (1, -3.0)], k=2)
        assert value == 1.0

    def test_ideal_random(self):
        """임의 정답에서 이상 순서의 NDCG = 1"""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 25))
            ratings = rng.integers(1, 6, n).astype(float)
            sigma = np.empty(n, dtype=np.int64)
            sigma[np.argsort(-ratings, kind="stable")] = np.arange(n, 0, -1)
            k = int(rng.integers(1, 8))
            assert abs(ndcg_at_k(sigma, (np.arange(n), ratings), k) - 1.0) <= 1e-12

    def test_empty_truth(self):
        with pytest.raises(InsufficientItemsException):
            ndcg_at_k(np.array([1]), [])


class TestPrecisionAtK:
    """Precision@k 테스트"""

    def test_all_relevant(self):
        sigma = np.arange(6, 0, -1)
        truth = [(i, 5.0) for i in range(6)]
        assert precision_at_k(sigma, truth, k=5) == 1.0

    def test_none_relevant(self):
        sigma = np.arange(5, 0, -1)
        truth = [(i, 4.0) for i in range(5)]
        assert precision_at_k(sigma, truth, k=5) == 0.0

    def test_two_of_five(self):
        sigma = np.arange(7, 0, -1)
        ratings = [5.0, 1.0, 5.0, 2.0, 3.0, 5.0, 5.0]
        truth = list(enumerate(ratings))
        assert precision_at_k(sigma, truth, k=5) == pytest.approx(0.4)

    def test_custom_threshold(self):
        sigma = np.arange(5, 0, -1)
        truth = [(i, float(i)) for i in range(5)]
        assert precision_at_k(sigma, truth, k=5, relevance_threshold=3.0) == pytest.approx(0.4)

    def test_too_few_items(self):
        with pytest.raises(InsufficientItemsException):
            precision_at_k(np.arange(4, 0, -1), [(0, 5.0), (1, 5.0)], k=5)


class TestEvaluateRankings:
    """사용자별 지표 집계 테스트"""

    @pytest.fixture
    def rankings(self):
        return RankingCollection.from_rankings([
            [6, 5, 4, 3, 2, 1],
            [1, 2, 3, 4, 5, 6],
            [6, 5, 4, 3, 2, 1],
        ])

    @pytest.fixture
    def test_matrix(self):
        triples = [(i, 0, float(5 - i)) for i in range(6)]
        triples += [(i, 1, float(5 - i)) for i in range(6)]
        return build_matrix(triples, n_items=6, n_users=3)

    def test_report(self, rankings, test_matrix):
        report = evaluate_rankings(rankings, test_matrix, k=5, relevance_threshold=5.0)

        assert report.users_evaluated == 2
        assert report.per_user["kendall_tau"] == {0: 1.0, 1: -1.0}
        assert report.mean("kendall_tau") == 0.0
        assert report.std("kendall_tau") == 1.0
        assert report.count("precision_at_k") == 2
        assert report.per_user["precision_at_k"][0] == pytest.approx(0.2)

    def test_metric_skipped_per_user(self, rankings):
        test = build_matrix([(0, 0, 5.0), (1, 0, 3.0)], n_items=6, n_users=3)
        report = evaluate_rankings(rankings, test, k=5)

        assert report.count("kendall_tau") == 1
        assert report.count("precision_at_k") == 0
        assert np.isnan(report.mean("precision_at_k"))

    def test_single_user_std_zero(self, rankings):
        test = build_matrix([(i, 2, float(i)) for i in range(6)], n_items=6, n_users=3)
        report = evaluate_rankings(rankings, test)
        assert report.std("spearman_rho") == 0.0

    def test_shape_mismatch(self, rankings):
        with pytest.raises(ShapeMismatchException):
            evaluate_rankings(rankings, build_matrix([], n_items=5, n_users=3))

    def test_serialization(self, rankings, test_matrix):
        report = evaluate_rankings(rankings, test_matrix)
        payload = report.to_dict()
        rows = report.to_rows(dataset="toy", algorithm="MR", beta=5, k=13, seed=0)

        assert payload["gain"] == "linear"
        assert set(payload["metrics"]) == set(METRICS)
        assert len(rows) == 4
        assert rows[0]["dataset"] == "toy"
        assert {row["metric"] for row in rows} == set(METRICS)

    def test_empty_report(self):
        report = MetricReport(k=5, relevance_threshold=5.0, users_evaluated=0)
        assert np.isnan(report.mean("ndcg_at_k"))
