"""
불일치 목적함수와 ε-일관성 검사

dis_ε(σ, H): |f_i − f_j| > ε 인 쌍 중 σ가 H와 반대로 정렬한 수
dis-hat(σ, P_Ω(H)): 관측 쌍 중 σ가 H와 반대로 정렬한 수
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..core.models import RankingCollection, SparseRatingMatrix
from ..exceptions import ShapeMismatchException, ValidationException

logger = logging.getLogger(__name__)

Violation = Tuple[int, int, int, int]


def _check_shapes(sigma: RankingCollection, *matrices: np.ndarray) -> None:
    expected = (sigma.n_items, sigma.n_users)
    for matrix in matrices:
        if np.shape(matrix) != expected:
            raise ShapeMismatchException("matrix shape does not match rankings", expected=expected, actual=np.shape(matrix))


def _sign_outer(values: np.ndarray) -> np.ndarray:
    return np.sign(values[:, None] - values[None, :])


def dis_eps(sigma: RankingCollection, F: np.ndarray, H: np.ndarray, eps: float) -> int:
    """Σ_u Σ_{i<j} 1{|f_i−f_j| > ε}·1{(h_i−h_j)(σ(i)−σ(j)) < 0}"""
    F = np.asarray(F, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    _check_shapes(sigma, F, H)
    if eps < 0:
        raise ValidationException("eps must be non-negative", field="eps", value=eps)
    total = 0
    for u in range(sigma.n_users):
        f = F[:, u]
        separated = np.abs(f[:, None] - f[None, :]) > eps
        reversed_order = _sign_outer(H[:, u]) * _sign_outer(sigma.ranking(u).astype(np.float64)) < 0
        # 대칭 행렬이므로 절반
        total += int(np.count_nonzero(separated & reversed_order)) // 2
    return total


def dis_hat(sigma: RankingCollection, m: SparseRatingMatrix) -> int:
    """Σ_u Σ_{관측 i<j} 1{(H_i−H_j)(σ(i)−σ(j)) < 0}"""
    if (m.n_items, m.n_users) != (sigma.n_items, sigma.n_users):
        raise ShapeMismatchException("matrix shape does not match rankings",
                                     expected=(sigma.n_items, sigma.n_users), actual=m.shape)
    total = 0
    for u in range(m.n_users):
        items = m.rated_items(u)
        if len(items) < 2:
            continue
        predicted = sigma.ranking(u)[items].astype(np.float64)
        reversed_order = _sign_outer(m.user_ratings(u)) * _sign_outer(predicted) < 0
        total += int(np.count_nonzero(reversed_order)) // 2
    return total


def normalized_dis_rate(dis: int, n_items: int, n_users: int) -> float:
    """dis / (n2 · C(n1, 2))"""
    pairs = n_users * n_items * (n_items - 1) // 2
    return dis / pairs if pairs > 0 else 0.0


def consistency_pairs_mask(F: np.ndarray, H: np.ndarray, eps: float) -> np.ndarray:
    """T[i, j, u] = |f_i − f_j| > ε 이고 h_i ≠ h_j (shape n1 × n1 × n2)"""
    F = np.asarray(F, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if F.shape != H.shape:
        raise ShapeMismatchException("F and H differ in shape", expected=F.shape, actual=H.shape)
    separated = np.abs(F[:, None, :] - F[None, :, :]) > eps
    distinct = H[:, None, :] != H[None, :, :]
    return separated & distinct


def close_user_pairs(Y: np.ndarray, eps: float) -> List[Tuple[int, int]]:
    """d(y_u, y_v) ≤ ε 인 (u, v), u < v, 정렬"""
    if eps < 0:
        raise ValidationException("eps must be non-negative", field="eps", value=eps)
    tree = cKDTree(np.atleast_2d(np.asarray(Y, dtype=np.float64)))
    return sorted(tree.query_pairs(r=eps))


def eps_consistency_violations(sigma: RankingCollection, Y: np.ndarray, eps: float,
                               T: Optional[np.ndarray] = None) -> List[Violation]:
    """
    ε 이내 사용자 쌍 (u, v)에서 i, j 순서가 다른 (i, j, u, v) 목록 (i<j, u<v)

    T가 주어지면 (i,j,u), (i,j,v)가 모두 T에 속하는 쌍만 검사한다.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[0] != sigma.n_users:
        raise ShapeMismatchException("Y rows must match users", expected=(sigma.n_users,), actual=(Y.shape[0],))
    if T is not None and np.shape(T) != (sigma.n_items, sigma.n_items, sigma.n_users):
        raise ShapeMismatchException("T shape mismatch",
                                     expected=(sigma.n_items, sigma.n_items, sigma.n_users), actual=np.shape(T))

    upper = np.triu(np.ones((sigma.n_items, sigma.n_items), dtype=bool), k=1)
    violations: List[Violation] = []
    for u, v in close_user_pairs(Y, eps):
        ru = _sign_outer(sigma.ranking(u).astype(np.float64))
        rv = _sign_outer(sigma.ranking(v).astype(np.float64))
        differs = (ru != rv) & upper
        if T is not None:
            differs &= T[:, :, u] & T[:, :, v]
        for i, j in zip(*np.nonzero(differs)):
            violations.append((int(i), int(j), int(u), int(v)))
    violations.sort()
    if violations:
        logger.debug(f"{len(violations)} eps-consistency violations at eps={eps}")
    return violations


def separation_epsilon(F: np.ndarray, fraction: float, max_users: int = 512) -> float:
    """|f_i − f_j| > ε 인 아이템 쌍 비율이 fraction이 되는 ε (앞쪽 max_users명 기준)"""
    if not 0.0 < fraction < 1.0:
        raise ValidationException("fraction must be in (0, 1)", field="fraction", value=fraction)
    F = np.asarray(F, dtype=np.float64)[:, :max_users]
    iu, ju = np.triu_indices(F.shape[0], k=1)
    if len(iu) == 0:
        return 0.0
    gaps = np.abs(F[iu] - F[ju]).ravel()
    return float(np.quantile(gaps, 1.0 - fraction))
