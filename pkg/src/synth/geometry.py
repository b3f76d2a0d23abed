"""
잠재 특징 공간 도구
"""
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..exceptions import ShapeMismatchException, ValidationException


def sample_unit_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """단위 공 균등 샘플: 정규분포 방향 × U^(1/d) 반경"""
    directions = rng.standard_normal((n, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.random(n) ** (1.0 / d)
    return directions / norms * radii[:, None]


def lift_inner_product(X: np.ndarray, Y: np.ndarray,
                       radius: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    내적 모델을 거리 모델로 변환 (차원 하나 추가)

    x̃_i = (x_i, γ_i), γ_i = sqrt(B² − ‖x_i‖²), ‖x̃_i‖ = B
    ỹ_u = (−y_u, 0)
    ‖x̃_i − ỹ_u‖² = B² + ‖y_u‖² + 2 x_iᵗ y_u 이므로 내적이 클수록 거리가 크다.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValidationException("X must be nonempty", field="X")
    if X.shape[1] != Y.shape[1]:
        raise ShapeMismatchException("X and Y dimensions differ", expected=(X.shape[1],), actual=(Y.shape[1],))

    norms_sq = np.einsum("ij,ij->i", X, X)
    max_norm = float(np.sqrt(norms_sq.max()))
    if radius is None:
        radius = max_norm
    elif radius < max_norm - 1e-12:
        raise ValidationException(f"radius {radius} is below max norm {max_norm}", field="radius", value=radius)

    gamma = np.sqrt(np.clip(radius * radius - norms_sq, 0.0, None))
    X_lifted = np.hstack([X, gamma[:, None]])
    Y_lifted = np.hstack([-Y, np.zeros((Y.shape[0], 1))])
    return X_lifted, Y_lifted


def pairwise_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(X), np.atleast_2d(Y), metric="euclidean")
