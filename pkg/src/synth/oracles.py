"""
잠재 모델 오라클

ρ/ρ′ 몬테카를로 추정, 반례 함수 쌍, 립시츠 감사, 판별률 r̂(ε)
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..exceptions import InvalidModelConfigException, ValidationException
from ..utils.rng import STREAM_ORACLE, make_generator
from .generator import GFamily, LatentModel
from .geometry import lift_inner_product

logger = logging.getLogger(__name__)

ScoreFunction = Callable[[np.ndarray], np.ndarray]

# 오라클 하위 스트림
_SUB_RHO, _SUB_LIPSCHITZ, _SUB_DISCERN = range(3)

# 거리 기반 f는 각 인자에 1-립시츠, (X×Y, max 거리)에서는 2-립시츠
LIPSCHITZ_CONSTANT = 2.0


def _check_samples(n_samples: int) -> None:
    if n_samples < 1:
        raise ValidationException(f"n_samples must be >= 1: {n_samples}", field="n_samples", value=n_samples)


def pairwise_agreement(h_u: ScoreFunction, h_v: ScoreFunction, x1: np.ndarray, x2: np.ndarray) -> float:
    """두 점수 함수가 (x1, x2) 쌍을 같은 방향(또는 동점)으로 정렬하는 비율"""
    su = np.sign(h_u(x1) - h_u(x2))
    sv = np.sign(h_v(x1) - h_v(x2))
    return float(np.mean(su * sv >= 0))


def _step_levels(f: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """행마다 다른 임계값으로 계단 레벨 (1 + #{a ≤ f})"""
    return 1.0 + np.sum(thresholds <= f[:, None], axis=1)


def rho_oracle(model: LatentModel, u: int, v: int, n_samples: int = 10_000,
               discrete: bool = False, seed: Optional[int] = None) -> float:
    """
    ρ(y_u, y_v): 임의 두 아이템을 두 사용자가 같은 순서로 놓을 확률

    discrete=True이면 ρ′: 매 샘플마다 두 사용자의 임계값을 P_G에서 새로 뽑는다.
    """
    _check_samples(n_samples)
    base = model.config.seed if seed is None else seed
    rng = make_generator(base, STREAM_ORACLE, _SUB_RHO, u, v)
    x1 = model.sample_items(rng, n_samples)
    x2 = model.sample_items(rng, n_samples)

    if not discrete:
        return pairwise_agreement(
            lambda x: model.apply_g(u, model.latent_f(x, u)),
            lambda x: model.apply_g(v, model.latent_f(x, v)),
            x1, x2,
        )

    cfg = model.config
    if cfg.g_family != GFamily.STEP_THRESHOLDS:
        raise InvalidModelConfigException("discrete rho requires the step_thresholds family", field="g_family")
    draws = [
        np.sort(rng.uniform(-cfg.bound, cfg.bound, (n_samples, cfg.levels - 1)), axis=1)
        for _ in range(2)
    ]
    return pairwise_agreement(
        lambda x: _step_levels(model.latent_f(x, u), draws[0]),
        lambda x: _step_levels(model.latent_f(x, v), draws[1]),
        x1, x2,
    )


def counterexample_pair(eps: float) -> Tuple[ScoreFunction, ScoreFunction]:
    """
    [0,1] 위의 두 함수: sup 거리 ≤ ε 이면서 거의 모든 쌍을 반대로 정렬

    f(z) = εz (z ≤ ½), ε(1−z) (z > ½);  g(z) = −εz (z ≤ ½), ε(z−1) (z > ½)
    """
    if eps <= 0:
        raise ValidationException(f"eps must be positive: {eps}", field="eps", value=eps)

    def f(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return np.where(z <= 0.5, eps * z, eps * (1.0 - z))

    def g(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return np.where(z <= 0.5, -eps * z, eps * (z - 1.0))

    return f, g


@dataclass(frozen=True)
class LipschitzAudit:
    """표본 쌍에 대한 |ΔF| / max(d_X, d_Y) 최대값"""
    max_ratio: float
    constant: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.constant + 1e-9


def lipschitz_audit(model: LatentModel, n_pairs: int = 10_000, seed: Optional[int] = None) -> LipschitzAudit:
    """무작위 (i,u), (j,v) 쌍으로 f의 립시츠 조건 확인"""
    _check_samples(n_pairs)
    rng = make_generator(model.config.seed if seed is None else seed, STREAM_ORACLE, _SUB_LIPSCHITZ)
    X, Y = model.feature_space()
    i = rng.integers(0, model.n_items, n_pairs)
    j = rng.integers(0, model.n_items, n_pairs)
    u = rng.integers(0, model.n_users, n_pairs)
    v = rng.integers(0, model.n_users, n_pairs)

    numerator = np.abs(model.F[i, u] - model.F[j, v])
    denominator = np.maximum(np.linalg.norm(X[i] - X[j], axis=1), np.linalg.norm(Y[u] - Y[v], axis=1))
    ratios = np.zeros(n_pairs)
    positive = denominator > 0
    ratios[positive] = numerator[positive] / denominator[positive]
    # 같은 점 쌍은 F도 같아야 함
    ratios[~positive & (numerator > 1e-12)] = np.inf

    audit = LipschitzAudit(max_ratio=float(ratios.max()), constant=LIPSCHITZ_CONSTANT, n_pairs=n_pairs)
    logger.debug(f"Lipschitz audit: max ratio {audit.max_ratio:.4f} over {n_pairs} pairs")
    return audit


def discerning_rate(model: LatentModel, u: int, eps: float, n_samples: int = 10_000,
                    seed: Optional[int] = None) -> float:
    """r̂(ε) = Pr(|f_u(x1) − f_u(x2)| ≤ 2ε)"""
    _check_samples(n_samples)
    if eps <= 0:
        raise ValidationException(f"eps must be positive: {eps}", field="eps", value=eps)
    rng = make_generator(model.config.seed if seed is None else seed, STREAM_ORACLE, _SUB_DISCERN, u)
    f1 = model.latent_f(model.sample_items(rng, n_samples), u)
    f2 = model.latent_f(model.sample_items(rng, n_samples), u)
    return float(np.mean(np.abs(f1 - f2) <= 2.0 * eps))


__all__ = [
    "LIPSCHITZ_CONSTANT",
    "LipschitzAudit",
    "counterexample_pair",
    "discerning_rate",
    "lift_inner_product",
    "lipschitz_audit",
    "pairwise_agreement",
    "rho_oracle",
]
