"""
비모수 잠재 모델 시뮬레이터

x_i ~ P_X, y_u ~ P_Y, F = [f(x_i, y_u)], H = [g_u(F)], Ω ~ Bernoulli(p)
"""
import hashlib
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.models import SparseRatingMatrix
from ..exceptions import InvalidModelConfigException, ValidationException
from ..utils.rng import STREAM_MODEL, make_generator
from .geometry import lift_inner_product, pairwise_distances, sample_unit_ball

logger = logging.getLogger(__name__)

# 하위 스트림
_SUB_X, _SUB_Y, _SUB_G, _SUB_MASK, _SUB_POINTS = range(5)

# 내적 모델의 리프트 반경 (특징은 단위 공에서 샘플)
LIFT_RADIUS = 1.0


class Geometry(str, Enum):
    UNIT_BALL_DISTANCE = "unit_ball_distance"
    FINITE_POINTS = "finite_points"
    INNER_PRODUCT = "inner_product"


class GFamily(str, Enum):
    IDENTITY = "identity"
    RANDOM_INCREASING = "random_increasing"
    STEP_THRESHOLDS = "step_thresholds"


@dataclass
class LatentModelConfig:
    """잠재 모델 설정"""
    d: int = 2
    geometry: Geometry = Geometry.UNIT_BALL_DISTANCE
    g_family: GFamily = GFamily.IDENTITY
    n_items: int = 100
    n_users: int = 100
    p: float = 1.0
    seed: int = 0
    levels: int = 5
    bound: float = 2.0
    knots: int = 8
    n_points: int = 20
    points_x: Optional[List[List[float]]] = None
    points_y: Optional[List[List[float]]] = None

    def __post_init__(self):
        """초기화 후 유효성 검증"""
        try:
            self.geometry = Geometry(self.geometry)
            self.g_family = GFamily(self.g_family)
        except ValueError as e:
            raise InvalidModelConfigException(str(e), field="geometry/g_family")

        if self.d < 1:
            raise InvalidModelConfigException("d must be >= 1", field="d", value=self.d)
        if self.n_items < 1 or self.n_users < 1:
            raise InvalidModelConfigException("n_items and n_users must be >= 1", field="n_items/n_users")
        if not 0.0 < self.p <= 1.0:
            raise InvalidModelConfigException(f"p must be in (0, 1]: {self.p}", field="p", value=self.p)
        if self.bound <= 0:
            raise InvalidModelConfigException("bound N must be positive", field="bound", value=self.bound)
        if self.g_family == GFamily.STEP_THRESHOLDS and self.levels < 2:
            raise InvalidModelConfigException("levels L must be >= 2", field="levels", value=self.levels)
        if self.knots < 2:
            raise InvalidModelConfigException("knots must be >= 2", field="knots", value=self.knots)
        if self.n_points < 1:
            raise InvalidModelConfigException("n_points must be >= 1", field="n_points", value=self.n_points)
        for name in ("points_x", "points_y"):
            points = getattr(self, name)
            if points is None:
                continue
            array = np.asarray(points, dtype=np.float64)
            if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] != self.d:
                raise InvalidModelConfigException(f"{name} must be a nonempty list of {self.d}-vectors", field=name)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["geometry"] = self.geometry.value
        payload["g_family"] = self.g_family.value
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "LatentModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise InvalidModelConfigException(f"Unknown latent model fields: {sorted(unknown)}", field="latent")
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class LatentModel:
    """샘플된 잠재 모델 (배열은 읽기 전용)"""
    config: LatentModelConfig
    X: np.ndarray
    Y: np.ndarray
    F: np.ndarray
    H: np.ndarray
    mask: np.ndarray
    thresholds: Optional[np.ndarray] = None
    knots_x: Optional[np.ndarray] = None
    knots_y: Optional[np.ndarray] = None
    points_x: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_items(self) -> int:
        return self.F.shape[0]

    @property
    def n_users(self) -> int:
        return self.F.shape[1]

    def feature_space(self) -> Tuple[np.ndarray, np.ndarray]:
        """f가 거리로 작동하는 좌표 (내적 모델은 리프트된 좌표)"""
        if self.config.geometry == Geometry.INNER_PRODUCT:
            return lift_inner_product(self.X, self.Y, radius=LIFT_RADIUS)
        return self.X, self.Y

    def latent_f(self, X: np.ndarray, u: int) -> np.ndarray:
        """새 아이템 특징 X에 대한 f(x, y_u)"""
        y = self.Y[u:u + 1]
        if self.config.geometry == Geometry.INNER_PRODUCT:
            X, y = lift_inner_product(X, y, radius=LIFT_RADIUS)
        return pairwise_distances(X, y)[:, 0]

    def apply_g(self, u: int, f: np.ndarray, thresholds: Optional[np.ndarray] = None) -> np.ndarray:
        """g_u(f). 계단 함수는 thresholds로 임의 임계값 지정 가능"""
        f = np.asarray(f, dtype=np.float64)
        family = self.config.g_family
        if family == GFamily.IDENTITY:
            return f.copy()
        if family == GFamily.RANDOM_INCREASING:
            return np.interp(f, self.knots_x[u], self.knots_y[u])
        a = self.thresholds[u] if thresholds is None else np.asarray(thresholds, dtype=np.float64)
        return 1.0 + np.searchsorted(a, f, side="right")

    def sample_items(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """P_X에서 새 아이템 특징"""
        if self.config.geometry == Geometry.FINITE_POINTS:
            return self.points_x[rng.integers(0, len(self.points_x), n)]
        return sample_unit_ball(rng, n, self.config.d)

    def observed_matrix(self) -> SparseRatingMatrix:
        """P_Ω(H)"""
        items, users = np.nonzero(self.mask)
        return SparseRatingMatrix(self.n_items, self.n_users, items, users, self.H[items, users])

    def fingerprint(self) -> str:
        digest = hashlib.sha1()
        for array in (self.X, self.Y, self.F, self.H, self.mask):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()

    def to_dict(self, include_tensors: bool = False) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"config": self.config.to_dict(), "fingerprint": self.fingerprint()}
        if include_tensors:
            payload.update({
                "X": self.X.tolist(),
                "Y": self.Y.tolist(),
                "H": self.H.tolist(),
                "mask": self.mask.astype(int).tolist(),
            })
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "LatentModel":
        """설정과 시드로 재생성 후 지문 확인"""
        model = sample_model(LatentModelConfig.from_dict(payload["config"]))
        expected = payload.get("fingerprint")
        if expected is not None and expected != model.fingerprint():
            raise ValidationException("Regenerated model does not match stored fingerprint", field="fingerprint")
        return model


def _readonly(array: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if array is not None:
        array.setflags(write=False)
    return array


def _sample_points(cfg: LatentModelConfig, explicit: Optional[List[List[float]]],
                   rng: np.random.Generator) -> np.ndarray:
    if explicit is not None:
        return np.asarray(explicit, dtype=np.float64)
    return sample_unit_ball(rng, cfg.n_points, cfg.d)


def _sample_knots(cfg: LatentModelConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """[−N, N]을 덮는 K개 매듭, 양의 기울기"""
    n, k, bound = cfg.n_users, cfg.knots, cfg.bound
    interior = np.sort(rng.uniform(-bound, bound, (n, k - 2)), axis=1)
    knots_x = np.hstack([np.full((n, 1), -bound), interior, np.full((n, 1), bound)])
    increments = rng.uniform(0.1, 1.0, (n, k - 1))
    offset = rng.uniform(-1.0, 1.0, (n, 1))
    knots_y = np.hstack([offset, offset + np.cumsum(increments, axis=1)])
    return knots_x, knots_y


def sample_model(cfg: LatentModelConfig) -> LatentModel:
    """잠재 모델 샘플 (시드 결정적)"""
    rng_x = make_generator(cfg.seed, STREAM_MODEL, _SUB_X)
    rng_y = make_generator(cfg.seed, STREAM_MODEL, _SUB_Y)
    rng_g = make_generator(cfg.seed, STREAM_MODEL, _SUB_G)
    rng_mask = make_generator(cfg.seed, STREAM_MODEL, _SUB_MASK)
    rng_points = make_generator(cfg.seed, STREAM_MODEL, _SUB_POINTS)

    points_x = None
    if cfg.geometry == Geometry.FINITE_POINTS:
        points_x = _sample_points(cfg, cfg.points_x, rng_points)
        points_y = _sample_points(cfg, cfg.points_y, rng_points)
        X = points_x[rng_x.integers(0, len(points_x), cfg.n_items)]
        Y = points_y[rng_y.integers(0, len(points_y), cfg.n_users)]
    else:
        X = sample_unit_ball(rng_x, cfg.n_items, cfg.d)
        Y = sample_unit_ball(rng_y, cfg.n_users, cfg.d)

    if cfg.geometry == Geometry.INNER_PRODUCT:
        F = pairwise_distances(*lift_inner_product(X, Y, radius=LIFT_RADIUS))
    else:
        F = pairwise_distances(X, Y)

    if cfg.g_family != GFamily.IDENTITY and np.max(np.abs(F)) > cfg.bound:
        raise InvalidModelConfigException(
            f"|f| reaches {np.max(np.abs(F)):.4f}, above bound N={cfg.bound}", field="bound", value=cfg.bound
        )

    thresholds = knots_x = knots_y = None
    if cfg.g_family == GFamily.IDENTITY:
        H = F.copy()
    elif cfg.g_family == GFamily.RANDOM_INCREASING:
        knots_x, knots_y = _sample_knots(cfg, rng_g)
        H = np.empty_like(F)
        for u in range(cfg.n_users):
            H[:, u] = np.interp(F[:, u], knots_x[u], knots_y[u])
    else:
        thresholds = np.sort(rng_g.uniform(-cfg.bound, cfg.bound, (cfg.n_users, cfg.levels - 1)), axis=1)
        H = np.empty_like(F)
        for u in range(cfg.n_users):
            H[:, u] = 1.0 + np.searchsorted(thresholds[u], F[:, u], side="right")

    mask = rng_mask.random((cfg.n_items, cfg.n_users)) < cfg.p

    logger.info(
        f"Sampled latent model: {cfg.geometry.value}/{cfg.g_family.value}, "
        f"{cfg.n_items} items x {cfg.n_users} users, {int(mask.sum())} observed"
    )
    return LatentModel(
        config=cfg,
        X=_readonly(X),
        Y=_readonly(Y),
        F=_readonly(F),
        H=_readonly(H),
        mask=_readonly(mask),
        thresholds=_readonly(thresholds),
        knots_x=_readonly(knots_x),
        knots_y=_readonly(knots_y),
        points_x=_readonly(points_x),
    )
