"""
실험 설정 관리

실험 하나는 JSON 문서 하나로 기술된다. 환경 변수는 읽지 않는다.
`load_config`는 파일 경로 또는 configs/ 의 프리셋 이름을 받는다.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from .exceptions import ConfigurationException, ValidationException
from .data.preprocessing import MonotoneTransformSpec, SplitSpec
from .ranking.agreement import AgreementMode
from .ranking.ranker import RankerConfig, VoteWeighting
from .synth.generator import LatentModelConfig

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent.parent / "configs"

VALID_MODES = ("synth_consistency", "real_pipeline", "grid_search")
VALID_SOURCES = ("movielens_dat", "csv_triples", "synthetic")
SELECTION_METRICS = ("kendall_tau", "ndcg_at_k")
SWEEP_PRESETS = ("thm1-continuous", "thm3-discrete")


def _matches(value: Any, hint: Any) -> bool:
    """JSON 값이 필드 타입 힌트와 맞는지 (bool은 숫자로 보지 않음)"""
    origin = get_origin(hint)
    if hint is Any:
        return True
    if origin is Union:
        return any(_matches(value, arg) for arg in get_args(hint))
    if hint is type(None):
        return value is None
    if origin in (list, tuple):
        args = get_args(hint)
        return isinstance(value, (list, tuple)) and (not args or all(_matches(v, args[0]) for v in value))
    if origin is dict:
        return isinstance(value, dict)
    if hint is bool:
        return isinstance(value, bool)
    if hint is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if hint is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if hint is str:
        return isinstance(value, str)
    if isinstance(hint, type) and issubclass(hint, Enum):
        return isinstance(value, (str, hint))
    return True


def _check_section(section: str, factory: Any, data: Any) -> Dict[str, Any]:
    """섹션이 객체이고 각 값이 데이터클래스 필드 타입과 맞는지 검사"""
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationException(f"{section} must be an object, got {type(data).__name__}",
                                     config_section=section)
    hints = get_type_hints(factory)
    for f in fields(factory):
        if f.name in data and not _matches(data[f.name], hints[f.name]):
            raise ConfigurationException(
                f"{section}.{f.name} has the wrong type: {data[f.name]!r}",
                config_key=f.name, config_section=section,
            )
    return data


@dataclass
class PopularityConfig:
    """인기도 필터 설정"""
    top_items: int
    n_users: Optional[int] = None
    min_user_ratings: int = 0


@dataclass
class DatasetConfig:
    """데이터셋 설정"""
    source: str = "synthetic"
    path: Optional[str] = None
    popularity: Optional[PopularityConfig] = None
    latent: Optional[LatentModelConfig] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "path": self.path,
            "popularity": asdict(self.popularity) if self.popularity else None,
            "latent": self.latent.to_dict() if self.latent else None,
        }


@dataclass
class PreprocessConfig:
    """전처리 설정"""
    quantize: bool = False
    monotone_transform: bool = False
    a_choices: List[int] = field(default_factory=lambda: [1, 2, 10, 20])


@dataclass
class GridConfig:
    """(β, k, 가중 방식) 그리드"""
    beta: List[int] = field(default_factory=lambda: [2])
    k: List[int] = field(default_factory=lambda: [1])
    weighting: List[str] = field(default_factory=lambda: [VoteWeighting.UNIFORM.value])
    agreement_mode: str = AgreementMode.ALL_PAIRS.value
    selection_metric: str = "kendall_tau"

    def points(self, seed: int) -> List[RankerConfig]:
        """정규 순서: β 오름차순, k 오름차순, uniform 먼저"""
        order = {VoteWeighting.UNIFORM: 0, VoteWeighting.AGREEMENT_WEIGHTED: 1}
        weightings = sorted({VoteWeighting(w) for w in self.weighting}, key=order.__getitem__)
        return [
            RankerConfig(beta=b, k=k, vote_weighting=w, agreement_mode=self.agreement_mode, seed=seed)
            for b in sorted(set(self.beta))
            for k in sorted(set(self.k))
            for w in weightings
        ]


@dataclass
class EvaluationConfig:
    """평가 지표 설정"""
    k: int = 5
    relevance_threshold: float = 5.0


@dataclass
class SweepConfig:
    """합성 일관성 스윕 설정"""
    n_items: int = 100
    n_users: List[int] = field(default_factory=lambda: [200, 800, 3200])
    p: Optional[float] = None
    p_exponent: float = 0.3
    epsilon: Optional[float] = None
    separation_fraction: float = 0.2
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    preset: str = "thm1-continuous"
    agreement_mode: str = AgreementMode.NONOVERLAPPING.value
    check_consistency: bool = False
    latent: Dict[str, Any] = field(default_factory=dict)

    def probability(self, n_users: int) -> float:
        """p가 없으면 max(n1^−e, n2^−e)"""
        if self.p is not None:
            return self.p
        return min(1.0, max(self.n_items ** -self.p_exponent, n_users ** -self.p_exponent))

    def latent_config(self, n_users: int, seed: int) -> LatentModelConfig:
        payload = dict(_check_section("sweep.latent", LatentModelConfig, self.latent))
        payload.update({"n_items": self.n_items, "n_users": n_users, "p": self.probability(n_users), "seed": seed})
        return LatentModelConfig.from_dict(payload)


@dataclass
class OutputConfig:
    """리포트 출력 설정"""
    directory: str = "results"
    name: str = "report"


@dataclass
class ExperimentConfig:
    """통합 실험 설정"""
    mode: str = "real_pipeline"
    seed: int = 0
    threads: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        """교차 필드 유효성 검증"""
        if self.mode not in VALID_MODES:
            raise ConfigurationException(f"Unknown mode: {self.mode}", config_key="mode")
        if not 0 <= self.seed < (1 << 64):
            raise ConfigurationException("seed must be a 64-bit unsigned integer", config_key="seed")
        if self.threads < 1:
            raise ConfigurationException("threads must be >= 1", config_key="threads")
        if self.dataset.source not in VALID_SOURCES:
            raise ConfigurationException(
                f"Unknown dataset source: {self.dataset.source}", config_key="source", config_section="dataset"
            )
        if self.dataset.source != "synthetic" and not self.dataset.path:
            raise ConfigurationException("dataset.path is required for file sources", config_key="path",
                                         config_section="dataset")
        needs_latent = self.mode != "synth_consistency" and self.dataset.source == "synthetic"
        if needs_latent and self.dataset.latent is None:
            raise ConfigurationException("dataset.latent is required for the synthetic source", config_key="latent",
                                         config_section="dataset")
        if not (self.grid.beta and self.grid.k and self.grid.weighting):
            raise ConfigurationException("grid lists must be nonempty", config_section="grid")
        if self.grid.selection_metric not in SELECTION_METRICS:
            raise ConfigurationException(
                f"selection_metric must be one of {SELECTION_METRICS}", config_key="selection_metric",
                config_section="grid"
            )
        if self.evaluation.k < 1:
            raise ConfigurationException("evaluation.k must be >= 1", config_key="k", config_section="evaluation")
        if self.sweep.preset not in SWEEP_PRESETS:
            raise ConfigurationException(f"sweep.preset must be one of {SWEEP_PRESETS}", config_key="preset",
                                         config_section="sweep")
        if not (self.sweep.n_users and self.sweep.seeds):
            raise ConfigurationException("sweep lists must be nonempty", config_section="sweep")
        if not 0.0 < self.sweep.separation_fraction < 1.0:
            raise ConfigurationException("separation_fraction must be in (0, 1)", config_key="separation_fraction",
                                         config_section="sweep")
        try:
            self.grid.points(self.seed)
            self.sweep.latent_config(self.sweep.n_users[0], self.seed)
        except ValidationException as e:
            raise ConfigurationException(e.message, config_key=e.field, details=e.to_dict())
        except (TypeError, ValueError) as e:
            raise ConfigurationException(f"Invalid grid or sweep settings: {e}")

    def split_spec(self) -> SplitSpec:
        return replace(self.split, seed=self.seed)

    def transform_spec(self) -> MonotoneTransformSpec:
        return MonotoneTransformSpec(a_choices=tuple(self.preprocess.a_choices), seed=self.seed)

    def with_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None,
                       out: Optional[str] = None) -> "ExperimentConfig":
        """CLI 플래그 적용"""
        updated = replace(self)
        if seed is not None:
            updated.seed = seed
        if threads is not None:
            updated.threads = threads
        if out is not None:
            updated.output = replace(self.output, directory=out)
        updated.validate()
        return updated

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "dataset": self.dataset.to_dict(),
            "split": {k: v for k, v in self.split.to_dict().items() if k != "seed"},
            "preprocess": asdict(self.preprocess),
            "grid": asdict(self.grid),
            "evaluation": asdict(self.evaluation),
            "sweep": asdict(self.sweep),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentConfig":
        """JSON 문서 → 설정 (알 수 없는 키는 오류)"""
        sections = {
            "mode", "seed", "threads", "dataset", "split", "preprocess", "grid", "evaluation", "sweep", "output",
        }
        unknown = set(payload) - sections
        if unknown:
            raise ConfigurationException(f"Unknown config keys: {sorted(unknown)}", config_key=sorted(unknown)[0])

        def build(section: str, factory, data: Any):
            data = _check_section(section, factory, data)
            try:
                return factory(**data)
            except TypeError as e:
                raise ConfigurationException(f"Invalid {section} section: {e}", config_section=section)
            except ValidationException as e:
                raise ConfigurationException(e.message, config_key=e.field, config_section=section,
                                             details=e.to_dict())

        dataset_payload = dict(_check_section("dataset", DatasetConfig, payload.get("dataset")))
        popularity = dataset_payload.pop("popularity", None)
        latent = dataset_payload.pop("latent", None)
        dataset = build("dataset", DatasetConfig, dataset_payload)
        if popularity is not None:
            dataset.popularity = build("dataset.popularity", PopularityConfig, popularity)
        if latent is not None:
            dataset.latent = build("dataset.latent", LatentModelConfig, latent)

        split_payload = dict(_check_section("split", SplitSpec, payload.get("split")))
        if "seed" in split_payload:
            raise ConfigurationException("split.seed is derived from the top-level seed", config_key="seed",
                                         config_section="split")

        try:
            seed = int(payload.get("seed", 0))
            threads = int(payload.get("threads", 1))
        except (TypeError, ValueError) as e:
            raise ConfigurationException(f"seed and threads must be integers: {e}", config_key="seed/threads")

        config = cls(
            mode=payload.get("mode", "real_pipeline"),
            seed=seed,
            threads=threads,
            dataset=dataset,
            split=build("split", SplitSpec, split_payload),
            preprocess=build("preprocess", PreprocessConfig, payload.get("preprocess")),
            grid=build("grid", GridConfig, payload.get("grid")),
            evaluation=build("evaluation", EvaluationConfig, payload.get("evaluation")),
            sweep=build("sweep", SweepConfig, payload.get("sweep")),
            output=build("output", OutputConfig, payload.get("output")),
        )
        config.validate()
        return config


def list_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def load_config(path_or_preset: Union[str, Path]) -> ExperimentConfig:
    """설정 파일 또는 프리셋 이름으로 설정 로드"""
    path = Path(path_or_preset)
    if not path.exists():
        preset = PRESET_DIR / f"{path_or_preset}.json"
        if not preset.exists():
            raise ConfigurationException(
                f"Config file or preset not found: {path_or_preset} (presets: {', '.join(list_presets())})",
                config_key="config",
            )
        path = preset
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationException(f"Invalid JSON in {path}: {e}", config_key="config")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationException(f"Cannot read config {path}: {e}", config_key="config")
    if not isinstance(payload, dict):
        raise ConfigurationException(f"Config document must be an object: {path}", config_key="config")
    config = ExperimentConfig.from_dict(payload)
    logger.debug(f"Loaded config {path} (mode={config.mode})")
    return config
