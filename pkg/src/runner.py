"""
선호 완성 실험 실행기

verb(synth, run, grid, eval, split)별 핸들러를 등록하고, 그리드 포인트/재표본/스윕 실행을
스레드 풀에 분배한다. 결과는 완료 순서와 무관하게 정규 순서로 정렬해 리포트로 쓴다.
"""
import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .core.models import SparseRatingMatrix
from .data.loaders import RatingDataset, parse_ratings
from .data.preprocessing import DataSplit, popularity_filter, quantize, random_monotone_transform, resample_split
from .evaluation.metrics import METRICS, MetricReport, evaluate_rankings
from .evaluation.objectives import (
    consistency_pairs_mask,
    dis_eps,
    eps_consistency_violations,
    normalized_dis_rate,
    separation_epsilon,
)
from .exceptions import EXIT_FAILURE, ConfigurationException, PreferenceCompletionException, exit_code_for
from .ranking.ranker import MultiRank, RankerConfig, VoteWeighting, preset_config
from .synth.generator import sample_model
from .utils.cache import AgreementCache
from .utils.reports import ReportWriter
from .utils.rng import sub_seed

_WEIGHTING_ORDER = {VoteWeighting.UNIFORM: 0, VoteWeighting.AGREEMENT_WEIGHTED: 1}


@dataclass(frozen=True)
class PreparedData:
    """전처리된 데이터셋과 재표본 분할"""
    dataset: RatingDataset
    truth: SparseRatingMatrix
    model_input: SparseRatingMatrix
    splits: List[DataSplit]


@dataclass(frozen=True)
class FitJob:
    """재표본 하나에서 랭커 설정 하나를 학습/평가하는 작업"""
    resample: int
    config: RankerConfig
    train: SparseRatingMatrix
    val: Optional[SparseRatingMatrix]
    test: Optional[SparseRatingMatrix]


@dataclass(frozen=True)
class SweepJob:
    n_users: int
    seed_index: int
    seed: int


def _mean_std(values: Sequence[float]) -> Dict[str, float]:
    finite = np.array([v for v in values if v is not None and not math.isnan(v)], dtype=np.float64)
    if len(finite) == 0:
        return {"mean": float("nan"), "std": float("nan")}
    return {"mean": float(finite.mean()), "std": float(finite.std())}


def _grid_key(config: RankerConfig) -> tuple:
    return (config.beta, config.k, _WEIGHTING_ORDER[config.vote_weighting])


class ExperimentRunner:
    """선호 완성 실험 실행기"""

    def __init__(self, config: ExperimentConfig, verbose: bool = False):
        self.config = config
        self.verbose = verbose
        self.logger = self._setup_logger()
        self.verbs: Dict[str, Callable] = {}
        self.executor: Optional[ThreadPoolExecutor] = None
        self.cache: Optional[AgreementCache] = None
        self.reports: Optional[ReportWriter] = None

        self._register_verbs()

    def _setup_logger(self) -> logging.Logger:
        """로거 설정 (패키지 루트에 핸들러 하나)"""
        root = logging.getLogger(__name__.split(".")[0])
        root.setLevel(logging.DEBUG if self.verbose else logging.INFO)

        if not root.handlers:
            handler = logging.StreamHandler()
            formatter = logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )
            handler.setFormatter(formatter)
            root.addHandler(handler)

        return logging.getLogger(__name__)

    def _register_verbs(self):
        """CLI verb 등록"""
        self.verbs = {
            'synth': self.run_synth_consistency,
            'run': self.run,
            'grid': self.run_grid_search,
            'eval': self.run_eval,
            'split': self.run_split,
        }

    async def startup(self):
        """실행기 시작"""
        self.logger.info(f"Starting experiment runner (threads={self.config.threads})...")
        self.executor = ThreadPoolExecutor(max_workers=self.config.threads, thread_name_prefix="multirank")
        self.cache = AgreementCache()
        self.reports = ReportWriter(self.config.output.directory, self.config.output.name)
        self.reports.initialize()
        self.logger.info("Runner started successfully")

    async def shutdown(self):
        """실행기 종료"""
        if self.executor:
            self.executor.shutdown(wait=True)
            self.executor = None
        if self.cache:
            self.logger.debug(f"Agreement cache: {self.cache.get_cache_info()}")
            self.cache.clear()
        self.logger.info("Runner shutdown complete")

    async def execute(self, verb: str) -> Dict[str, Any]:
        """verb 실행. 실패 시 오류 정보와 종료 코드를 담은 결과 반환"""
        handler = self.verbs.get(verb)
        try:
            if handler is None:
                raise ConfigurationException(f"Unknown verb: {verb}", config_key="verb")
            result = await handler()
            return {"success": True, "verb": verb, **result}
        except PreferenceCompletionException as e:
            self.logger.error(f"{verb} failed: {e.message}")
            return {"success": False, "verb": verb, "error": e.to_dict(), "exit_code": exit_code_for(e)}
        except Exception as e:
            self.logger.exception(f"{verb} failed unexpectedly: {e}")
            error = {"message": str(e), "error_code": "INTERNAL_ERROR", "details": {},
                     "exception_type": type(e).__name__}
            return {"success": False, "verb": verb, "error": error, "exit_code": EXIT_FAILURE}

    async def _map(self, function: Callable, jobs: Sequence[Any]) -> List[Any]:
        """작업을 스레드 풀에서 실행. 결과는 jobs 순서"""
        loop = asyncio.get_running_loop()
        futures = [loop.run_in_executor(self.executor, function, job) for job in jobs]
        return list(await asyncio.gather(*futures))

    # 데이터 준비
    def _dataset_label(self) -> str:
        dataset = self.config.dataset
        return "synthetic" if dataset.source == "synthetic" else Path(dataset.path).stem

    def _load_dataset(self) -> RatingDataset:
        dataset = self.config.dataset
        if dataset.source == "synthetic":
            model = sample_model(replace(dataset.latent, seed=self.config.seed))
            matrix = model.observed_matrix()
            return RatingDataset(
                matrix=matrix,
                user_ids=[str(u) for u in range(matrix.n_users)],
                item_ids=[str(i) for i in range(matrix.n_items)],
            )
        triples = parse_ratings(dataset.path, dataset.source)
        if dataset.popularity is not None:
            triples = popularity_filter(
                triples,
                top_items=dataset.popularity.top_items,
                n_users=dataset.popularity.n_users,
                min_user_ratings=dataset.popularity.min_user_ratings,
                seed=self.config.seed,
            )
        return RatingDataset.from_triples(triples)

    def _prepare(self) -> PreparedData:
        """양자화 → (선택) 단조 변환. 분할과 평가 정답은 변환 전 값 기준"""
        dataset = self._load_dataset()
        truth = dataset.matrix
        if self.config.preprocess.quantize:
            truth = quantize(truth)
        model_input = truth
        if self.config.preprocess.monotone_transform:
            model_input = random_monotone_transform(truth, self.config.transform_spec())
        splits = resample_split(truth, self.config.split_spec())
        self.cache.max_entries = max(self.cache.max_entries, truth.n_users)
        return PreparedData(dataset=dataset, truth=truth, model_input=model_input, splits=splits)

    def _fit_jobs(self, prepared: PreparedData, configs: Sequence[RankerConfig],
                  resamples: Sequence[int], with_val: bool = True, with_test: bool = True) -> List[FitJob]:
        jobs = []
        for r in resamples:
            split = prepared.splits[r]
            if split.n_users == 0:
                self.logger.warning(f"Resample {r} has no users left, skipping")
                continue
            train = split.with_source(prepared.model_input).train
            for config in configs:
                jobs.append(FitJob(
                    resample=r,
                    config=config,
                    train=train,
                    val=split.val if with_val else None,
                    test=split.test if with_test else None,
                ))
        return jobs

    def _fit_and_score(self, job: FitJob) -> Dict[str, Any]:
        """학습 후 검증/테스트 지표"""
        eval_cfg = self.config.evaluation
        result = MultiRank(job.config, self.cache).fit(job.train)
        row: Dict[str, Any] = {
            "resample": job.resample,
            "beta": job.config.beta,
            "k": job.config.k,
            "weighting": job.config.vote_weighting.value,
            "algorithm": job.config.label,
            "coin_flips": result.total_coin_flips,
            "voted_pairs": result.total_voted_pairs,
        }
        if job.val is not None:
            report = evaluate_rankings(result.rankings, job.val, eval_cfg.k, eval_cfg.relevance_threshold)
            row["val"] = report.summary()
            if report.count(self.config.grid.selection_metric) == 0:
                self.logger.warning(
                    f"Resample {job.resample} {job.config.label} beta={job.config.beta} k={job.config.k}: "
                    f"no validation user supports {self.config.grid.selection_metric}"
                )
        if job.test is not None:
            row["test_report"] = evaluate_rankings(result.rankings, job.test, eval_cfg.k,
                                                   eval_cfg.relevance_threshold)
        self.logger.info(
            f"Resample {job.resample} {job.config.label} beta={job.config.beta} k={job.config.k}: "
            f"{result.total_coin_flips} coin flips"
        )
        return row

    def _selection_score(self, row: Dict[str, Any]) -> float:
        score = row["val"][self.config.grid.selection_metric]["mean"]
        return float("-inf") if score is None or math.isnan(score) else score

    def _select_best(self, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        """검증 점수 최대, 동점은 작은 β, 작은 k, uniform 우선"""
        return min(
            rows,
            key=lambda r: (-self._selection_score(r), r["beta"], r["k"],
                           _WEIGHTING_ORDER[VoteWeighting(r["weighting"])]),
        )

    @staticmethod
    def _grid_table(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
        table = []
        for row in rows:
            entry = {key: row[key] for key in ("resample", "beta", "k", "weighting", "algorithm",
                                               "coin_flips", "voted_pairs")}
            for metric, stats in row["val"].items():
                entry[f"val_{metric}"] = stats["mean"]
            table.append(entry)
        return sorted(table, key=lambda e: (e["resample"], e["beta"], e["k"],
                                            _WEIGHTING_ORDER[VoteWeighting(e["weighting"])]))

    # verb 구현
    async def run(self) -> Dict[str, Any]:
        """설정의 mode에 따라 실행"""
        dispatch = {
            "synth_consistency": self.run_synth_consistency,
            "real_pipeline": self.run_real_pipeline,
            "grid_search": self.run_grid_search,
        }
        return await dispatch[self.config.mode]()

    async def run_grid_search(self) -> Dict[str, Any]:
        """첫 재표본의 train으로 학습, val로 그리드 선택"""
        prepared = self._prepare()
        points = self.config.grid.points(self.config.seed)
        jobs = self._fit_jobs(prepared, points, [0], with_test=False)
        if not jobs:
            raise PreferenceCompletionException("No users left for grid search", error_code="NO_USERS")
        rows = await self._map(self._fit_and_score, jobs)
        best = self._select_best(rows)
        table = self._grid_table(rows)

        payload = {
            "verb": "grid",
            "config": self.config.to_dict(),
            "selection_metric": self.config.grid.selection_metric,
            "best": {key: best[key] for key in ("beta", "k", "weighting", "algorithm")},
            "best_val_score": self._selection_score(best),
            "table": table,
        }
        self.reports.write_json(payload, "grid")
        self.reports.write_csv(table, "grid")
        self.logger.info(f"Best grid point: {payload['best']} ({payload['best_val_score']:.4f})")
        return {"best": payload["best"], "best_val_score": payload["best_val_score"], "grid_points": len(table)}

    def _aggregate(self, reports: List[MetricReport]) -> Dict[str, Dict[str, float]]:
        """재표본 간 평균/표준편차 (재표본별 사용자 평균 기준)"""
        return {name: _mean_std([r.mean(name) for r in reports]) for name in METRICS}

    def _metric_rows(self, resample_results: List[Dict[str, Any]],
                     aggregate: Dict[str, Dict[str, float]], algorithm: str) -> List[Dict[str, Any]]:
        rows = []
        label = self._dataset_label()
        for result in resample_results:
            report: MetricReport = result["test_report"]
            rows.extend(report.to_rows(
                dataset=label, algorithm=result["algorithm"], beta=result["beta"], k=result["k"],
                seed=self.config.seed, resample=result["resample"],
            ))
        for name in METRICS:
            rows.append({
                "dataset": label, "algorithm": algorithm, "beta": None, "k": None, "seed": self.config.seed,
                "resample": "all", "metric": name, "mean": aggregate[name]["mean"],
                "std": aggregate[name]["std"], "users": None,
            })
        return rows

    @staticmethod
    def _resample_entry(result: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "resample": result["resample"],
            "best": {key: result[key] for key in ("beta", "k", "weighting", "algorithm")},
            "test": result["test_report"].to_dict(),
        }

    async def run_real_pipeline(self) -> Dict[str, Any]:
        """재표본마다 val 그리드 선택 후 test 평가, 재표본 집계"""
        prepared = self._prepare()
        points = self.config.grid.points(self.config.seed)
        resamples = list(range(len(prepared.splits)))
        rows = await self._map(self._fit_and_score, self._fit_jobs(prepared, points, resamples))

        chosen = []
        for r in resamples:
            candidates = [row for row in rows if row["resample"] == r]
            if candidates:
                chosen.append(self._select_best(candidates))
        if not chosen:
            raise PreferenceCompletionException("Every resample was empty", error_code="NO_USERS")

        aggregate = self._aggregate([c["test_report"] for c in chosen])
        label = "/".join(sorted({c["algorithm"] for c in chosen}))
        payload = {
            "verb": "run",
            "config": self.config.to_dict(),
            "dataset": {
                "label": self._dataset_label(),
                "n_items": prepared.truth.n_items,
                "n_users": prepared.truth.n_users,
                "n_ratings": prepared.truth.nnz,
            },
            "resamples": [self._resample_entry(c) for c in chosen],
            "grid": self._grid_table(rows),
            "aggregate": aggregate,
        }
        self.reports.write_json(payload, "run")
        self.reports.write_csv(self._metric_rows(chosen, aggregate, label), "run")
        return {"aggregate": aggregate, "resamples": len(chosen)}

    async def run_eval(self) -> Dict[str, Any]:
        """그리드 없이 고정 설정 하나를 모든 재표본 test에서 평가"""
        points = self.config.grid.points(self.config.seed)
        if len(points) > 1:
            self.logger.warning(f"eval uses only the first of {len(points)} grid points")
        point = points[0]
        prepared = self._prepare()
        jobs = self._fit_jobs(prepared, [point], range(len(prepared.splits)), with_val=False)
        results = await self._map(self._fit_and_score, jobs)
        if not results:
            raise PreferenceCompletionException("Every resample was empty", error_code="NO_USERS")

        aggregate = self._aggregate([r["test_report"] for r in results])
        payload = {
            "verb": "eval",
            "config": self.config.to_dict(),
            "ranker": point.to_dict(),
            "resamples": [self._resample_entry(r) for r in results],
            "aggregate": aggregate,
        }
        self.reports.write_json(payload, "eval")
        self.reports.write_csv(self._metric_rows(results, aggregate, point.label), "eval")
        return {"aggregate": aggregate, "resamples": len(results)}

    async def run_split(self) -> Dict[str, Any]:
        """분할 매니페스트만 기록"""
        prepared = self._prepare()
        payload = {
            "verb": "split",
            "config": self.config.to_dict(),
            "n_items": prepared.truth.n_items,
            "n_users": prepared.truth.n_users,
            "user_ids": prepared.dataset.user_ids,
            "item_ids": prepared.dataset.item_ids,
            "splits": [split.manifest() for split in prepared.splits],
        }
        path = self.reports.write_json(payload, "split")
        return {"manifest": str(path), "resamples": len(prepared.splits)}

    # 합성 일관성 스윕
    def _sweep_jobs(self) -> List[SweepJob]:
        sweep = self.config.sweep
        return [
            SweepJob(n_users=n2, seed_index=i, seed=s)
            for n2 in sorted(set(sweep.n_users))
            for i, s in enumerate(sweep.seeds)
        ]

    def _run_sweep_job(self, job: SweepJob) -> Dict[str, Any]:
        sweep = self.config.sweep
        model = sample_model(sweep.latent_config(job.n_users, sub_seed(self.config.seed, job.n_users, job.seed)))
        m = model.observed_matrix()
        ranker = preset_config(
            m, sweep.preset, seed=sub_seed(self.config.seed, job.n_users, job.seed, 1),
            agreement_mode=sweep.agreement_mode,
        )
        result = MultiRank(ranker).fit(m)

        eps = sweep.epsilon if sweep.epsilon is not None else separation_epsilon(model.F, sweep.separation_fraction)
        dis = dis_eps(result.rankings, model.F, model.H, 2.0 * eps)
        row = {
            "n_items": model.n_items,
            "n_users": job.n_users,
            "seed": job.seed,
            "p": model.config.p,
            "p_hat": m.density(),
            "beta": ranker.beta,
            "k": ranker.k,
            "epsilon": eps,
            "dis_2eps": dis,
            "rate": normalized_dis_rate(dis, model.n_items, job.n_users),
            "coin_flips": result.total_coin_flips,
        }
        if sweep.check_consistency:
            T = consistency_pairs_mask(model.F, model.H, 2.0 * eps)
            row["consistency_violations"] = len(eps_consistency_violations(result.rankings, model.Y, eps / 2.0, T))
        self.logger.info(
            f"Sweep n2={job.n_users} seed={job.seed}: dis_2eps={dis}, rate={row['rate']:.5f}"
        )
        return row

    async def run_synth_consistency(self) -> Dict[str, Any]:
        """n2 스윕마다 dis_2ε 비율의 시드 평균/표준편차"""
        rows = await self._map(self._run_sweep_job, self._sweep_jobs())
        summary = []
        for n2 in sorted({row["n_users"] for row in rows}):
            group = [row for row in rows if row["n_users"] == n2]
            stats = _mean_std([row["rate"] for row in group])
            summary.append({
                "n_users": n2,
                "mean_rate": stats["mean"],
                "std_rate": stats["std"],
                "mean_dis_2eps": float(np.mean([row["dis_2eps"] for row in group])),
                "runs": len(group),
            })
        means = [entry["mean_rate"] for entry in summary]
        nonincreasing = all(b <= a + 1e-12 for a, b in zip(means, means[1:]))

        payload = {
            "verb": "synth",
            "config": self.config.to_dict(),
            "runs": rows,
            "summary": summary,
            "nonincreasing": nonincreasing,
        }
        self.reports.write_json(payload, "synth")
        self.reports.write_csv(rows, "synth")
        return {"summary": summary, "nonincreasing": nonincreasing}
