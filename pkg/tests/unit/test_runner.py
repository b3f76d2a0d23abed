"""
TDD 테스트: 실험 실행기 테스트
"""
import json
import math

import pandas as pd
import pytest
from src.config import ExperimentConfig
from src.runner import ExperimentRunner, _mean_std


def tiny_config(tmp_path, **overrides) -> ExperimentConfig:
    """작은 합성 데이터셋 설정"""
    payload = {
        "mode": "grid_search",
        "seed": 3,
        "threads": 2,
        "dataset": {
            "source": "synthetic",
            "latent": {"d": 2, "g_family": "step_thresholds", "n_items": 12, "n_users": 16, "p": 0.8},
        },
        "split": {"n_resamples": 2},
        "grid": {"beta": [2, 3], "k": [1, 3], "weighting": ["uniform", "agreement_weighted"]},
        "evaluation": {"k": 2, "relevance_threshold": 4.0},
        "sweep": {"n_items": 12, "n_users": [20, 40], "seeds": [0, 1], "check_consistency": True,
                  "latent": {"d": 2}},
        "output": {"directory": str(tmp_path), "name": "tiny"},
    }
    payload.update(overrides)
    return ExperimentConfig.from_dict(payload)


@pytest.fixture
async def runner_factory(tmp_path):
    """startup/shutdown을 관리하는 실행기 생성기"""
    runners = []

    async def _create(**overrides):
        runner = ExperimentRunner(tiny_config(tmp_path, **overrides))
        await runner.startup()
        runners.append(runner)
        return runner

    yield _create
    for runner in runners:
        await runner.shutdown()


class TestExperimentRunner:
    """실행기 기본 동작 테스트"""

    def test_initialization(self, tmp_path):
        runner = ExperimentRunner(tiny_config(tmp_path))

        assert set(runner.verbs) == {"synth", "run", "grid", "eval", "split"}
        assert runner.executor is None
        assert hasattr(runner, "logger")

    @pytest.mark.asyncio
    async def test_startup_and_shutdown(self, tmp_path):
        runner = ExperimentRunner(tiny_config(tmp_path / "out"))
        await runner.startup()

        assert runner.executor is not None
        assert runner.cache is not None
        assert (tmp_path / "out").is_dir()

        await runner.shutdown()
        assert runner.executor is None

    @pytest.mark.asyncio
    async def test_unknown_verb(self, runner_factory):
        runner = await runner_factory()
        result = await runner.execute("train")

        assert result["success"] is False
        assert result["exit_code"] == 2
        assert result["error"]["exception_type"] == "ConfigurationException"

    @pytest.mark.asyncio
    async def test_missing_data_file(self, runner_factory, tmp_path):
        runner = await runner_factory(
            mode="real_pipeline",
            dataset={"source": "csv_triples", "path": str(tmp_path / "missing.csv")},
        )
        result = await runner.execute("run")

        assert result["success"] is False
        assert result["exit_code"] == 3

    @pytest.mark.asyncio
    async def test_unexpected_error(self, runner_factory, mocker):
        """예상 밖 예외는 로그를 남기고 종료 코드 1"""
        runner = await runner_factory()
        mocker.patch.object(runner, "_prepare", side_effect=KeyError("user"))
        log = mocker.patch.object(runner.logger, "exception")

        result = await runner.execute("grid")

        assert result["success"] is False
        assert result["exit_code"] == 1
        assert result["error"]["error_code"] == "INTERNAL_ERROR"
        assert result["error"]["exception_type"] == "KeyError"
        log.assert_called_once()


class TestVerbs:
    """verb별 실행 테스트"""

    @pytest.mark.asyncio
    async def test_grid(self, runner_factory, tmp_path):
        runner = await runner_factory()
        result = await runner.execute("grid")

        assert result["success"] is True
        assert result["grid_points"] == 2 * 2 * 2
        assert result["best"]["beta"] in (2, 3)
        assert result["best"]["algorithm"] in ("MR", "MRW")

        report = json.loads((tmp_path / "tiny_grid.json").read_text(encoding="utf-8"))
        table = pd.read_csv(tmp_path / "tiny_grid.csv")
        assert len(report["table"]) == 8
        assert len(table) == 8
        assert "val_kendall_tau" in table.columns
        assert (table["resample"] == 0).all()

    @pytest.mark.asyncio
    async def test_run_dispatches_on_mode(self, runner_factory, tmp_path):
        runner = await runner_factory()
        result = await runner.execute("run")

        assert result["success"] is True
        assert "grid_points" in result
        assert (tmp_path / "tiny_grid.json").exists()

    @pytest.mark.asyncio
    async def test_real_pipeline(self, runner_factory, tmp_path):
        runner = await runner_factory(mode="real_pipeline")
        result = await runner.execute("run")

        assert result["success"] is True
        assert result["resamples"] == 2
        assert set(result["aggregate"]) == {"kendall_tau", "spearman_rho", "ndcg_at_k", "precision_at_k"}

        rows = pd.read_csv(tmp_path / "tiny_run.csv")
        assert list(rows.columns) == [
            "dataset", "algorithm", "beta", "k", "seed", "resample", "metric", "mean", "std", "users"
        ]
        assert len(rows) == 4 * 3
        assert (rows["resample"].astype(str) == "all").sum() == 4

        report = json.loads((tmp_path / "tiny_run.json").read_text(encoding="utf-8"))
        assert [entry["resample"] for entry in report["resamples"]] == [0, 1]
        assert report["dataset"]["n_items"] == 12

    @pytest.mark.asyncio
    async def test_eval(self, runner_factory, tmp_path):
        runner = await runner_factory()
        result = await runner.execute("eval")

        assert result["success"] is True
        report = json.loads((tmp_path / "tiny_eval.json").read_text(encoding="utf-8"))
        assert report["ranker"]["beta"] == 2
        assert report["ranker"]["k"] == 1
        assert report["ranker"]["vote_weighting"] == "uniform"

    @pytest.mark.asyncio
    async def test_split(self, runner_factory):
        runner = await runner_factory()
        result = await runner.execute("split")

        manifest = json.loads(open(result["manifest"], encoding="utf-8").read())
        assert result["resamples"] == 2
        assert len(manifest["splits"]) == 2
        assert manifest["n_users"] == 16
        for split in manifest["splits"]:
            positions = split["train"] + split["val"] + split["test"]
            assert len(positions) == len(set(positions))

    @pytest.mark.asyncio
    async def test_synth_sweep(self, runner_factory, tmp_path):
        runner = await runner_factory(mode="synth_consistency")
        result = await runner.execute("synth")

        assert result["success"] is True
        assert [entry["n_users"] for entry in result["summary"]] == [20, 40]
        assert all(entry["runs"] == 2 for entry in result["summary"])
        assert isinstance(result["nonincreasing"], bool)

        rows = pd.read_csv(tmp_path / "tiny_synth.csv")
        assert len(rows) == 4
        assert (rows["rate"] >= 0).all()
        assert (rows["rate"] <= 1).all()
        assert "consistency_violations" in rows.columns


class TestSelection:
    """그리드 선택 규칙 테스트"""

    @staticmethod
    def _row(beta, k, weighting, score):
        return {"beta": beta, "k": k, "weighting": weighting, "val": {"kendall_tau": {"mean": score}}}

    def test_ties_prefer_small_beta_k_uniform(self, tmp_path):
        runner = ExperimentRunner(tiny_config(tmp_path))
        rows = [
            self._row(3, 1, "uniform", 0.5),
            self._row(2, 5, "agreement_weighted", 0.5),
            self._row(2, 5, "uniform", 0.5),
            self._row(2, 1, "uniform", float("nan")),
        ]
        best = runner._select_best(rows)

        assert (best["beta"], best["k"], best["weighting"]) == (2, 5, "uniform")

    def test_highest_score_wins(self, tmp_path):
        runner = ExperimentRunner(tiny_config(tmp_path))
        rows = [self._row(2, 1, "uniform", 0.5), self._row(9, 31, "agreement_weighted", 0.6)]

        assert runner._select_best(rows)["beta"] == 9

    def test_mean_std_ignores_nan(self):
        stats = _mean_std([1.0, float("nan"), 3.0])
        assert stats == {"mean": 2.0, "std": 1.0}
        assert math.isnan(_mean_std([])["mean"])
