"""
TDD 테스트: 명령행 진입점 테스트
"""
import json
from unittest.mock import patch

import pytest
from src.cli import VERBS, build_parser, main, resolve_config
from src.exceptions import ConfigurationException


@pytest.fixture
def config_file(tmp_path):
    """작은 합성 grid_search 설정 파일"""
    def _write(**overrides):
        payload = {
            "mode": "grid_search",
            "dataset": {
                "source": "synthetic",
                "latent": {"d": 2, "n_items": 10, "n_users": 12, "p": 0.9},
            },
            "split": {"n_resamples": 1},
            "grid": {"beta": [2], "k": [1, 2]},
            "output": {"directory": str(tmp_path / "results"), "name": "cli"},
        }
        payload.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)
    return _write


class TestParser:
    """인자 파서 테스트"""

    def test_verbs(self):
        parser = build_parser()
        for verb in VERBS:
            args = parser.parse_args([verb, "--config", "netflix"])
            assert args.verb == verb
            assert args.seed is None

    def test_overrides_parsed(self):
        args = build_parser().parse_args(["run", "--config", "netflix", "--seed", "7", "--threads", "8",
                                          "--out", "results/", "--verbose"])

        assert (args.seed, args.threads, args.out, args.verbose) == (7, 8, "results/", True)

    def test_negative_seed_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--config", "netflix", "--seed=-1"])

    def test_config_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run"])

    def test_resolve_config_applies_overrides(self):
        args = build_parser().parse_args(["grid", "--config", "netflix", "--seed", "7", "--threads", "3"])
        config = resolve_config(args)

        assert config.seed == 7
        assert config.threads == 3
        assert config.split_spec().seed == 7

    def test_resolve_config_rejects_threads(self):
        args = build_parser().parse_args(["grid", "--config", "netflix", "--threads", "0"])
        with pytest.raises(ConfigurationException):
            resolve_config(args)


class TestMain:
    """종료 코드 테스트"""

    def test_success(self, config_file, tmp_path):
        out = tmp_path / "override"
        code = main(["grid", "--config", config_file(), "--out", str(out), "--threads", "2"])

        assert code == 0
        assert (out / "cli_grid.json").exists()
        assert (out / "cli_grid.csv").exists()

    def test_split_verb(self, config_file, tmp_path):
        assert main(["split", "--config", config_file()]) == 0
        assert (tmp_path / "results" / "cli_split.json").exists()

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2

    def test_invalid_config(self, config_file):
        assert main(["run", "--config", config_file(mode="benchmark")]) == 2

    def test_data_error(self, config_file, tmp_path):
        path = config_file(dataset={"source": "csv_triples", "path": str(tmp_path / "missing.csv")})
        assert main(["run", "--config", path]) == 3

    def test_malformed_data(self, config_file, tmp_path):
        ratings = tmp_path / "ratings.csv"
        ratings.write_text("1,2,3\n1,3\n", encoding="utf-8")
        path = config_file(dataset={"source": "csv_triples", "path": str(ratings)})

        assert main(["run", "--config", path]) == 3

    @pytest.mark.parametrize("case, expected", [
        ("non_utf8_ratings", 3),
        ("wrong_type_config", 2),
        ("unreadable_config", 2),
        ("internal_error", 1),
    ])
    def test_error_exit_codes(self, config_file, tmp_path, case, expected):
        """오류 종류별 종료 코드"""
        if case == "non_utf8_ratings":
            ratings = tmp_path / "ratings.csv"
            ratings.write_bytes(b"1,2,3\n\xff,1,2\n")
            path = config_file(dataset={"source": "csv_triples", "path": str(ratings)})
        elif case == "wrong_type_config":
            path = config_file(evaluation={"k": "5"})
        elif case == "unreadable_config":
            path = str(tmp_path)
        else:
            path = config_file()

        if case == "internal_error":
            with patch("src.runner.ExperimentRunner._prepare", side_effect=KeyError("user")):
                code = main(["grid", "--config", path])
        else:
            code = main(["run", "--config", path])

        assert code == expected
