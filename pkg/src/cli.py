"""
명령행 진입점

    python -m src.cli run --config netflix --seed 7 --threads 8 --out results/

종료 코드: 0 성공, 1 기타 실패, 2 설정 오류, 3 데이터 오류
"""
import argparse
import asyncio
import logging
import sys
from typing import Any, Dict, List, Optional

from .config import ExperimentConfig, list_presets, load_config
from .exceptions import EXIT_OK, ConfigurationException, ValidationException, exit_code_for
from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

VERBS = {
    "synth": "synthetic consistency sweep",
    "run": "run the configured mode",
    "grid": "grid search on the first resample",
    "eval": "evaluate the first grid point on every resample",
    "split": "write train/val/test split manifests",
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < (1 << 64):
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multirank", description="Nonparametric preference completion experiments")
    subparsers = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in VERBS.items():
        sub = subparsers.add_parser(verb, help=help_text)
        sub.add_argument("--config", required=True,
                         help=f"config file or preset ({', '.join(list_presets()) or 'none'})")
        sub.add_argument("--seed", type=_u64, default=None)
        sub.add_argument("--threads", type=int, default=None)
        sub.add_argument("--out", default=None, help="report directory")
        sub.add_argument("--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    try:
        return config.with_overrides(seed=args.seed, threads=args.threads, out=args.out)
    except ValidationException as e:
        raise ConfigurationException(e.message, config_key=e.field, details=e.to_dict())


async def run_verb(config: ExperimentConfig, verb: str, verbose: bool = False) -> Dict[str, Any]:
    runner = ExperimentRunner(config, verbose=verbose)
    await runner.startup()
    try:
        return await runner.execute(verb)
    finally:
        await runner.shutdown()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigurationException as e:
        print(f"Configuration error: {e.message}", file=sys.stderr)
        return exit_code_for(e)

    result = asyncio.run(run_verb(config, args.verb, args.verbose))
    if not result["success"]:
        print(f"{args.verb} failed: {result['error']['message']}", file=sys.stderr)
        return result["exit_code"]
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
