from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, Settings, load_experiment
from .db.repository import Repository
from .errors import ConfigError
from .experiments import list_experiments
from .orchestrator import ExperimentRunner

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger("mtsbattle")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtsbattle", description="Metasurface battle simulator")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="run an experiment file")
    run.add_argument("--config", required=True, help="experiment YAML file")
    run.add_argument("--seed", type=int, default=None, help="override the file's seed")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--jobs", type=int, default=None, help="worker processes")
    run.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")

    validate = verbs.add_parser("validate", help="check an experiment file without running it")
    validate.add_argument("--config", required=True, help="experiment YAML file")
    validate.add_argument("--seed", type=int, default=None, help="override the file's seed")

    listing = verbs.add_parser("list", help="list experiment kinds")
    listing.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _report(path: str, error: ConfigError) -> None:
    for diagnostic in error.diagnostics:
        print(f"{path}: {diagnostic}", file=sys.stderr)


def _output_dir(config: ExperimentConfig, settings: Settings, override: str | None) -> Path:
    if override:
        return Path(override)
    if config.output:
        return Path(config.output)
    return Path(settings.output_dir) / (config.name or f"{config.kind}-{config.seed}")


async def run_command(args: argparse.Namespace, settings: Settings) -> int:
    try:
        config = load_experiment(args.config, seed=args.seed)
    except ConfigError as exc:
        _report(args.config, exc)
        return EXIT_CONFIG

    repo = Repository(settings.registry_path)
    try:
        await repo.connect()
        runner = ExperimentRunner(
            config,
            _output_dir(config, settings, args.out),
            fmt=args.format,
            jobs=args.jobs or settings.jobs,
            repo=repo,
            config_path=str(args.config),
        )
        summary = await runner.run()
    except Exception:
        logger.exception("Run of %s failed", args.config)
        return EXIT_RUNTIME
    finally:
        await repo.close()
    print(summary.output_dir)
    return EXIT_OK


def validate_command(args: argparse.Namespace) -> int:
    try:
        load_experiment(args.config, seed=args.seed)
    except ConfigError as exc:
        _report(args.config, exc)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def list_command(args: argparse.Namespace) -> int:
    kinds = list_experiments()
    if args.format == "json":
        print(json.dumps(kinds, indent=2))
        return EXIT_OK
    width = max(len(k["kind"]) for k in kinds)
    anchor_width = max(len(k["anchor"]) for k in kinds)
    for k in kinds:
        print(f"{k['kind']:<{width}}  {k['anchor']:<{anchor_width}}  {k['description']}")
    return EXIT_OK


def cli(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "list":
        return list_command(args)
    if args.verb == "validate":
        return validate_command(args)
    settings = Settings.load()
    logging.getLogger().setLevel(settings.log_level.upper())
    return asyncio.run(run_command(args, settings))


if __name__ == "__main__":
    sys.exit(cli())
