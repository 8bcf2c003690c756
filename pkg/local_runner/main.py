import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

import numpy  # noqa: E402
import pandas  # noqa: E402
import scipy  # noqa: E402

from riskfactors import __version__  # noqa: E402
from riskfactors.config import RunConfig, load_config  # noqa: E402
from riskfactors.errors import RiskFactorError  # noqa: E402
from riskfactors.stage_constants import STAGE_ID, STAGE_OUTPUT  # noqa: E402
from riskfactors.stage_directory import STAGE_DIRECTORY, get_stage  # noqa: E402
from riskfactors.stage_lib import StageStatus  # noqa: E402

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
log = logging.getLogger("local_runner")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskfactors",
        description="Rank asthma risk factors from personal and environmental data.",
    )
    subcommands = parser.add_subparsers(dest="command", required=True)
    for descriptor in STAGE_DIRECTORY:
        sub = subcommands.add_parser(
            descriptor.stage_id.value, help=descriptor.description
        )
        sub.add_argument("--config", type=Path, help="KEY=VALUE run configuration file")
        sub.add_argument("--seed", type=int, help="seed for every random choice")
        sub.add_argument("--out", type=Path, help="output directory")
        sub.add_argument("--families", help="feature families, e.g. P,E,A")
        sub.add_argument("--spec", type=Path, help="synthetic data spec file")
        sub.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return parser


def log_run_header(config: RunConfig, command: str) -> None:
    log.info(f"--- riskfactors {__version__}: {command} ---")
    log.info(
        f"numpy {numpy.__version__}, pandas {pandas.__version__}, "
        f"scipy {scipy.__version__}, python {sys.version.split()[0]}"
    )
    log.info(f"seed {config.seed}, output directory {config.out_dir}")
    log.debug(f"configuration {config.model_dump()}")


def run(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its process exit code."""
    args = build_parser().parse_args(argv)
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)

    try:
        config = load_config(
            args.config,
            seed=args.seed,
            out_dir=args.out,
            families=args.families,
            synth_spec=args.spec,
        )
        config.out_dir.mkdir(parents=True, exist_ok=True)
    except RiskFactorError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: cannot create output directory: {e}", file=sys.stderr)
        return 1

    handler = logging.FileHandler(
        config.output_path(STAGE_OUTPUT.run_log), mode="w", encoding="utf-8"
    )
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    try:
        log_run_header(config, args.command)
        descriptor = get_stage(STAGE_ID(args.command))
        stage = descriptor.stage_class(config, descriptor.stage_id.value)
        response = asyncio.run(stage.execute())
    finally:
        root.removeHandler(handler)
        handler.close()

    if response.status is StageStatus.ERROR:
        print(f"error: {response.detail}", file=sys.stderr)
        return response.exit_code
    for path in response.outputs:
        log.info(f"wrote {path}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
