"""
Subsonic Axisymmetric Flow Solver - command-line entry point.

    python -m app.main solve   --config run.cfg [--out DIR] [--threads N] [--resume CKPT]
    python -m app.main verify  --config run.cfg
    python -m app.main annulus --config run.cfg
    python -m app.main sweep   --config run.cfg
    python -m app.main bracket --config run.cfg

Exit status: 0 certified, 1 configuration error, 2 a task was not certified or failed.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.cli_io import parse_config
from app.config import get_settings
from app.errors import FlowError, classify_error, exit_code_for
from app.models import TaskName
from app.runner import run_engine

logger = logging.getLogger(__name__)

COMMANDS = {
    "solve": "Solve for the stream function and write the field table",
    "verify": "Solve, then run the verification suite",
    "annulus": "Solve, then build the matched annulus state and compare",
    "sweep": "Continuation sweep over tasks.sweep_densities",
    "bracket": "Bisect for the critical upstream density",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subsonic-flow",
        description="Axisymmetric subsonic Euler flow past an obstacle on the axis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, type=Path, help="Key-value config file")
        cmd.add_argument("--out", type=Path, default=None, help="Output directory (default: output.directory)")
        cmd.add_argument("--threads", type=int, default=None, help="Worker threads for cold-start sweeps")
        cmd.add_argument("--resume", type=Path, default=None, help="Checkpoint to resume a solve from")
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)
    configure_logging(settings.log_level)

    try:
        config = parse_config(args.config)
    except FlowError as e:
        error_type, message = classify_error(e)
        print(message, file=sys.stderr)
        return exit_code_for(error_type)

    out_dir = args.out or Path(config.output.directory)
    threads = args.threads if args.threads is not None else settings.default_threads
    logger.info(f"Starting {args.command} with config {args.config}")
    return run_engine.run(config, [TaskName(args.command)], out_dir, threads=threads, resume=args.resume)


if __name__ == "__main__":
    sys.exit(main())
