"""
Main entry point for Borehole Imaging Lab
"""

import argparse
import logging
import os
import pathlib
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from dotenv import load_dotenv

from . import commands
from .commands.context import RunContext
from .config import STAGES, Scenario, dump_scenario, parse_scenario
from .core.registry import CommandRegistry
from .exceptions import BHILError, ConfigError
from .reports import ReportWriter
from .utils.logging import setup_logging
from .utils.parallel import configure_threads, default_threads
from .utils.validation import prepare_output_dir

logger = logging.getLogger(__name__)

ALL = "all"


@dataclass
class RunResult:
    status: int
    out_dir: pathlib.Path
    summaries: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)


def build_registry() -> CommandRegistry:
    registry = CommandRegistry()
    registry.auto_discover_commands(commands)
    return registry


def enabled_stages(scenario: Scenario) -> list[str]:
    """Stages run by 'all', in fixed order."""
    a = scenario.analysis
    toggles = {
        "trace-rays": a.trace_rays,
        "classify-caustics": a.caustic_classify,
        "analyze-canonical": a.singularity_census or a.variable_diagnostics,
        "tic-check": a.tic_check,
        "artifact-study": a.artifact_study,
    }
    return [name for name in STAGES if toggles.get(name, True)]


def run(
    scenario: Scenario,
    subcommand: str,
    out_dir: str | pathlib.Path | None = None,
    threads: int = 1,
) -> RunResult:
    """
    Run one stage, or every enabled stage for 'all', and write the manifest.

    Raises:
        ConfigError: unknown subcommand
        OSError: the output directory cannot be used
    """
    registry = build_registry()
    if subcommand == ALL:
        names = enabled_stages(scenario)
    elif registry.get_command(subcommand) is not None:
        names = [subcommand]
    else:
        raise ConfigError(f"unknown subcommand '{subcommand}'; expected one of {[*STAGES, ALL]}")

    directory = prepare_output_dir(out_dir or scenario.output_dir)
    if directory is None:
        raise OSError(f"cannot use output directory '{out_dir or scenario.output_dir}'")
    writer = ReportWriter(directory)
    writer.write_text("resolved_config.json", dump_scenario(scenario))
    ctx = RunContext(scenario, writer, threads)

    summaries = []
    for name in names:
        logger.info(f"Stage {name}")
        summaries.append(registry.get_command(name)(ctx))  # type: ignore[misc]
    writer.write_jsonl("summary.jsonl", summaries)
    writer.write_manifest(scenario.name)
    return RunResult(0, directory, summaries, writer.artifacts)


def error_line(code: int, kind: str, message: str) -> str:
    text = " ".join(str(message).split()).replace('"', '\\"')
    return f'bhil-error code={code} kind={kind} message="{text}"'


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, BHILError):
        return error.exit_code
    if isinstance(error, OSError):
        return 4
    if isinstance(error, (ValueError, IndexError, KeyError)):
        return 2
    return 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhil",
        description="Borehole Imaging Lab - Born modeling, backprojection and canonical-relation diagnostics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Environment Variables:
  BHIL_THREADS     Worker count (fallback for --threads)
  BHIL_LOG_LEVEL   Logging level (DEBUG, INFO, WARNING, ERROR)
  BHIL_OUT         Output directory (fallback for --out)

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O error

Examples:
  bhil simulate --scenario scenarios/crosswell.toml
  bhil all --scenario scenarios/dense-constant.toml --threads 4 --override wavelet.f_peak=15
""",
    )
    parser.add_argument("subcommand", nargs="?", choices=[*STAGES, ALL], help="Pipeline stage to run")
    parser.add_argument("--scenario", help="Scenario file (.toml or .json)")
    parser.add_argument("--out", default=os.getenv("BHIL_OUT"), help="Output directory (env: BHIL_OUT)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the scenario's seed)")
    parser.add_argument(
        "--threads", type=int, default=default_threads(), help="Worker count (env: BHIL_THREADS)"
    )
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="Dotted scenario key override, e.g. wavelet.f_peak=15 (repeatable)",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=os.getenv("BHIL_LOG_LEVEL", "INFO"),
        help="Logging level (default: INFO, env: BHIL_LOG_LEVEL)",
    )
    parser.add_argument("--quiet", action="store_true", help="Only report errors")
    parser.add_argument("--list-commands", action="store_true", help="List the pipeline stages and exit")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run, and return the process exit code."""
    load_dotenv(override=False)
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level, quiet=args.quiet)

    if args.list_commands:
        for entry in build_registry().commands:
            print(f"{entry['name']:<20} {entry['description']}")
        return 0
    if not args.subcommand or not args.scenario:
        parser.print_usage(sys.stderr)
        print(error_line(2, "UsageError", "a subcommand and --scenario are required"), file=sys.stderr)
        return 2

    try:
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        scenario = parse_scenario(args.scenario, overrides)
        threads = configure_threads(args.threads)
        result = run(scenario, args.subcommand, args.out, threads)
        logger.info(f"Wrote {len(result.artifacts)} artifacts to {result.out_dir}")
        return result.status
    except KeyboardInterrupt:
        print("Interrupted by user", file=sys.stderr)
        return 1
    except Exception as e:
        code = exit_code_for(e)
        print(error_line(code, type(e).__name__, str(e)), file=sys.stderr)
        print(f"bhil: {e}", file=sys.stderr)
        logger.debug("Traceback", exc_info=True)
        return code


def cli_main() -> None:
    """CLI entry point"""
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
