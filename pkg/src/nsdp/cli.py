"""Command-line entry point: ``nsdp validate|solve|audit``."""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError
from rich.console import Console

from src.models.config import ALL_CHECKS, RunConfig
from src.models.report import EXIT_INPUT_ERROR, CheckStatus, Report
from src.render import render_text

from .commands import execute
from .logging_config import configure_logging
from .utils.log import get_logger

logger = get_logger(__name__)

_STATUS_STYLES = {
    CheckStatus.PASS: "green",
    CheckStatus.FAIL: "bold red",
    CheckStatus.NOT_APPLICABLE: "yellow",
}


def _checks(value: str) -> List[str]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    unknown = [name for name in names if name not in ALL_CHECKS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown checks {unknown}; choose from {','.join(ALL_CHECKS)}"
        )
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    common.add_argument(
        "--report", type=Path, default=None, help="Write the JSON report to this path"
    )
    common.add_argument(
        "--seed", type=int, default=None, help="Seed for sampled checks (default: 0)"
    )
    common.add_argument(
        "--parallel", type=int, default=None, metavar="N", help="Worker threads (default: 1)"
    )
    common.add_argument("--epsilon", type=float, default=None, help="Truncation tail tolerance")
    common.add_argument(
        "--record-timing",
        action="store_true",
        default=None,
        help="Include wall times in the report",
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase verbosity (use -vv for debug level)",
    )

    parser = argparse.ArgumentParser(
        prog="nsdp",
        description=(
            "Nonsmooth dynamic programming: solve grid Bellman equations "
            "and audit optimality conditions"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser(
        "validate", parents=[common], help="Check the model file and its assumptions"
    )
    validate.add_argument("model", type=Path)

    solve = commands.add_parser(
        "solve", parents=[common], help="Solve the Bellman equation on the grid"
    )
    solve.add_argument("model", type=Path)
    solve.add_argument(
        "--out", type=Path, default=None, help="Value table export (.json or tab-separated)"
    )

    audit = commands.add_parser(
        "audit", parents=[common], help="Audit a program against the solved model"
    )
    audit.add_argument("model", type=Path)
    audit.add_argument("program", type=Path)
    audit.add_argument(
        "--checks", type=_checks, default=None, help=f"Comma list of {','.join(ALL_CHECKS)}"
    )
    audit.add_argument(
        "--tol-policy", type=float, default=None, help="Tie tolerance of policy candidates"
    )
    audit.add_argument(
        "--tol-feasibility", type=float, default=None, help="Slack accepted by viability checks"
    )
    audit.add_argument(
        "--tol-audit", type=float, default=None, help="Finite-difference audit tolerance"
    )
    audit.add_argument(
        "--tol-curvature", type=float, default=None, help="Curvature bound M of the value table"
    )
    audit.add_argument("--samples", type=int, default=None, help="Viability samples per check")
    audit.add_argument("--radius", type=float, default=None, help="Viability neighbourhood radius")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge the optional YAML file with the flags that were given."""
    overrides: Dict[str, Any] = {
        "command": args.command,
        "model_path": args.model,
        "output_path": getattr(args, "out", None),
        "program_path": getattr(args, "program", None),
        "report_path": args.report,
        "checks": getattr(args, "checks", None),
        "epsilon": args.epsilon,
        "seed": args.seed,
        "parallelism": args.parallel,
        "record_timing": args.record_timing,
        "tolerances": {
            "policy_tol": getattr(args, "tol_policy", None),
            "feasibility_tol": getattr(args, "tol_feasibility", None),
            "audit_tol": getattr(args, "tol_audit", None),
            "curvature_bound": getattr(args, "tol_curvature", None),
        },
        "sampling": {
            "viability_samples": getattr(args, "samples", None),
            "viability_radius": getattr(args, "radius", None),
        },
    }
    return RunConfig.from_yaml(args.config, **overrides)


def print_report(report: Report, console: Console) -> None:
    console.print(render_text(report), markup=False, highlight=False, end="")
    if report.error is not None:
        console.print("INPUT ERROR", style="bold red")
        return
    failures = len(report.failures)
    style = _STATUS_STYLES[CheckStatus.FAIL if failures else CheckStatus.PASS]
    console.print(
        f"{failures} failing check(s)" if failures else "all applicable checks pass", style=style
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns 0 on pass, 1 on a failing check and 2 on input errors."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    console = Console()

    try:
        config = config_from_args(args)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid configuration: {e}")
        console.print(f"configuration error: {e}", style="bold red", markup=False)
        return EXIT_INPUT_ERROR

    report = execute(config)
    if config.report_path is not None:
        config.report_path.parent.mkdir(parents=True, exist_ok=True)
        config.report_path.write_text(report.to_json(), encoding="utf8")
    print_report(report, console)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
