"""Command-line entry point: ``python -m app <command> ...``.

Exit codes: 0 when every window is fault-free (or every check passes),
2 when a window is faulty, 1 on any error. Usage errors also exit 1, so
2 always means a detected fault.
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.config import settings
from app.errors import ProjectionError
from app.harness.runner import run_detect_sir, run_detect_skr, run_estimate, run_simulate
from app.harness.verify import SUITE_NAMES, run_verify

logger = logging.getLogger(__name__)

RUNNERS = {
    "simulate": run_simulate,
    "detect-sir": run_detect_sir,
    "detect-skr": run_detect_skr,
    "estimate": run_estimate,
}


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"burn-in must lie in [0, 1), got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit 1; status 2 is reserved for faulty windows."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="python -m app",
        description="Projection-based fault detection and uncertainty estimation",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level (default: %(default)s)")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in RUNNERS:
        command = commands.add_parser(name, help=f"run the {name} pipeline on a scenario")
        command.add_argument("--config", required=True, help="scenario JSON file")
        command.add_argument("--out", default=None, help="existing output directory")
        command.add_argument("--seed", type=_seed, default=None, help="override the scenario seed")
        command.add_argument("--burn-in", type=_fraction, default=None, help="override the burn-in fraction")

    verify = commands.add_parser("verify", help="run an invariant suite")
    verify.add_argument("suite", choices=SUITE_NAMES)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "verify":
        report = run_verify(args.suite)
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            print(f"{status} {check.name} max_residual={check.max_residual:.3e} tolerance={check.tolerance:.1e}")
        return 0 if report.passed else 1

    try:
        report = RUNNERS[args.command](args.config, out_dir=args.out, seed=args.seed, burn_in=args.burn_in)
    except ProjectionError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("unexpected failure in %s", args.command)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(f"{report.verdict.value} ({len(report.windows)} windows)")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
