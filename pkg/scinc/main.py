import argparse
import sys
from typing import List, Optional

from scinc import __version__
from scinc.controllers import generate_controller, report_controller, solve_controller, verify_controller
from scinc.utils.errors import SolverError, UsageError
from scinc.utils.logger import app_logger


class CliParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(prog="scinc", description="Seguimiento de camino con barreras autoconcordantes")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Registra los subcomandos
    generate_controller.register(subparsers)
    solve_controller.register(subparsers)
    verify_controller.register(subparsers)
    report_controller.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except SystemExit as e:
        return int(e.code or 0)
    except SolverError as e:
        level = app_logger.warning if e.exit_code == 4 else app_logger.error
        level(f"{type(e).__name__}: {e}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
