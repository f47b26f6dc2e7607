"""Define the command line interface of the latent dimension studies.

Exit codes: 0 on success, 2 on configuration errors and 3 on numerical failures.
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from .. import services
from ..config import StudyConfig, load_config
from ..exceptions import ConfigError, LatentDimError
from ..model import CheckResult
from ..version import version_info

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    """Define the commands and flags of the program."""
    parser = argparse.ArgumentParser(
        prog="latent-dim",
        description="Study how the latent dimension drives the DL-ROM errors.",
    )
    parser.add_argument("--version", action="store_true", help="show version details")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    commands = parser.add_subparsers(dest="command")

    study_flags = argparse.ArgumentParser(add_help=False)
    study_flags.add_argument(
        "--config", required=True, help="path of the flat key-value study config"
    )
    study_flags.add_argument("--seed", type=int, help="override snapshots.seed")
    study_flags.add_argument("--out", help="override output.directory")
    study_flags.add_argument(
        "--jobs", type=int, default=1, help="number of worker processes"
    )

    commands.add_parser(
        "generate", parents=[study_flags], help="sample and solve the snapshots"
    )
    commands.add_parser(
        "sweep", parents=[study_flags], help="measure the error decay over n"
    )
    commands.add_parser(
        "table1", parents=[study_flags], help="compare POD, AE and DL-ROM errors"
    )
    commands.add_parser("gradcheck", help="check the gradients with finite differences")
    commands.add_parser("selftest", help="run the numerical oracle checks")
    return parser


def configure_logging(verbose: bool) -> None:
    """Configure the root logger of the program."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _study_config(args: argparse.Namespace) -> StudyConfig:
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1", fields=["jobs"])
    return load_config(args.config).with_overrides(seed=args.seed, directory=args.out)


def _report_checks(results: List[CheckResult]) -> int:
    for result in results:
        status = "ok" if result.passed else "FAILED"
        print(f"{status:6} {result.name}: {result.detail}")
    return EXIT_OK if all(result.passed for result in results) else EXIT_NUMERICAL_FAILURE


def run(args: argparse.Namespace) -> int:
    """Run the selected command and return its exit code."""
    if args.command == "gradcheck":
        return _report_checks(services.run_gradcheck())
    if args.command == "selftest":
        return _report_checks(services.run_selftest())

    config = _study_config(args)
    if args.command == "generate":
        result = services.generate(config, jobs=args.jobs)
        print(
            f"inputs {result.rows}x{result.input_cols} "
            f"sha256 {result.checksums['inputs.ldsn']}"
        )
        print(
            f"outputs {result.rows}x{result.output_cols} "
            f"sha256 {result.checksums['outputs.ldsn']}"
        )
        print(f"split {result.n_train}/{result.rows - result.n_train}")
    elif args.command == "sweep":
        report = services.sweep(config)
        for row in report.rows:
            print(
                f"n={row.n} e_ae={row.e_ae:.6e} e_pod={row.e_pod:.6e} "
                f"sqrt_tail_mu={row.sqrt_tail_mu:.6e} sqrt_tail_u={row.sqrt_tail_u:.6e}"
            )
        for name, slope in report.slopes.dict().items():
            print(f"{name} {'absent' if slope is None else f'{slope:.4f}'}")
    else:
        table = services.table1(config)
        print(
            f"{table.problem} n={table.n}: POD {table.pod_percent:.2f}% "
            f"AE {table.ae_percent:.2f}% DL-ROM {table.dlrom_percent:.2f}%"
        )
        if table.rank_limited:
            print("warning: the POD basis is rank limited")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the command line, run the command and map the errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(version_info())
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG_ERROR
    configure_logging(args.verbose)

    try:
        return run(args)
    except ConfigError as error:
        log.error(f"Configuration error: {error}")
        return EXIT_CONFIG_ERROR
    except LatentDimError as error:
        log.error(f"{type(error).__name__}: {error}")
        return EXIT_NUMERICAL_FAILURE
