#!/usr/bin/env python3
"""Command-line interface for the ofdm_phy package."""

import argparse
import json
import sys

from . import __version__
from .exceptions import ConfigurationError, OfdmPhyError
from .harness import PRESETS, Experiment, config_schema, default_threads, replay_report, resolve_config, run_experiment
from .serializers import to_csv, write_report
from .utils import configure_logging

# Subcommand -> experiment it runs
COMMANDS = {
    "psd": Experiment.PSD,
    "papr": Experiment.PAPR_CCDF,
    "ber": Experiment.BER_SWEEP,
    "cfo": Experiment.CFO_SWEEP,
    "cp": Experiment.CP_SWEEP,
}

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def parse_args(args: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments.

    Args:
        args: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Parsed arguments

    Raises:
        UsageError: On unknown subcommands, unknown flags or bad values

    """
    parser = _Parser(description="Baseband OFDM PHY experiments", prog="ofdm-phy")

    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default="WARNING",
        help="Set the logging level (logs go to stderr)",
    )

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    helps = {
        "psd": "Power spectral density of the transmitted signal",
        "papr": "PAPR and per-sample power CCDFs",
        "ber": "BER versus Eb/N0",
        "cfo": "SINR, EVM and BER versus carrier frequency offset",
        "cp": "EVM and BER versus cyclic prefix length over multipath",
    }
    for name, text in helps.items():
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("--config", help="JSON scenario file")
        sub.add_argument("--preset", choices=sorted(PRESETS), help="Start from a named preset")
        sub.add_argument("--seed", type=_u64, help="Override the scenario seed")
        sub.add_argument("--out", help="CSV output path (a .report.json sidecar is written next to it)")
        sub.add_argument("--threads", type=_positive, help="Worker threads (default: $OFDM_PHY_THREADS or 1)")

    presets_parser = subparsers.add_parser("presets", help="List the named presets")
    presets_parser.add_argument("--show", choices=sorted(PRESETS), help="Print one preset as JSON")
    presets_parser.add_argument("--schema", action="store_true", help="Print the scenario JSON schema")

    replay_parser = subparsers.add_parser("replay", help="Re-run the config echoed in a report sidecar")
    replay_parser.add_argument("--report", required=True, help="Path to a .report.json sidecar")
    replay_parser.add_argument("--out", help="CSV output path")
    replay_parser.add_argument("--threads", type=_positive, help="Worker threads")

    return parser.parse_args(args)


def _emit(report, out: str | None) -> None:
    if out:
        csv_path, meta_path = write_report(report, out)
        print(f"Wrote {csv_path} and {meta_path}", file=sys.stderr)
    else:
        sys.stdout.write(to_csv(report))


def _list_presets(parsed_args: argparse.Namespace) -> None:
    if parsed_args.schema:
        print(json.dumps(config_schema(), indent=2))
    elif parsed_args.show:
        print(json.dumps(PRESETS[parsed_args.show], indent=2))
    else:
        for name in sorted(PRESETS):
            print(f"{name}\t{PRESETS[name]['experiment']}")


def main(args: list[str] | None = None) -> int:
    """Main entry point for the CLI.

    Args:
        args: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 on success, 1 for usage or configuration errors, 2 for runtime errors

    """  # noqa: D401
    try:
        parsed_args = parse_args(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    if not parsed_args.command:
        print("Error: No command specified. Use --help for usage information.", file=sys.stderr)
        return EXIT_VALIDATION

    configure_logging(level=parsed_args.log_level.lower())

    try:
        if parsed_args.command == "presets":
            _list_presets(parsed_args)
            return EXIT_OK

        threads = parsed_args.threads or default_threads()

        if parsed_args.command == "replay":
            report = replay_report(parsed_args.report, threads)
            _emit(report, parsed_args.out)
            return EXIT_OK

        if not parsed_args.config and not parsed_args.preset:
            print("Error: give --config and/or --preset", file=sys.stderr)
            return EXIT_VALIDATION

        config = resolve_config(
            preset=parsed_args.preset,
            config_path=parsed_args.config,
            overrides={"seed": parsed_args.seed, "output": parsed_args.out},
            experiment=COMMANDS[parsed_args.command],
        )
        report = run_experiment(config, threads)
        _emit(report, config.output)
        return EXIT_OK

    except ConfigurationError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except OfdmPhyError as e:
        print(f"Error: {e!s}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        print(f"Unexpected error: {e!s}", file=sys.stderr)
        if parsed_args.log_level == "DEBUG":
            import traceback

            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
