#!/usr/bin/env python3
"""
Command-line front end
Parses subcommands into an ExperimentConfig, runs it through the controller and
writes CSV/JSON to --out or stdout. Exit codes: 0 success, 1 unexpected failure,
2 validation error, 3 diagnostic failure or failing verdict.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from config.app_config import LOG_LEVELS, config
from src.app.app_controller import ExperimentConfig, ExperimentController, RunResult, load_records
from src.services.dendrite import Dendrite
from src.services.disjointness import PeriodicStructure
from src.services.dynamics import DendriteMap
from src.services.errors import ConfigurationError, DiagnosticError, DomainError, ToolkitError
from src.services.io_formats import dump_dendrite, dump_map, dump_structure, write_csv, write_document

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_DIAGNOSTIC = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(DomainError):
    kind = "usage"


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting so the error line and exit code stay uniform"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _checkpoints(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"checkpoints {text!r} must be comma-separated integers")


def build_parser() -> argparse.ArgumentParser:
    common = ToolkitArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper)
    common.add_argument("--seed", type=int, help="overrides TOOLKIT_SEED")
    common.add_argument("--record", help="append an ndjson result record to this file")

    parser = ToolkitArgumentParser(prog="dendrite-toolkit",
                                   description="Dendrite dynamics and Moebius disjointness experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ToolkitArgumentParser)

    p = sub.add_parser("sieve", parents=[common], help="Moebius/Liouville tables and Mertens sums")
    p.add_argument("--n", dest="N", type=int, required=True)
    p.add_argument("--emit", choices=["mu", "lambda", "mertens"], default="mertens")

    p = sub.add_parser("decompose", parents=[common], help="cell decomposition report")
    p.add_argument("--dendrite", dest="dendrite_file", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--graph", help="write the edge-colored cell graph JSON here")

    p = sub.add_parser("orbit", parents=[common], help="orbit points f^n(x)")
    p.add_argument("--map", dest="map_file", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--N", type=int, required=True)

    p = sub.add_parser("omega", parents=[common], help="omega-limit approximation")
    p.add_argument("--map", dest="map_file", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("entropy", parents=[common], help="separated-set entropy estimate")
    p.add_argument("--map", dest="map_file", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=12)

    p = sub.add_parser("sarnak", parents=[common], help="Sarnak sums S_N(x, phi)")
    p.add_argument("--map", dest="map_file", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--obs", default="const", help="const | step:<cell> | dist:<point-spec>")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--checkpoints", type=_checkpoints, default=[])
    p.add_argument("--delta", type=float, help="decomposition scale for step observables")

    for name, helptext in (("verify-structure", "check the five structure conditions"),
                           ("bound", "per-slot split of the Sarnak sum")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--map", dest="map_file")
        p.add_argument("--structure", help="structure JSON for --map")
        p.add_argument("--point")
        p.add_argument("--dyadic", metavar="SPEC", help="use the dyadic structure of a substitution")
        p.add_argument("--host", choices=["odometer", "prefix"], default="odometer")
        p.add_argument("--depth", type=int, default=10)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--eps", type=float)
        if name == "bound":
            p.add_argument("--N", type=int, required=True)
            p.add_argument("--delta", type=float, required=True)
            p.add_argument("--level", type=int)
            p.add_argument("--checkpoints", type=_checkpoints, default=[])

    p = sub.add_parser("gehman", parents=[common], help="Gehman dendrite approximations of subshifts")
    p.add_argument("--spec", default="full",
                   help="full | thue-morse | period-doubling | forbid:<words> | subst:<rule>")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--emit", choices=["dendrite", "map", "structure", "report"], default="report")
    p.add_argument("--host", choices=["prefix", "odometer"], default="prefix")
    p.add_argument("--k", type=int, default=1, help="levels of the emitted dyadic structure")

    p = sub.add_parser("report", parents=[common], help="consolidated pass/fail table")
    p.add_argument("--results", nargs="+", required=True, help="ndjson result files")
    return parser


CONFIG_FIELDS = ("map_file", "dendrite_file", "point", "delta", "eps", "N", "checkpoints", "out", "record")


def to_experiment(args: argparse.Namespace, seed: int) -> ExperimentConfig:
    values = vars(args)
    fields = {name: values.get(name) for name in CONFIG_FIELDS}
    fields["checkpoints"] = fields["checkpoints"] or []
    skip = set(CONFIG_FIELDS) | {"command", "log_level", "seed", "results"}
    options = {key: value for key, value in values.items() if key not in skip}
    return ExperimentConfig(args.command, seed=seed, options=options, **fields)


def _error_line(err: Exception) -> str:
    data = err.to_dict() if isinstance(err, ToolkitError) else {"error": "internal", "message": str(err)}
    return json.dumps(data, sort_keys=True, default=str)


def write_result(result: RunResult, args: argparse.Namespace):
    """Dendrites, maps and structures go out in their file formats, everything else as CSV"""
    document = result.document
    if isinstance(document, Dendrite):
        dump_dendrite(document, args.out)
    elif isinstance(document, DendriteMap):
        dump_map(document, args.out)
    elif isinstance(document, PeriodicStructure):
        dump_structure(document, args.out)
    else:
        write_csv(result.rows, args.out, result.columns)
        if document is not None and getattr(args, "graph", None):
            write_document(document, args.graph)


def run(argv: Optional[List[str]] = None, controller: Optional[ExperimentController] = None) -> int:
    """
    Run one subcommand

    Returns:
        int: exit code
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        sys.stderr.write(_error_line(err) + "\n")
        return EXIT_VALIDATION

    logging.basicConfig(level=args.log_level or config.log_level, format=LOG_FORMAT, stream=sys.stderr)
    issues = config.validate_config()
    for issue in issues:
        logger.warning(f"Configuration issue: {issue}")

    controller = controller or ExperimentController()
    seed = args.seed if args.seed is not None else config.seed
    try:
        controller.update_config(seed=seed, log_level=args.log_level)
        ec = to_experiment(args, seed)
        records = load_records(args.results) if args.command == "report" else None
        result = controller.execute(ec, records)

        write_result(result, args)
    except (DomainError, ConfigurationError) as err:
        sys.stderr.write(_error_line(err) + "\n")
        return EXIT_VALIDATION
    except DiagnosticError as err:
        sys.stderr.write(_error_line(err) + "\n")
        return EXIT_DIAGNOSTIC
    except Exception as err:
        logger.exception(f"{args.command} failed")
        sys.stderr.write(_error_line(err) + "\n")
        return EXIT_INTERNAL

    if not result.passed:
        failed = [check["id"] for check in result.checks if not check["passed"]]
        sys.stderr.write(json.dumps({"error": "verdict", "message": f"{len(failed)} checks failed",
                                     "failed": failed}) + "\n")
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
