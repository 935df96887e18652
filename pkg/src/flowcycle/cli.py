"""Command-line interface: ``flowcycle validate|run|graph <workflow file>``.

Parameter flags are generated from the workflow document itself, so the
document is loaded before the full argument list is parsed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import demos, nodes, patterns  # noqa: F401 - register node kinds
from .errors import FlagCollision, FlowError
from .io import SystemConfig, add_flags, apply_flags, expose_cli, export_dot, load, load_system_config
from .runtime import Outcome, RunConfig, configure_logging, execute

EXIT_OK, EXIT_FAILED, EXIT_DEADLOCK, EXIT_STOPPED = 0, 1, 2, 130

log = logging.getLogger("flowcycle.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 instead of argparse's 2
        raise UsageError(f"{self.prog}: error: {message}")


def _base_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowcycle", description="Validate, inspect and run workflow documents.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("validate", "check a workflow document"),
        ("run", "execute a workflow document"),
        ("graph", "print the workflow as a Graphviz graph"),
    ):
        cmd = sub.add_parser(name, help=text, add_help=False)
        cmd.add_argument("workflow", type=Path, help="workflow document (.json or .yaml)")
        cmd.add_argument("--config", type=Path, help="system configuration file")
        cmd.add_argument("-h", "--help", action="store_true", help="show help, including parameter flags")
        if name == "graph":
            cmd.add_argument("--format", choices=["dot"], default="dot")
        else:
            cmd.add_argument("--workdir", type=Path, help="working root for this run")
            cmd.add_argument("--log-level", default="INFO", help="DEBUG, INFO, WARNING or ERROR")
            cmd.add_argument("--timeout", type=float, help="global timeout in seconds")
            cmd.add_argument("--poll-interval", type=float, default=0.25, help=argparse.SUPPRESS)
            cmd.add_argument("--isolation", choices=["process", "thread"], default="process", help=argparse.SUPPRESS)
    return parser


def _full_parser(command: str, schema) -> argparse.ArgumentParser:
    parser = _base_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    add_flags(sub.choices[command], schema)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    base = _base_parser()
    try:
        known, _ = base.parse_known_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILED

    try:
        workflow = load(known.workflow)
    except (OSError, FlowError) as exc:
        print(f"error: {known.workflow}: {exc}", file=sys.stderr)
        return EXIT_FAILED

    try:
        schema = expose_cli(workflow)
    except FlagCollision as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    parser = _full_parser(known.command, schema)
    if known.help:
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        sub.choices[known.command].print_help()
        return EXIT_OK
    try:
        args = parser.parse_args(argv)
        apply_flags(workflow, vars(args), schema)
    except (UsageError, TypeError, FlowError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILED

    if args.command == "graph":
        sys.stdout.write(export_dot(workflow))
        return EXIT_OK

    try:
        system = load_system_config(args.config) if args.config else SystemConfig()
    except (OSError, FlowError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_FAILED

    report = workflow.validate()
    if args.command == "validate":
        print(report)
        return EXIT_OK if report.ok else EXIT_FAILED
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_FAILED

    configure_logging(args.log_level.upper())
    workdir = args.workdir or (Path(system.workdir) if system.workdir else None)
    try:
        config = RunConfig(
            workdir=workdir,
            log_level=args.log_level,
            timeout=args.timeout,
            poll_interval=args.poll_interval,
            system=system,
            isolation=args.isolation,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    result = execute(workflow, config)
    report_path = Path(result.workdir) / "report.json"
    report_path.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    print(result.summary())
    print(f"report: {report_path}")
    return {
        Outcome.SUCCESS: EXIT_OK,
        Outcome.FAILED: EXIT_FAILED,
        Outcome.DEADLOCK: EXIT_DEADLOCK,
        Outcome.STOPPED: EXIT_STOPPED,
    }[result.outcome]


if __name__ == "__main__":
    sys.exit(main())
