"""Command-line entry point.

Every flag can also be given in a JSON file passed with ``--config``; keys use
the flag names with ``-`` or ``_``. Flags on the command line win over the file.

Exit status: 0 on success, 2 for usage errors, 3 when a value is rejected by
the models or the numerics.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from rrdps import __version__
from rrdps.config import get_settings
from rrdps.enums import Command, Detector, McMode
from rrdps.errors import RRDPSError, UsageError
from rrdps.log import configure_logging
from rrdps.schemas import RunConfig

from .commands import dispatch
from .output import write_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3

RATE_PARAMS = ("L", "M", "mu", "nu_th", "eta", "e_sys", "d_c", "c_d", "detector")
BASE_PARAMS = ("L", "e_sys", "d_c", "c_d", "detector")
# Option keys that belong to RunConfig itself rather than to a handler
RUN_KEYS = {"out": "output_path", "seed": "seed", "trials": "trials"}

_PARAM_HELP = {
    "L": ("--L", int, "pulses per block (default 128)"),
    "M": ("--M", int, "blocks per sequence (default 1)"),
    "mu": ("--mu", float, "mean photon number per pulse (default 0)"),
    "nu_th": ("--nu-th", int, "photon-number threshold nu_th (default 0)"),
    "eta": ("--eta", float, "channel transmission (default 1)"),
    "e_sys": ("--e-sys", float, "system bit error (default 0.03)"),
    "d_c": ("--d-c", float, "dark count probability per slot (default 1e-9)"),
    "c_d": ("--c-d", int, "pulses lost to detector initialization (default 0)"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list: {text!r}") from None


def _add_params(parser: argparse.ArgumentParser, keys: Sequence[str]) -> None:
    group = parser.add_argument_group("protocol parameters")
    for key in keys:
        if key == "detector":
            group.add_argument(
                "--detector",
                choices=[d.value for d in Detector],
                help="detector type (default pnr)",
            )
            continue
        flag, kind, text = _PARAM_HELP[key]
        group.add_argument(flag, dest=key, type=kind, help=text)


def _add_search(parser: argparse.ArgumentParser, *, with_eta: bool) -> None:
    group = parser.add_argument_group("search")
    if with_eta:
        group.add_argument("--eta", type=float, help="single transmission instead of a grid")
    group.add_argument("--eta-min", type=float, help="lowest eta of the grid (default 1e-7)")
    group.add_argument("--eta-max", type=float, help="highest eta of the grid (default 1)")
    group.add_argument(
        "--points-per-decade", type=int, help="eta grid density (default 10)"
    )
    group.add_argument(
        "--M-list",
        dest="M_list",
        type=_int_list,
        help="comma-separated sequence lengths",
    )
    group.add_argument("--mu-min", type=float, help="lower end of the mu search (default 1e-6)")
    group.add_argument("--mu-max", type=float, help="upper end of the mu search (default 1)")
    group.add_argument(
        "--full-scan",
        action="store_true",
        help="scan every nu_th instead of stopping early",
    )


def _add_stochastic(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("sampling")
    group.add_argument("--trials", type=int, help="number of simulated trials (default 100000)")
    group.add_argument(
        "--seed",
        type=int,
        help="random seed (default: the DEFAULT_SEED setting)",
    )


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="JSON file with flag values")
    common.add_argument("--out", type=Path, help="output CSV (default stdout)")
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log level on stderr (default LOG_LEVEL setting)",
    )

    parser = _Parser(prog="rrdps", description="RRDPS key rates with slow basis choice.")
    parser.add_argument("--version", action="version", version=f"rrdps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(command: Command, text: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            command.value,
            parents=[common],
            help=text,
            description=text,
            argument_default=argparse.SUPPRESS,
        )

    keyrate = add(Command.keyrate, "key rate at one operating point")
    _add_params(keyrate, RATE_PARAMS)

    curve = add(Command.curve, "optimized key rate over an eta grid for each M")
    _add_params(curve, BASE_PARAMS)
    _add_search(curve, with_eta=False)

    optimize = add(Command.optimize, "optimized key rate with M chosen per eta")
    _add_params(optimize, BASE_PARAMS)
    _add_search(optimize, with_eta=True)

    attack = add(Command.attack, "intercept-resend attack on BB84 with slow basis choice")
    group = attack.add_argument_group("scenario")
    group.add_argument("--p-z", dest="p_z", type=float, help="Z basis probability (default 0.99)")
    group.add_argument("--M", type=int, help="pulses per sequence (default 100)")
    group.add_argument("--n-sequences", type=int, help="sequences sent (default 10000)")
    group.add_argument("--n-measured", type=int, help="sequences Eve measures (default 99)")
    group.add_argument("--n-clean", type=int, help="sequences Eve forwards untouched (default 1)")
    group.add_argument(
        "--eta-nominal", type=float, help="honest channel transmission (default 0.01)"
    )
    _add_stochastic(attack)

    validate = add(Command.mc_validate, "Monte Carlo check of the channel model")
    _add_params(validate, RATE_PARAMS)
    validate.add_argument(
        "--mode",
        choices=[m.value for m in McMode],
        help="standard or beam-dump measurement (default standard)",
    )
    _add_stochastic(validate)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError(f"unknown command {command!r}")


def load_config(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {str(key).replace("-", "_"): value for key, value in data.items()}


def merge_options(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict[str, Any]:
    """Config file values overlaid with the flags given on the command line."""
    flags = vars(args).copy()
    command = flags.pop("command")
    path = flags.pop("config", None)
    if path is None:
        return flags

    known = {a.dest for a in _subparser(parser, command)._actions} - {"help", "config"}
    values = load_config(path)
    if values.pop("command", command) != command:
        raise UsageError(f"config {path} is for another command")
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    if isinstance(values.get("M_list"), str):
        values["M_list"] = _int_list(values["M_list"])
    return {**values, **flags}


def build_run(command: Command, options: dict[str, Any]) -> tuple[RunConfig, dict[str, Any]]:
    """Split merged options into the RunConfig and the handler's own options."""
    options = dict(options)
    allowed = {
        Command.keyrate: RATE_PARAMS,
        Command.mc_validate: RATE_PARAMS,
        Command.curve: BASE_PARAMS,
        Command.optimize: BASE_PARAMS,
    }.get(command, ())
    fields: dict[str, Any] = {"command": command, "seed": get_settings().DEFAULT_SEED}
    fields["params"] = {key: options.pop(key) for key in allowed if key in options}
    for key, field in RUN_KEYS.items():
        if key in options:
            fields[field] = options.pop(key)
    return RunConfig(**fields), options


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(part) for part in err["loc"]) or exc.title
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def _fail(message: str, status: int) -> int:
    sys.stderr.write(f"rrdps: error: {message}\n")
    return status


def parse_and_dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command = Command(args.command)
        options = merge_options(parser, args)
        configure_logging(options.pop("log_level", get_settings().LOG_LEVEL))
        run, handler_options = build_run(command, options)
        header, rows = dispatch(run, handler_options)
        try:
            write_csv(header, rows, run.output_path)
        except OSError as exc:
            reason = exc.strerror or str(exc)
            return _fail(f"cannot write --out {run.output_path}: {reason}", EXIT_USAGE)
    except UsageError as exc:
        return _fail(str(exc), EXIT_USAGE)
    except ValidationError as exc:
        return _fail(_describe(exc), EXIT_INVALID)
    except (RRDPSError, ValueError, TypeError) as exc:
        return _fail(str(exc), EXIT_INVALID)
    return EXIT_OK
