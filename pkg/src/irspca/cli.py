"""Command-line entry point.

Subcommands: calibrate, arl2fa, add, wawtg, snr, figure <4..10>. Exit codes:
0 success, 2 configuration/contract error, 3 numeric error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, ContractError, NumericError
from .harness import emit_csv, experiment_spec, figure_spec, parse_config, \
    run_experiment

_COMMANDS = ("calibrate", "arl2fa", "add", "wawtg", "snr")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--trials", type=int, help="trial / block count")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    parser.add_argument("--workers", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irspca",
        description="Monte Carlo experiments for reflecting-surface pilot "
                    "contamination attacks, quickest detection, and the "
                    "cooperative zero-forcing countermeasure.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(sub.add_parser(name, help=f"run a {name} experiment"))
    fig = sub.add_parser("figure", help="reproduce a study figure trend")
    fig.add_argument("figure_id", type=int, choices=range(4, 11),
                     metavar="4..10")
    _add_common(fig)
    fig.add_argument("--no-plot", action="store_true",
                     help="emit CSV only, skip the PNG")
    return parser


def _collect_overrides(args) -> dict[str, str]:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.trials is not None:
        raw["trials"] = str(args.trials)
    if args.workers is not None:
        raw["workers"] = str(args.workers)
    if args.out is not None:
        raw["out"] = args.out
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _collect_overrides(args)
        if args.command == "figure":
            raw.pop("kind", None)
            spec = figure_spec(args.figure_id, raw)
        else:
            raw["kind"] = args.command
            spec = experiment_spec(raw)
        table = run_experiment(spec)
        out = spec.out
        if args.command == "figure" and out is None:
            out = f"figure{args.figure_id}.csv"
        if out is None:
            sys.stdout.write("\n".join(table.lines()) + "\n")
        else:
            emit_csv(table, out)
            print(f"wrote {out}")
            if args.command == "figure" and not args.no_plot:
                from .plotting import render_figure
                png = str(Path(out).with_suffix(".png"))
                render_figure(table, png)
                print(f"wrote {png}")
        return 0
    except (ConfigError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
