"""Command line entry points: run, filter-field, constants, spectrum."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import parse_config, preset_config, PRESETS
from .errors import OctalignError
from .runner import constants_report, filter_field_file, run, spectrum_file


def _add_config_args(p, required=True):
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--config", metavar="PATH",
                       help="experiment configuration file (INI)")
    group.add_argument("--preset", metavar="NAME",
                       help="bundled preset: " + ", ".join(sorted(PRESETS)))


def _load_config(args):
    if args.preset:
        return preset_config(args.preset)
    return parse_config(args.config)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="octalign",
        description="Monotonic optimal control of molecular alignment "
                    "with spectrally constrained fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an optimization experiment")
    _add_config_args(p)
    p.add_argument("--out", metavar="DIR", default="octalign-out",
                   help="output directory (default: octalign-out)")
    p.add_argument("--max-iters", type=int, metavar="N",
                   help="override the configured iteration cap")

    p = sub.add_parser("filter-field",
                       help="apply a filter once to a stored field")
    p.add_argument("field", help="input field file (t_au,e_au table)")
    _add_config_args(p)
    p.add_argument("--out", metavar="PATH", required=True,
                   help="output field file")

    p = sub.add_parser("constants",
                       help="print derived molecular constants")
    _add_config_args(p, required=False)

    p = sub.add_parser("spectrum",
                       help="write the spectrum of a stored field")
    p.add_argument("field", help="input field file (t_au,e_au table)")
    p.add_argument("--out", metavar="PATH", required=True,
                   help="output spectrum file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load_config(args)
            if args.max_iters is not None:
                opts = dataclasses.replace(config.opts,
                                           max_iters=args.max_iters)
                config = dataclasses.replace(config, opts=opts)
            result, report = run(config, args.out)
            final = result.history[-1]
            zero = sum(1 for r in result.history if r.k > 0 and r.mu == 0.0)
            print(f"J={final.cost:.6g} projection={final.projection:.6g} "
                  f"iterations={result.iterations} "
                  f"mu: {zero} zero / final {final.mu:.6g} "
                  f"(files in {args.out})")
        elif args.command == "filter-field":
            config = _load_config(args)
            report = filter_field_file(args.field, config.filter_spec,
                                       args.out)
            print(f"out-of-band energy before={report['out_of_band_before']:.6g} "
                  f"after={report['out_of_band_after']:.6g} "
                  f"-> {args.out}")
        elif args.command == "constants":
            if args.config or args.preset:
                params = _load_config(args).params
                print(constants_report(params), end="")
            else:
                print(constants_report(), end="")
        elif args.command == "spectrum":
            spectrum_file(args.field, args.out)
            print(f"spectrum written to {args.out}")
    except OctalignError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
