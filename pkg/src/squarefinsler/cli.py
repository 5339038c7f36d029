"""Command-line entry point: ``squarefinsler verify`` and ``squarefinsler curvature``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ContractViolation, FamilyInadmissibleError
from .harness import DEFAULT_TOLERANCES, FAMILIES, RunConfig, emit_report, point_report, run_verify


def _floats(text):
    return tuple(float(v) for v in text.split(",")) if text else None


def _tolerances(text):
    out = {}
    for item in filter(None, (text or "").split(",")):
        name, _, val = item.partition("=")
        if name not in DEFAULT_TOLERANCES or not val:
            raise argparse.ArgumentTypeError(f"bad tolerance {item!r}")
        out[name] = float(val)
    return out


def _family_args(p):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--dim", type=int, dest="n")
    p.add_argument("--mu", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--a", type=_floats, help="comma-separated coefficients")
    p.add_argument("--sign", type=int, choices=(1, -1))


def build_parser():
    parser = argparse.ArgumentParser(prog="squarefinsler",
                                     description="Numerical checks for square Finsler metrics.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="sample a family and run every check")
    _family_args(v)
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--radius", type=float)
    v.add_argument("--tol", type=_tolerances, dest="tolerances", help="name=val,...")
    v.add_argument("--out", dest="output")
    v.add_argument("--format", choices=("json", "text"))

    c = sub.add_parser("curvature", help="curvature quantities at one (x, y)")
    _family_args(c)
    c.add_argument("--point", type=_floats, required=True)
    c.add_argument("--direction", type=_floats, required=True)
    return parser


def _config(args, keys):
    given = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        data.update(given)
        return RunConfig.from_mapping(data)
    return RunConfig(**given)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    family_keys = ("family", "n", "mu", "k", "a", "sign")
    try:
        if args.command == "verify":
            config = _config(args, family_keys + ("samples", "seed", "radius", "tolerances",
                                                  "output", "format"))
            report = run_verify(config)
            text = emit_report(report, config.format)
            if config.output:
                with open(config.output, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0 if report.passed else 1
        config = _config(args, family_keys)
        out = point_report(config, args.point, args.direction)
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
        return 0
    except (ContractViolation, FamilyInadmissibleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
