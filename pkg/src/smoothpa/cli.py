"""Command-line entry points.

Subcommands: run (sweep from a JSON config), chi2, nml, cover, fit. Diagnostic
subcommands emit JSON reports on stdout. Exit codes: 0 success, 2 config error,
3 numerical-assertion failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adversary import SmoothDistribution, min_support_size
from .diagnostics import chi_square_bruteforce, chi_square_closed_form, nml_value
from .errors import ConfigError, NumericalAssertionError
from .harness import fit_scaling, parse_config, run
from .hypotheses import Hypothesis, RegionFamily
from .learners import epsilon_cover


def _cmd_run(args) -> dict:
    cfg = parse_config(args.config)
    summary = run(cfg, output_dir=args.output_dir)
    return {"cells": len(summary.cells),
            "output_dir": str(args.output_dir or cfg.output_dir or ".")}


def _cmd_chi2(args) -> dict:
    u = args.universe
    support = list(range(min_support_size(args.sigma, u)))
    target = SmoothDistribution.uniform_on(u, support, args.sigma)
    closed, bound = chi_square_closed_form(target, args.n)
    brute = discarded = None
    if not args.no_brute:
        try:
            brute, discarded = chi_square_bruteforce(target, args.n, args.cutoff)
        except ValueError:
            pass  # enumeration infeasible at this size; report closed form only
    return {"chi2": {"closed": closed, "brute": brute, "bound": bound,
                     "discarded": discarded}}


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def _cmd_nml(args) -> dict:
    spec = _load_json(args.class_file)
    if not isinstance(spec, dict) or "family" not in spec or "hypotheses" not in spec:
        raise ConfigError("class file: needs 'family' and 'hypotheses'")
    family = RegionFamily.from_spec(spec["family"])
    hyps = [Hypothesis(int(h[0]), float(h[1]), float(h[2])) for h in spec["hypotheses"]]
    contexts = _load_json(args.contexts)
    if not isinstance(contexts, list):
        raise ConfigError("contexts file: must be a JSON list of context ids")
    try:
        value = nml_value(family, hyps, contexts)
    except ValueError as e:
        raise ConfigError(f"nml: {e}") from None
    return {"nml": value}


def _cmd_cover(args) -> dict:
    family = RegionFamily.from_json(Path(args.family).read_text())
    idx = epsilon_cover(family, args.eps)
    return {"cover": [int(i) for i in idx], "size": len(idx)}


def _cmd_fit(args) -> dict:
    summary = _load_json(args.summary)
    return {"fits": fit_scaling(summary)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothpa")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("chi2", help="chi-square stability report")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--universe", type=int, required=True)
    p.add_argument("--cutoff", type=float, default=1e-12)
    p.add_argument("--no-brute", action="store_true")
    p.set_defaults(func=_cmd_chi2)

    p = sub.add_parser("nml", help="exact NML value on fixed contexts")
    p.add_argument("--class", dest="class_file", required=True,
                   help="JSON with 'family' and 'hypotheses' [[region, t0, t1], ...]")
    p.add_argument("--contexts", required=True, help="JSON list of context ids")
    p.set_defaults(func=_cmd_nml)

    p = sub.add_parser("cover", help="epsilon-cover of a region family")
    p.add_argument("--family", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=_cmd_cover)

    p = sub.add_parser("fit", help="scaling-law fits from a sweep summary")
    p.add_argument("--summary", required=True)
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalAssertionError as e:
        print(f"numerical assertion failed: {e}", file=sys.stderr)
        return 3
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
