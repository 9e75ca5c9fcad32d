"""Batch command-line interface.

Subcommands: haar, simulate, replica, mfim, ssep, fit, reproduce.  Config
files are flat JSON; command-line flags override config keys.  Exit
codes: 0 success, 2 configuration error, 3 numerical-integrity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigError, IntegrityError


def _add_config_flags(p):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--model")
    p.add_argument("--L", type=int)
    p.add_argument("--L_A", type=int, nargs="*")
    p.add_argument("--t-max", type=int, dest="t_max")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--convention", choices=("annealed", "quenched"))
    p.add_argument("--out")
    p.add_argument("--theta", type=float)
    p.add_argument("--species", type=int)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--emit-plots", action="store_true")


def _config_from_args(args, force_model=None) -> ExperimentConfig:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    for key in ("model", "L", "L_A", "t_max", "realizations", "seed",
                "convention", "out", "theta", "species"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if force_model:
        raw["model"] = force_model
    raw.setdefault("grid", {})
    return ExperimentConfig.from_dict(raw)


def _run_and_report(cfg: ExperimentConfig, args) -> int:
    from . import runner

    out = runner.run(cfg, workers=args.workers)
    print(f"wrote {out}")
    if args.emit_plots:
        from . import plots
        from .trace import parse_csv

        csv_path = Path(out) / "trace.csv"
        if csv_path.exists():
            written = plots.emit_trace_plots(
                parse_csv(csv_path.read_text()), Path(out) / "plots"
            )
            print(f"wrote {len(written)} SVG charts")
    return 0


def cmd_haar(args) -> int:
    from . import haar

    L_A_list = args.L_A if args.L_A else list(range(0, args.L + 1))
    reports = [
        haar.saturation_report(args.model, args.L, L_A).as_dict()
        for L_A in L_A_list
    ]
    print(json.dumps(reports, indent=2))
    return 0


def cmd_simulate(args) -> int:
    return _run_and_report(_config_from_args(args), args)


def cmd_replica(args) -> int:
    cfg = _config_from_args(args, force_model="replica-oracle")
    return _run_and_report(cfg, args)


def cmd_mfim(args) -> int:
    cfg = _config_from_args(args, force_model="mfim")
    return _run_and_report(cfg, args)


def cmd_ssep(args) -> int:
    cfg = _config_from_args(args, force_model="ssep")
    return _run_and_report(cfg, args)


def cmd_fit(args) -> int:
    import numpy as np

    from . import fitting
    from .trace import parse_csv, series_from_rows

    rows = parse_csv(Path(args.csv).read_text())
    t, m, s = series_from_rows(rows, args.observable, args.L_A)
    keep = m > 0
    t, m, s = t[keep], m[keep], s[keep]
    window = tuple(args.window) if args.window else None
    if window is None and args.auto_window:
        window = fitting.auto_window(t, m, s, args.form)
        print(f"auto-selected window: {window}", file=sys.stderr)
    if args.form == "power":
        res = fitting.fit_power_law(t, m, s, window=window, weighted=not args.unweighted)
    else:
        res = fitting.fit_exponential_tail(t, m, s, window=window,
                                           weighted=not args.unweighted)
    print(json.dumps(res.as_dict(), indent=2))
    return 0


def cmd_reproduce(args) -> int:
    import os

    from . import recipes

    if args.cache:
        os.environ[recipes.CACHE_ENV] = args.cache
    if args.list:
        for name in recipes.RECIPE_NAMES:
            print(name)
        return 0
    report = recipes.reproduce(args.recipe, workers=args.workers)
    text = json.dumps(report, indent=2, sort_keys=True, default=str)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cohdyn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("haar", help="exact Haar saturation values as JSON")
    ph.add_argument("--model", required=True)
    ph.add_argument("--L", type=int, required=True)
    ph.add_argument("--L_A", type=int, nargs="*")
    ph.set_defaults(fn=cmd_haar)

    for name, fn in (("simulate", cmd_simulate), ("replica", cmd_replica),
                     ("mfim", cmd_mfim), ("ssep", cmd_ssep)):
        ps = sub.add_parser(name, help=f"run a {name} ensemble from a config")
        _add_config_flags(ps)
        ps.set_defaults(fn=fn)

    pf = sub.add_parser("fit", help="fit a stored trace series")
    pf.add_argument("--csv", required=True)
    pf.add_argument("--observable", required=True)
    pf.add_argument("--L_A", type=int, required=True)
    pf.add_argument("--form", choices=("power", "exponential"), default="power")
    pf.add_argument("--window", type=float, nargs=2)
    pf.add_argument("--auto-window", action="store_true")
    pf.add_argument("--unweighted", action="store_true")
    pf.set_defaults(fn=cmd_fit)

    pr = sub.add_parser("reproduce", help="desk-scale reproduction recipes")
    pr.add_argument("--recipe")
    pr.add_argument("--list", action="store_true")
    pr.add_argument("--cache", help="cache root for recipe ensembles")
    pr.add_argument("--out", help="write the JSON report here as well")
    pr.add_argument("--workers", type=int, default=None)
    pr.set_defaults(fn=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce" and not args.list and not args.recipe:
            raise ConfigError("reproduce requires --recipe or --list")
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except IntegrityError as exc:
        print(f"numerical integrity error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
