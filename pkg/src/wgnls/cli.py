"""
Command-line entry point: ``python -m wgnls <subcommand> [options]``.

Options given on the command line override the YAML config passed with
``--config``; the merged config is validated before any compute.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import COMMANDS, ConfigError, RunConfig, load_config
from .runner import _jsonable, run

__all__ = ["build_parser", "main"]

# (flag, section, key, type); flags shared by several subcommands are listed once.
_MODEL = [("--d", "model", "d", int), ("--alpha", "model", "alpha", float)]
_GRID = [("--Lx", "grid", "Lx", float), ("--Nx", "grid", "Nx", int), ("--Ny", "grid", "Ny", int)]
_SOLVER = [
    ("--init", "solver", "init", str),
    ("--eps", "solver", "eps", float),
    ("--max-iter", "solver", "max_iter", int),
    ("--pde-tol", "solver", "pde_tol", float),
    ("--k-tol", "solver", "k_tol", float),
    ("--perturb", "solver", "perturb", float),
    ("--rescale-box", "solver", "rescale_box", bool),
]
_EVOLVE = [
    ("--dt", "evolution", "dt", float),
    ("--t-end", "evolution", "t_end", float),
    ("--record-every", "evolution", "record_every", int),
    ("--R", "evolution", "R", float),
    ("--initial", "evolution", "initial", str),
    ("--mass", "evolution", "mass", float),
    ("--dilation", "evolution", "dilation", float),
    ("--amplitude", "evolution", "amplitude", float),
    ("--width", "evolution", "width", float),
    ("--y-perturb", "evolution", "y_perturb", float),
    ("--field", "evolution", "field_path", str),
    ("--checkpoint-every", "evolution", "checkpoint_every", int),
]

_SUB = {
    "ground-state": _MODEL + _GRID + _SOLVER + [("--c", "sweep", "c", float), ("--lam", "sweep", "lam", float)],
    "curve": _MODEL + _GRID + _SOLVER + [("--c", "sweep", "c", float)],
    "bifurcation": _MODEL + _GRID + _SOLVER
    + [("--lam", "sweep", "lam", float), ("--bracket-tol", "solver", "bracket_tol", float)],
    "evolve": _MODEL + _GRID + _EVOLVE,
    "verify": _MODEL + _GRID,
    "exponents": _MODEL,
}
_LISTS = {("sweep", "c"), ("sweep", "lam")}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgnls", description="Ground states and dynamics of NLS on R^d x T.")
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--seed", type=int, help="64-bit seed for all randomness")
    ap.add_argument("--workers", type=int, help="parallel worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        for flag, sec, key, typ in _SUB[name]:
            if typ is bool:
                sp.add_argument(flag, dest=f"{sec}.{key}", action=argparse.BooleanOptionalAction)
                continue
            kw = {"nargs": "+"} if (sec, key) in _LISTS else {}
            sp.add_argument(flag, dest=f"{sec}.{key}", type=typ, **kw)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    data = base.to_dict()
    data["command"] = args.command
    for top in ("seed", "workers"):
        if getattr(args, top) is not None:
            data[top] = getattr(args, top)
    if args.out:
        data["output"]["directory"] = args.out
    for dest, val in vars(args).items():
        if "." in dest and val is not None:
            sec, key = dest.split(".")
            data[sec][key] = val
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        env = run(cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    print(json.dumps(_jsonable(env.outputs), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
