"""Command-line front end.

Subcommands: `run` (one factorize+solve, one CSV row), `sweep` (a ladder of
grid sizes with a scaling summary), `eig-study` (backward error on the
analytic Poisson eigenvectors for both compression flavors), and
`gen-problem` (write a generated problem as Matrix Market + coordinates
CSV). Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

import argparse
import json
import sys
from dataclasses import asdict

from . import problems
from .bench import RunConfig, eig_error_study, run, sweep
from .errors import (
    IndefiniteDetectedError,
    NotSPDError,
    ParseError,
    PolyprecError,
)

SCHEME_ALIASES = {
    "nestallall": "nest-all-all",
    "nest2all": "nest-2-all",
    "nest22": "nest-2-2",
    "genallall": "gen-all-all",
}


def normalize_scheme(name):
    key = name.lower().replace("-", "").replace("_", "")
    return SCHEME_ALIASES.get(key, name)


def _add_common(p):
    p.add_argument("--problem", default="poisson",
                   choices=["poisson", "darcy", "elasticity", "mtx"])
    p.add_argument("--dims", type=int, nargs="+", metavar="N",
                   help="grid dims; one value means a cube")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--refinement", type=int, default=4,
                   help="elasticity beam refinement")
    p.add_argument("--contrast", type=float, default=1e3,
                   help="synthetic mobility field max/min ratio")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--field-seed", type=int, default=0)
    p.add_argument("--field", dest="field_path", help="mobility field file")
    p.add_argument("--tile", type=int, nargs=3, metavar=("RX", "RY", "RZ"))
    p.add_argument("--mtx", dest="mtx_path")
    p.add_argument("--coords", dest="coords_path")
    p.add_argument("--scheme", default="nest-2-2")
    p.add_argument("--degree", type=int, default=1, choices=[0, 1, 2])
    p.add_argument("--b", type=int, help="level-1 cell side (default per scheme)")
    p.add_argument("--skip-levels", type=int, dest="skip_levels",
                   help="levels without compression (default: 2 nested, 0 general)")
    p.add_argument("--mode", default="polynomial",
                   choices=["polynomial", "lowrank-equiv", "exact"])
    p.add_argument("--rank-tol", type=float, default=1e-10, dest="rank_tol")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--maxit", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-trace", dest="rank_trace",
                   help="rank trace file: written by polynomial runs, replayed "
                        "by lowrank-equiv runs")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--detail", help="JSON detail output path")
    p.add_argument("--config", help="JSON or TOML file with RunConfig fields; "
                                    "explicit flags override it")


def _load_config_file(path):
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as f:
            return tomllib.load(f)
    with open(path) as f:
        return json.load(f)


def _config_from_args(args):
    data = {}
    if args.config:
        data.update(_load_config_file(args.config))
    defaults = RunConfig()
    for name in RunConfig.__dataclass_fields__:
        val = getattr(args, name, None)
        if val is not None and val != getattr(defaults, name):
            data[name] = val
        elif name not in data and val is not None:
            data[name] = val
    if "scheme" in data:
        data["scheme"] = normalize_scheme(data["scheme"])
    cfg = RunConfig.from_dict(data)
    cfg.validate()
    return cfg


def _cmd_run(args):
    cfg = _config_from_args(args)
    rec = run(cfg)
    print(json.dumps(asdict(rec)))
    return 0


def _cmd_sweep(args):
    cfg = _config_from_args(args)
    configs = []
    for d in args.ladder:
        configs.append(RunConfig(**{**asdict(cfg), "dims": (d, d, d), "out": None}))
    records, summary = sweep(configs, out=cfg.out)
    print(json.dumps(summary, indent=1))
    return 0


def _cmd_eig_study(args):
    cfg = _config_from_args(args)
    report = eig_error_study(cfg, k=args.k)
    print(json.dumps(report, indent=1))
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report, f, indent=1)
    return 0


def _cmd_gen_problem(args):
    from .bench import make_problem

    cfg = _config_from_args(args)
    prob = make_problem(cfg)
    problems.write_mtx(prob.matrix, prob.coords, args.mtx_out, args.coords_out)
    print(json.dumps({"n": prob.n, "label": prob.label,
                      "matrix": args.mtx_out, "coords": args.coords_out}))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="polyprec",
        description="Hierarchical polynomial-preserving preconditioner benchmarks",
        epilog="The peak_blocks_bytes column tracks the peak of live "
               "trailing-matrix block bytes. It is proportional to, but not "
               "identical with, whole-process peak memory. max_node_size is "
               "the largest active node size at the end of a level's "
               "compression phase.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one factorization + PCG solve")
    _add_common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="ladder of cubic grid sizes")
    _add_common(p_sweep)
    p_sweep.add_argument("--ladder", type=int, nargs="*", default=[],
                         metavar="N", help="cubic grid sizes to sweep")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_eig = sub.add_parser("eig-study", help="extreme eigenvector backward errors")
    _add_common(p_eig)
    p_eig.add_argument("--k", type=int, default=1)
    p_eig.add_argument("--report", help="also write the JSON report here")
    p_eig.set_defaults(fn=_cmd_eig_study)

    p_gen = sub.add_parser("gen-problem", help="write a problem as MTX + coords CSV")
    _add_common(p_gen)
    p_gen.add_argument("--mtx-out", required=True)
    p_gen.add_argument("--coords-out", required=True)
    p_gen.set_defaults(fn=_cmd_gen_problem)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "dims", None) is not None and len(args.dims) == 1:
        args.dims = args.dims * 3
    if getattr(args, "dims", None) is not None:
        args.dims = tuple(args.dims)
    if getattr(args, "tile", None) is not None:
        args.tile = tuple(args.tile)
    try:
        return args.fn(args)
    except (ValueError,) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    except (NotSPDError, IndefiniteDetectedError, RuntimeError) as exc:
        stage = type(exc).__name__
        print(f"error: numerical failure ({stage}): {exc}", file=sys.stderr)
        return 3
    except (OSError, ParseError) as exc:
        print(f"error: i/o: {exc}", file=sys.stderr)
        return 4
    except PolyprecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
