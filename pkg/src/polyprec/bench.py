"""Benchmark harness: configured runs, dimension sweeps, and the
eigenvector backward-error study.

A run builds the problem, factorizes, solves with PCG against a seeded
uniform-random right-hand side, and reports the counters the CSV schema
names. Flop counts are analytic integer tallies of the dense kernels, and
the memory column is the peak of live trailing-matrix block bytes (a
portable stand-in for process-level peak memory, proportional but not
identical to it).
"""

import csv
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import problems
from .errors import PolyprecError
from .factorization import RankTrace, SCHEMES, factorize
from .krylov import pcg

CSV_FIELDS = (
    "n", "scheme", "degree", "mode", "it_C", "t_F", "t_S",
    "peak_blocks_bytes", "flops_factorize", "flops_apply",
    "max_node_size", "levels",
)

# columns that vary between identical runs (excluded from determinism checks)
TIMING_FIELDS = ("t_F", "t_S")


@dataclass
class RunConfig:
    problem: str = "poisson"
    dims: tuple = (16, 16, 16)
    spacing: float = 1.0
    refinement: int = 4
    contrast: float = 1e3
    layers: int = 4
    field_seed: int = 0
    field_path: str = None
    tile: tuple = None
    mtx_path: str = None
    coords_path: str = None
    scheme: str = "nest-2-2"
    degree: int = 1
    b: int = None
    skip_levels: int = None
    mode: str = "polynomial"
    rank_tol: float = 1e-10
    tol: float = 1e-10
    maxit: int = 5000
    seed: int = 0
    rank_trace: str = None
    out: str = None
    detail: str = None

    def validate(self):
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1, or 2, got {self.degree}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.mode not in ("polynomial", "lowrank-equiv", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.b is not None and self.b < 2:
            raise ValueError("b must be >= 2")
        if not (0.0 < self.tol < 1.0):
            raise ValueError("tol must be in (0, 1)")
        if not (0.0 < self.rank_tol < 1.0):
            raise ValueError("rank_tol must be in (0, 1)")
        if self.mode == "lowrank-equiv" and not self.rank_trace:
            raise ValueError("mode 'lowrank-equiv' requires --rank-trace from a "
                             "prior polynomial run")

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**data)
        if cfg.dims is not None and np.isscalar(cfg.dims):
            cfg.dims = (int(cfg.dims),) * 3
        if cfg.dims is not None:
            cfg.dims = tuple(int(d) for d in cfg.dims)
        return cfg


@dataclass
class BenchRecord:
    n: int
    scheme: str
    degree: int
    mode: str
    it_C: int
    t_F: float
    t_S: float
    peak_blocks_bytes: int
    flops_factorize: int
    flops_apply: int
    max_node_size: int
    levels: int

    def row(self):
        return [getattr(self, f) for f in CSV_FIELDS]


def make_problem(cfg):
    """Instantiate the configured problem."""
    if cfg.problem == "poisson":
        nx, ny, nz = cfg.dims
        return problems.poisson7(nx, ny, nz, spacing=cfg.spacing)
    if cfg.problem == "darcy":
        if cfg.field_path:
            fld = problems.read_perm_field(cfg.field_path)
        else:
            fld = problems.synth_perm_field(
                cfg.dims, layers=cfg.layers, contrast=cfg.contrast, seed=cfg.field_seed
            )
        if cfg.tile:
            fld = problems.tile_field(fld, cfg.tile)
        return problems.darcy_tpfa(fld, spacing=cfg.spacing)
    if cfg.problem == "elasticity":
        return problems.elasticity_hex_beam(cfg.refinement)
    if cfg.problem == "mtx":
        if not cfg.mtx_path or not cfg.coords_path:
            raise ValueError("problem 'mtx' needs mtx_path and coords_path")
        return problems.read_mtx(cfg.mtx_path, cfg.coords_path)
    raise ValueError(f"unknown problem {cfg.problem!r}")


def _factorize_cfg(cfg, prob, trace=None):
    if cfg.mode == "exact":
        return factorize(prob, scheme=cfg.scheme, degree=cfg.degree, b=cfg.b,
                         skip_levels=cfg.skip_levels, compression=False)
    if cfg.mode == "lowrank-equiv":
        if trace is None:
            trace = RankTrace.load(cfg.rank_trace)
        return factorize(prob, scheme=cfg.scheme, degree=cfg.degree, b=cfg.b,
                         skip_levels=cfg.skip_levels, mode="lowrank",
                         rank_tol=cfg.rank_tol, rank_trace=trace)
    return factorize(prob, scheme=cfg.scheme, degree=cfg.degree, b=cfg.b,
                     skip_levels=cfg.skip_levels, rank_tol=cfg.rank_tol)


def run(cfg):
    """Execute one configured run and return its record.

    Writes one CSV row to cfg.out (header added when the file is new), an
    optional JSON detail file with the residual history and per-level
    ranks, and the rank trace file after polynomial runs when a path is
    configured.
    """
    cfg.validate()
    prob = make_problem(cfg)
    t0 = time.perf_counter()
    P = _factorize_cfg(cfg, prob)
    t_F = time.perf_counter() - t0
    rng = np.random.default_rng(cfg.seed)
    b = rng.uniform(-1.0, 1.0, prob.n)
    t0 = time.perf_counter()
    x, rep = pcg(lambda v: prob.matrix @ v, b, precond=P.apply_inverse,
                 tol=cfg.tol, maxit=cfg.maxit)
    t_S = time.perf_counter() - t0
    rec = BenchRecord(
        n=prob.n, scheme=cfg.scheme, degree=cfg.degree, mode=cfg.mode,
        it_C=rep.iterations, t_F=t_F, t_S=t_S,
        peak_blocks_bytes=P.stats["peak_blocks_bytes"],
        flops_factorize=P.stats["flops_factorize"],
        flops_apply=P.stats["flops_apply"],
        max_node_size=P.stats["max_node_size"],
        levels=P.stats["levels"],
    )
    if cfg.out:
        write_csv(cfg.out, [rec], append=True)
    if cfg.rank_trace and cfg.mode == "polynomial":
        P.rank_trace.save(cfg.rank_trace)
    if cfg.detail:
        detail = {
            "config": {k: v for k, v in asdict(cfg).items() if v is not None},
            "converged": rep.converged,
            "final_rel_residual": rep.final_rel_residual,
            "residual_history": rep.residual_history,
            "per_level": P.stats["per_level"],
            "seed": cfg.seed,
        }
        with open(cfg.detail, "w") as f:
            json.dump(detail, f, indent=1)
    return rec


def write_csv(path, records, append=False):
    new = True
    if append:
        try:
            with open(path) as f:
                new = not f.readline()
        except FileNotFoundError:
            pass
    with open(path, "a" if append else "w") as f:
        w = csv.writer(f)
        if new or not append:
            w.writerow(CSV_FIELDS)
        for r in records:
            if r is not None:
                w.writerow(r.row())


def loglog_slope(ns, ys):
    """Least-squares slope of log(y) against log(n)."""
    ns = np.log(np.asarray(ns, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(ns, ys, 1)[0])


def sweep(configs, out=None):
    """Run a list of configurations, tolerating per-run failures.

    Returns (records, summary): failed cells are None in records, and the
    summary holds iteration growth ratios and the log-log slopes of the
    factorization and application flop counters over the successful runs.
    """
    records = []
    failures = []
    for cfg in configs:
        try:
            cfg2 = RunConfig(**{**asdict(cfg), "out": None})
            records.append(run(cfg2))
        except (PolyprecError, ValueError, RuntimeError) as exc:
            records.append(None)
            failures.append(f"{cfg.problem}-{cfg.dims}: {exc}")
    ok = [r for r in records if r is not None]
    summary = {"runs": len(records), "failed": len(failures), "failures": failures}
    if len(ok) >= 2:
        ns = [r.n for r in ok]
        summary["slope_flops_factorize"] = loglog_slope(ns, [r.flops_factorize for r in ok])
        summary["slope_flops_apply"] = loglog_slope(ns, [r.flops_apply for r in ok])
        summary["it_ratio_last_first"] = ok[-1].it_C / ok[0].it_C
        summary["max_node_sizes"] = [r.max_node_size for r in ok]
    if out:
        write_csv(out, records)
    return records, summary


def eig_error_study(cfg, k=1):
    """Backward error on the analytic extreme eigenpairs of the Poisson
    matrix, for the polynomial operator and its rank-revealing equivalent.

    For eigenpair (lambda, v) the reported error is
    ||(A - A_approx) v||_2 / lambda with v of unit length; E_1 uses the
    largest eigenvalue's eigenvector and E_n the smallest's. k > 1 adds
    the next k-1 harmonics from each end of the spectrum.
    """
    cfg.validate()
    if cfg.problem != "poisson":
        raise ValueError("the eigenvector study needs the poisson problem")
    prob = make_problem(cfg)
    nx, ny, nz = prob.grid.dims
    pairs = {}
    for j in range(k):
        pairs[f"E_1+{j}" if j else "E_1"] = (nx - j, ny - j, nz - j)
        pairs[f"E_n-{j}" if j else "E_n"] = (1 + j, 1 + j, 1 + j)

    report = {"n": prob.n, "scheme": cfg.scheme, "degree": cfg.degree}
    if cfg.mode == "exact":
        operators = {"exact": _factorize_cfg(cfg, prob)}
    else:
        poly = factorize(prob, scheme=cfg.scheme, degree=cfg.degree, b=cfg.b,
                         skip_levels=cfg.skip_levels, rank_tol=cfg.rank_tol)
        lowrank = factorize(prob, scheme=cfg.scheme, degree=cfg.degree, b=cfg.b,
                            skip_levels=cfg.skip_levels, mode="lowrank",
                            rank_tol=cfg.rank_tol, rank_trace=poly.rank_trace)
        operators = {"polynomial": poly, "lowrank-equiv": lowrank}
    A = prob.matrix
    for name, P in operators.items():
        errs = {}
        for label, harmonics in pairs.items():
            lam, v = problems.poisson_eigenpair(prob.grid.dims, prob.grid.spacing, harmonics)
            errs[label] = float(np.linalg.norm(A @ v - P.apply_operator(v)) / lam)
        report[name] = errs
    if len(operators) == 2:
        report["ratio_E_n"] = (
            report["polynomial"]["E_n"] / report["lowrank-equiv"]["E_n"]
            if report["lowrank-equiv"]["E_n"] > 0 else float("nan")
        )
    return report
