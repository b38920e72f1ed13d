"""Command-line entry point: ``parisilab <command> CONFIG [options]``.

Scalar results print as one ``key=value`` record per line; grids and overlap
arrays go to CSV files in the output directory (``output`` in the config, or
the ``PARISILAB_OUTPUT_DIR`` environment variable, which takes precedence).

Exit status: 0 success, 2 invalid config or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .bounds import ass_increment, guerra_bound_check, guerra_phi_grid
from .config import ConfigError, RunConfig, load_config
from .diagnostics import (GGQuery, gg_statistic, positivity_probability, rpc_overlap_arrays,
                          simulator_overlap_arrays, ultrametricity_fraction)
from .model import MixtureSpec
from .optimizer import OptimizerOptions, optimize_full
from .parisi import QuadratureGrid, evaluate_X0, evaluate_parisi, format_value
from .rpc import TruncationWarning, evaluate_X0_rpc
from .simulator import free_energy_mc

ENV_OUTPUT = "PARISILAB_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

CSV_HELP = """CSV outputs (written to the output directory):
  simulate.csv    N,mean,stderr,n_disorder,pert,minus,seed
  guerra.csv      t,mean,stderr,N,seed
  arrays_<src>.csv  array,group,row,col,value   (overlap arrays used by gg/ultra)
  <command>.txt   the key=value records printed on stdout
"""


# --- records -----------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_value(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, MixtureSpec):
        return ",".join(f"{p}:{format_value(b)}" for p, b in v.pairs()) or "zero"
    return str(v).replace(" ", "_")


@dataclass(frozen=True)
class ResultRecord:
    command: str
    digest: str
    seed: int
    outputs: dict[str, Any]
    runtime: float = field(default=0.0, compare=False)

    def line(self) -> str:
        parts = [f"command={self.command}", f"digest={self.digest}", f"seed={self.seed}"]
        parts += [f"{k}={_fmt(v)}" for k, v in self.outputs.items()]
        parts.append(f"runtime={self.runtime:.3f}")
        return " ".join(parts)


def parse_record(line: str) -> dict[str, str]:
    out = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"malformed record token {token!r}")
        out[key] = value
    return out


def read_records(path: str | Path) -> list[dict[str, str]]:
    return [parse_record(l) for l in Path(path).read_text().splitlines() if l.strip()]


def write_overlap_csv(path: Path, R: np.ndarray, groups: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["array", "group", "row", "col", "value"])
        for a in range(R.shape[0]):
            for i in range(R.shape[1]):
                for j in range(R.shape[2]):
                    w.writerow([a, int(groups[a]), i, j, format_value(R[a, i, j])])


def read_overlap_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_arr = int(rows[:, 0].max()) + 1
    n = int(rows[:, 2].max()) + 1
    R = np.zeros((n_arr, n, n))
    R[rows[:, 0].astype(int), rows[:, 2].astype(int), rows[:, 3].astype(int)] = rows[:, 4]
    groups = np.zeros(n_arr, dtype=int)
    groups[rows[:, 0].astype(int)] = rows[:, 1].astype(int)
    return R, groups


# --- commands ----------------------------------------------------------------


@dataclass
class Context:
    config: RunConfig
    workers: int = 1
    out_dir: Path | None = None
    verbose: bool = False
    arrays: str | None = None
    csv_rows: dict[str, list[list]] = field(default_factory=dict)

    def map(self, fn, items):
        """Order-preserving map, in worker processes when ``workers > 1``."""
        items = list(items)
        if self.workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ProcessPoolExecutor(max_workers=self.workers) as ex:
            return list(ex.map(fn, items))

    def grid(self) -> QuadratureGrid:
        return QuadratureGrid(self.config.parisi.nodes)


def _common(cfg: RunConfig) -> dict[str, Any]:
    return {"mixture": cfg.mixture}


def cmd_evaluate(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    params = cfg.parisi.params()
    g = ctx.grid()
    yield {**_common(cfg), "k": params.k, "m": params.m, "q": params.q, "nodes": g.nodes_per_level,
           "X0": evaluate_X0(cfg.mixture, params, g), "value": evaluate_parisi(cfg.mixture, params, g)}


def _optimizer_options(cfg: RunConfig, verbose: bool) -> OptimizerOptions:
    b = cfg.parisi
    try:
        return OptimizerOptions(k_max=b.k_max, restarts=b.restarts, tolerance=b.tolerance,
                                max_iterations=b.max_iterations, seed=cfg.seed, verbose=verbose)
    except ValueError as exc:
        raise ConfigError("parisi", str(exc)) from None


def cmd_optimize(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    opt = optimize_full(cfg.mixture, ctx.grid(), _optimizer_options(cfg, ctx.verbose))
    yield {**_common(cfg), "value": opt.value, "k_used": opt.k_used, "m": opt.params.m, "q": opt.params.q,
           "converged": opt.converged, "evaluations": opt.evaluations, "flat": opt.flat,
           "nodes": cfg.parisi.nodes, "k_max": cfg.parisi.k_max, "restarts": cfg.parisi.restarts}


def _simulate_one(N, spec, n_disorder, pert, minus, seed, cap):
    return free_energy_mc(N, spec, n_disorder, pert=pert, minus=minus, seed=(seed, N), cap=cap)


def cmd_simulate(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    b = cfg.simulate
    Ns = cfg.require("simulate", "N")
    nd = cfg.require("simulate", "n_disorder")
    fn = partial(_simulate_one, spec=cfg.mixture, n_disorder=nd, pert=b.pert, minus=b.minus, seed=cfg.seed,
                 cap=cfg.cap)
    rows = ctx.csv_rows.setdefault("simulate", [["N", "mean", "stderr", "n_disorder", "pert", "minus", "seed"]])
    for N, fe in zip(Ns, ctx.map(fn, Ns)):
        rows.append([N, format_value(fe.mean), format_value(fe.stderr), nd, b.pert, b.minus, cfg.seed])
        yield {**_common(cfg), "N": N, "mean": fe.mean, "stderr": fe.stderr, "n_disorder": nd,
               "pert": b.pert, "minus": b.minus}


def cmd_rpc_check(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    params = cfg.parisi.params()
    n = cfg.require("rpc", "n_samples")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        est = evaluate_X0_rpc(cfg.mixture, params, cfg.rpc.M, n, seed=cfg.seed)
    exact = evaluate_X0(cfg.mixture, params, ctx.grid())
    z = (est.mean - exact) / est.stderr if est.stderr > 0 else (0.0 if est.mean == exact else math.inf)
    yield {**_common(cfg), "k": params.k, "m": params.m, "q": params.q, "M": cfg.rpc.M,
           "rpc_mean": est.mean, "rpc_stderr": est.stderr, "n_samples": est.n, "quadrature": exact,
           "z": z, "agree": abs(z) <= 3.0,
           "truncation_warning": any(issubclass(w.category, TruncationWarning) for w in caught)}


def _guerra_one(N, cfg: RunConfig):
    b = cfg.bounds
    params = cfg.parisi.params()
    pts = guerra_phi_grid(N, cfg.mixture, params, b.t, cfg.rpc.M, b.n_samples, (cfg.seed, N), b.pert, cfg.cap)
    check = guerra_bound_check(N, cfg.mixture, params, b.n_disorder, cfg.seed, QuadratureGrid(cfg.parisi.nodes))
    return pts, check


def cmd_guerra(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    Ns = cfg.require("bounds", "N")
    cfg.require("bounds", "n_samples")
    cfg.require("bounds", "n_disorder")
    cfg.parisi.params()
    rows = ctx.csv_rows.setdefault("guerra", [["t", "mean", "stderr", "N", "seed"]])
    for N, (pts, check) in zip(Ns, ctx.map(partial(_guerra_one, cfg=cfg), Ns)):
        rows.extend([p.t, format_value(p.mean), format_value(p.stderr), N, cfg.seed] for p in pts)
        monotone = all(b.mean - a.mean <= 3 * math.hypot(a.stderr, b.stderr) for a, b in zip(pts, pts[1:]))
        row = check.rows[0]
        yield {**_common(cfg), "N": N, "parisi": check.parisi_value, "free_energy": row.free_energy.mean,
               "stderr": row.free_energy.stderr, "n_disorder": row.free_energy.n_disorder, "gap": row.gap,
               "verdict": check.verdict, "phi_n_samples": cfg.bounds.n_samples, "phi_monotone": monotone}


def _ass_one(N, cfg: RunConfig):
    b = cfg.bounds
    return ass_increment(N, cfg.mixture, b.n_disorder, b.n_field_samples, (cfg.seed, N), b.pert, cfg.cap)


def cmd_ass(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    Ns = cfg.require("bounds", "N")
    cfg.require("bounds", "n_disorder")
    cfg.require("bounds", "n_field_samples")
    for N, est in zip(Ns, ctx.map(partial(_ass_one, cfg=cfg), Ns)):
        yield {**_common(cfg), "N": N, "mean": est.mean, "stderr": est.stderr, "n_disorder": est.n,
               "n_field_samples": cfg.bounds.n_field_samples, "pert": cfg.bounds.pert}


def _arrays_one(N, cfg: RunConfig):
    d = cfg.diagnostics
    if d.source == "rpc":
        return rpc_overlap_arrays(cfg.parisi.params(), d.n_disorder, d.n_arrays, d.n_replicas, cfg.rpc.M,
                                  cfg.seed)
    return simulator_overlap_arrays(N, cfg.mixture, d.pert, d.n_disorder, d.n_arrays, d.n_replicas,
                                    (cfg.seed, N), cfg.cap)


def _array_sets(ctx: Context) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """(label, arrays, groups) per source size; reads ``--arrays`` when given."""
    cfg = ctx.config
    if ctx.arrays:
        R, g = read_overlap_csv(ctx.arrays)
        return [("file", R, g)]
    d = cfg.diagnostics
    cfg.require("diagnostics", "n_disorder")
    cfg.require("diagnostics", "n_arrays")
    Ns = [0] if d.source == "rpc" else list(cfg.require("diagnostics", "N"))
    out = []
    for N, (R, g) in zip(Ns, ctx.map(partial(_arrays_one, cfg=cfg), Ns)):
        label = "rpc" if d.source == "rpc" else f"N{N}"
        if ctx.out_dir is not None:
            write_overlap_csv(ctx.out_dir / f"arrays_{label}.csv", R, g)
        out.append((label, R, g))
    return out


def cmd_gg(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    d = cfg.diagnostics
    queries = [GGQuery.parse(q, d.n, p) for q in d.queries for p in d.p]
    for label, R, g in _array_sets(ctx):
        for query in queries:
            res = gg_statistic(R, query, g)
            yield {**_common(cfg), "source": label, "f": query.label(), "n": query.n, "p": query.p,
                   "phi": res.phi, "stderr": res.stderr, "n_samples": res.n_samples,
                   "n_groups": len(np.unique(g))}


def cmd_ultra(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    for label, R, g in _array_sets(ctx):
        est = ultrametricity_fraction(R, g)
        yield {**_common(cfg), "source": label, "fraction": est.mean, "stderr": est.stderr, "n_triples": est.n,
               "n_arrays": R.shape[0]}


def _positivity_one(N, cfg: RunConfig):
    d = cfg.diagnostics
    return positivity_probability(N, cfg.mixture, d.pert, d.epsilon, d.n_disorder, (cfg.seed, N), cfg.cap)


def cmd_positivity(ctx: Context) -> Iterator[dict]:
    cfg = ctx.config
    Ns = cfg.require("diagnostics", "N")
    cfg.require("diagnostics", "n_disorder")
    for N, est in zip(Ns, ctx.map(partial(_positivity_one, cfg=cfg), Ns)):
        yield {**_common(cfg), "N": N, "epsilon": cfg.diagnostics.epsilon, "pert": cfg.diagnostics.pert,
               "prob": est.mean, "stderr": est.stderr, "n_disorder": est.n}


COMMANDS = {
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "rpc-check": cmd_rpc_check,
    "guerra": cmd_guerra,
    "ass": cmd_ass,
    "gg": cmd_gg,
    "ultra": cmd_ultra,
    "positivity": cmd_positivity,
}

HELP = {
    "evaluate": "Parisi functional at parisi.m, parisi.q",
    "optimize": "minimize the Parisi functional over m, q and k",
    "simulate": "exact-enumeration free energies for simulate.N",
    "rpc-check": "cascade Monte Carlo of X0 against quadrature",
    "guerra": "interpolation grid and upper-bound check for bounds.N",
    "ass": "cavity increment for bounds.N",
    "gg": "Ghirlanda-Guerra statistics on overlap arrays",
    "ultra": "ultrametric fraction of overlap triples",
    "positivity": "probability of overlaps at or below -epsilon",
}


# --- compare -----------------------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    N: int | None
    gap: float  # free energy minus Parisi value
    stderr: float
    verdict: str


def verdict_band(gap: float, stderr: float, n_sigma: float = 3.0) -> str:
    """``consistent`` within ``n_sigma``; below that the bound holds strictly, above it is violated."""
    if abs(gap) <= n_sigma * stderr or gap == 0.0:
        return "consistent"
    return "bound-satisfied" if gap < 0 else "violation"


def compare(records_a: list[dict[str, str]], records_b: list[dict[str, str]]) -> list[GapReport]:
    """Gap reports between free-energy rows on one side and a Parisi value on the other."""
    recs = records_a + records_b
    free = [r for r in recs if "mean" in r and "N" in r and r.get("command") == "simulate"]
    parisi = [r for r in recs if "value" in r and r.get("command") in ("evaluate", "optimize")]
    if not free or not parisi:
        raise ValueError("compare needs free-energy records on one side and a Parisi value on the other")
    mixtures = {r.get("mixture") for r in free + parisi}
    if len(mixtures) != 1:
        raise ValueError(f"mismatched mixtures: {sorted(m or '?' for m in mixtures)}")
    P = min(float(r["value"]) for r in parisi)
    out = []
    for r in free:
        gap = float(r["mean"]) - P
        se = float(r["stderr"])
        out.append(GapReport(int(r["N"]), gap, se, verdict_band(gap, se)))
    return out


# --- driver ------------------------------------------------------------------


def _output_dir(cfg: RunConfig) -> Path | None:
    raw = os.environ.get(ENV_OUTPUT) or cfg.output
    if not raw:
        return None
    path = Path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run(config: RunConfig, command: str, workers: int = 1, verbose: bool = False,
        arrays: str | None = None, out_dir: Path | None = None) -> list[ResultRecord]:
    """Run one command; returns its records and writes CSV grids when ``out_dir`` is set."""
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    ctx = Context(config, max(1, workers), out_dir, verbose, arrays)
    records = []
    start = time.perf_counter()
    for outputs in COMMANDS[command](ctx):
        now = time.perf_counter()
        records.append(ResultRecord(command, config.digest, config.seed, outputs, now - start))
        start = now
    if out_dir is not None:
        for name, rows in ctx.csv_rows.items():
            with open(out_dir / f"{name}.csv", "w", newline="") as fh:
                csv.writer(fh).writerows(rows)
        (out_dir / f"{command}.txt").write_text("".join(r.line() + "\n" for r in records))
    return records


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parisilab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=CSV_HELP)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], epilog=CSV_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="YAML run config")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes (default 1)")
        p.add_argument("--verbose", action="store_true", help="optimizer trace on stderr")
        if name in ("gg", "ultra"):
            p.add_argument("--arrays", help="overlap-array CSV to analyse instead of sampling")
    cp = sub.add_parser("compare", help="gap report between a free-energy and a Parisi record file")
    cp.add_argument("records_a")
    cp.add_argument("records_b")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        if args.command == "compare":
            for rep in compare(read_records(args.records_a), read_records(args.records_b)):
                print(f"command=compare N={rep.N} gap={format_value(rep.gap)} "
                      f"stderr={format_value(rep.stderr)} verdict={rep.verdict}")
            return EXIT_OK
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        cfg = load_config(args.config)
        out_dir = _output_dir(cfg)
        for rec in run(cfg, args.command, args.workers, args.verbose, getattr(args, "arrays", None), out_dir):
            print(rec.line(), flush=True)
        return EXIT_OK
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
