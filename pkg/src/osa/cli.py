"""Command-line harness: ``osa {gen,solve,oracle,eval,bench}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 budget or
degeneracy refusal. Set ``OSA_LOG`` (debug, info, warning) for verbosity.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .affine import AffineConfig, affine_residuals, affine_solve
from .datagen import OUTLIER_MODELS, gen_affine_planted, gen_planted
from .exceptions import BudgetExceeded, DegenerateWeights
from .geometry import TAU_ORTH, AffinePlacement, Basis, orthonormalize, residual_norms
from .losses import PthPower, parse_loss
from .mestimators import MEstimatorConfig, m_estimator_solve
from .oracle import DEFAULT_BUDGET, exact_optimum_p2, exact_optimum_p_general
from .sampling import derive_seed
from .solver import SolverConfig, inlier_count, line_solver, solve_outliers, trimmed_from_residuals

log = logging.getLogger("osa")

EXIT_USAGE, EXIT_DATA, EXIT_REFUSED = 2, 3, 4


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- file formats

def read_points_csv(path) -> np.ndarray:
    """One point per row; blank lines and lines starting with ``#`` are skipped."""
    rows, width = [], None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(f"{path}:{lineno}: expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def write_points_csv(path, X, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        for row in np.atleast_2d(X):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(args, command: str, inputs=(), warnings=()) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "command": command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "warnings": list(warnings),
    }


def _emit(doc: dict, out):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n")


def _sidecar(out, suffix: str):
    if out in (None, "-"):
        return None
    p = Path(out)
    return p.with_name(p.stem + suffix)


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    if args.origin_scale > 0:
        X, truth = gen_affine_planted(
            args.n, args.d, args.k, args.alpha, args.sigma, args.outliers, args.seed,
            args.outlier_scale, args.origin_scale, target_delta=args.target_delta,
        )
    else:
        X, truth = gen_planted(
            args.n, args.d, args.k, args.alpha, args.sigma, args.outliers, args.seed, args.outlier_scale,
            target_delta=args.target_delta,
        )
    write_points_csv(args.out, X, header=f"osa gen n={args.n} d={args.d} k={args.k} seed={args.seed}")
    truth_path = args.truth or _sidecar(args.out, ".truth.json")
    _emit({"manifest": _manifest(args, "gen"), "truth": truth.to_dict()}, truth_path)
    log.info("wrote %s and %s", args.out, truth_path)
    return 0


def _solver_config(args, seed: int) -> SolverConfig:
    return SolverConfig(
        k=args.k,
        p=args.p,
        alpha=args.alpha,
        epsilon=args.epsilon,
        delta=args.delta,
        rounds_T=args.rounds,
        batch_size=args.batch,
        trials=args.boost,
        seed=seed,
    )


def _solve_once(X, args, seed: int):
    if args.affine:
        if args.loss:
            raise UsageError("--affine supports squared error only; drop --loss")
        return affine_solve(X, AffineConfig(eta=args.eta, inner=_solver_config(args, seed)))
    loss = parse_loss(args.loss) if args.loss else None
    if loss is not None and not (isinstance(loss, PthPower) and loss.p == args.p):
        cfg = MEstimatorConfig(
            loss=loss, k=args.k, alpha=args.alpha, epsilon=args.epsilon, delta=args.delta, seed=seed,
            rounds_T=args.rounds, batch_size=args.batch, trials=args.boost,
        )
        return m_estimator_solve(X, cfg)
    cfg = _solver_config(args, seed)
    if args.k == 1 and args.p == 2:
        return line_solver(X, cfg)
    return solve_outliers(X, cfg)


def _trial_seeds(seed: int, trials: int):
    if trials == 1:
        return [seed]
    return [derive_seed(seed, t) for t in range(trials)]


def cmd_solve(args) -> int:
    X = read_points_csv(args.points)
    if args.trials < 1 or args.jobs < 1:
        raise UsageError("--trials and --jobs must be >= 1")
    if args.loss:
        parse_loss(args.loss)
    seeds = _trial_seeds(args.seed, args.trials)
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        reports = list(pool.map(lambda s: _solve_once(X, args, s), seeds))
    elapsed = (time.perf_counter() - t0) * 1e3
    best = min(range(len(reports)), key=lambda i: (reports[i].trimmed_cost_k, i))
    rep = reports[best]
    result = rep.result_dict()
    result["trial"] = best
    result["trial_seeds"] = seeds
    result["trial_costs"] = [float(r.trimmed_cost_k) for r in reports]
    doc = {
        "manifest": _manifest(args, "solve", [args.points]),
        "result": result,
        "timing": {"total_ms": elapsed, "trial_ms": [r.wall_time_ms for r in reports]},
    }
    _emit(doc, args.out)
    basis_path = args.basis_out or _sidecar(args.out, ".basis.csv")
    if basis_path is not None:
        write_points_csv(basis_path, rep.subspace.vectors, header="basis rows")
        if rep.placement is not None:
            write_points_csv(_sidecar(basis_path, ".origin.csv"), rep.placement.origin[None, :], header="origin")
    return 0


def cmd_oracle(args) -> int:
    X = read_points_csv(args.points)
    t0 = time.perf_counter()
    if args.p == 2:
        res = exact_optimum_p2(X, args.k, args.alpha, budget=args.budget)
    else:
        res = exact_optimum_p_general(X, args.k, args.alpha, args.p, budget=args.budget)
    doc = {
        "manifest": _manifest(args, "oracle", [args.points]),
        "result": res.to_dict(),
        "timing": {"total_ms": (time.perf_counter() - t0) * 1e3},
    }
    _emit(doc, args.out)
    return 0


def load_basis(path, d: int, warnings: list) -> Basis:
    if not Path(path).exists():
        raise DataError(f"{path}: no such file")
    V = read_points_csv(path)
    if V.shape[1] != d:
        raise DataError(f"{path}: basis vectors have dimension {V.shape[1]}, points have {d}")
    err = np.abs(V @ V.T - np.eye(V.shape[0])).max()
    if err <= TAU_ORTH:
        return Basis(V)
    warnings.append(f"basis from {path} was not orthonormal (deviation {err:.3g}); orthonormalized")
    log.warning(warnings[-1])
    return orthonormalize(V)


def cmd_eval(args) -> int:
    X = read_points_csv(args.points)
    warnings = []
    B = load_basis(args.basis, X.shape[1], warnings)
    inputs = [args.points, args.basis]
    loss = parse_loss(args.loss) if args.loss else PthPower(args.p)
    if args.origin:
        origin = read_points_csv(args.origin)
        if origin.shape != (1, X.shape[1]):
            raise DataError(f"{args.origin}: expected a single row of dimension {X.shape[1]}")
        r = affine_residuals(X, AffinePlacement(origin[0], B))
        inputs.append(args.origin)
    else:
        r = residual_norms(X, B)
    m = inlier_count(X.shape[0], args.alpha)
    cost = trimmed_from_residuals(r, m, loss)
    doc = {
        "manifest": _manifest(args, "eval", inputs, warnings),
        "result": {"trimmed_cost": cost, "subspace_dim": B.dim, "loss": loss.spec()},
    }
    _emit(doc, args.out)
    return 0


BENCH_COLUMNS = [
    "n", "d", "k", "alpha", "epsilon", "delta", "trial", "seed",
    "cost", "cost_span", "oracle_cost", "reference", "ratio", "ms",
]


def _bench_row(params, trial, seed, args):
    n, d, k, alpha, eps, delta = params
    X, truth = gen_planted(n, d, k, alpha, args.sigma, args.outliers, seed, args.outlier_scale)
    cfg = SolverConfig(k=k, alpha=alpha, epsilon=eps, delta=delta, seed=seed)
    rep = solve_outliers(X, cfg)
    m = inlier_count(n, alpha)
    if math.comb(n, m) <= args.oracle_budget:
        ref, kind = exact_optimum_p2(X, k, alpha, budget=args.oracle_budget).best_cost, "oracle"
    else:
        inl = truth.inlier_indices
        ref, kind = float(np.sum(residual_norms(X[inl], truth.subspace) ** 2)), "planted"
    if ref > 0:
        ratio = rep.trimmed_cost_k / ref
    else:
        ratio = 1.0 if rep.trimmed_cost_k <= 1e-12 else math.inf
    return [n, d, k, alpha, eps, delta, trial, seed,
            rep.trimmed_cost_k, rep.trimmed_cost_span, ref, kind, ratio, rep.wall_time_ms]


def cmd_bench(args) -> int:
    grid = list(itertools.product(args.n, args.d, args.k, args.alpha, args.epsilon, args.delta))
    tasks = [(params, t, derive_seed(args.seed, g, t)) for g, params in enumerate(grid) for t in range(args.trials)]
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(lambda job: _bench_row(*job, args), tasks))
    out = args.out
    fh = sys.stdout if out in (None, "-") else open(out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()
    manifest_path = _sidecar(out, ".manifest.json")
    if manifest_path is not None:
        doc = {
            "manifest": _manifest(args, "bench"),
            "result": {"rows": len(rows), "columns": BENCH_COLUMNS, "csv": str(out)},
            "timing": {"total_ms": (time.perf_counter() - t0) * 1e3},
        }
        _emit(doc, manifest_path)
    return 0


# ---------------------------------------------------------------- parser

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_problem_flags(p):
    p.add_argument("--k", type=int, required=True, help="target subspace dimension")
    p.add_argument("--alpha", type=float, default=0.0, help="outlier fraction in [0, 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"osa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a planted instance (points CSV + truth JSON)")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    _add_problem_flags(g)
    g.add_argument("--sigma", type=float, default=0.05, help="inlier noise scale off the subspace")
    g.add_argument("--outliers", choices=OUTLIER_MODELS, default="uniform-far",
                   help="uniform-far: random directions at radius in [s, 2s]; clustered: one blob at "
                        "distance 1.5s; adversarial-near-subspace: points on a second random k-dim "
                        "subspace with coefficient norm ~s (s = --outlier-scale)")
    g.add_argument("--outlier-scale", type=float, default=None,
                   help="outlier scale s (default max(10 sigma sqrt(d), 1))")
    g.add_argument("--target-delta", type=float, default=None,
                   help="choose the outlier scale so the inliers carry this share of the planted cost")
    g.add_argument("--origin-scale", type=float, default=0.0, help="shift by a random origin of this norm")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="points CSV path")
    g.add_argument("--truth", default=None, help="truth JSON path (default <out>.truth.json)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run the sampling solver on a points CSV")
    s.add_argument("points")
    _add_problem_flags(s)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--epsilon", type=float, default=0.3)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--rounds", type=int, default=None, help="adaptive rounds T")
    s.add_argument("--batch", type=int, default=None, help="points per inner batch")
    s.add_argument("--boost", type=int, default=None, help="repetitions per round (best kept)")
    s.add_argument("--trials", type=int, default=1, help="independent solves; the cheapest is reported")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--loss", default=None, help="lp:<p> | huber:<t> | tukey:<t>")
    s.add_argument("--affine", action="store_true", help="fit an affine subspace")
    s.add_argument("--eta", type=float, default=0.5, help="mean-accuracy parameter for --affine")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="-")
    s.add_argument("--basis-out", default=None, help="basis CSV path (default <out>.basis.csv)")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force optimum on a tiny instance")
    o.add_argument("points")
    _add_problem_flags(o)
    o.add_argument("--p", type=float, default=2.0)
    o.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    o.add_argument("--out", default="-")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("eval", help="trimmed cost of a given subspace")
    e.add_argument("points")
    e.add_argument("--basis", required=True, help="CSV with one basis vector per row")
    e.add_argument("--origin", default=None, help="CSV with one row: affine origin")
    e.add_argument("--alpha", type=float, default=0.0)
    e.add_argument("--p", type=float, default=2.0)
    e.add_argument("--loss", default=None)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="parameter sweep; long-format CSV of cost ratios")
    b.add_argument("--n", type=_ints, required=True)
    b.add_argument("--d", type=_ints, required=True)
    b.add_argument("--k", type=_ints, required=True)
    b.add_argument("--alpha", type=_floats, default=[0.25])
    b.add_argument("--epsilon", type=_floats, default=[0.3])
    b.add_argument("--delta", type=_floats, default=[0.05])
    b.add_argument("--sigma", type=float, default=0.05)
    b.add_argument("--outliers", choices=OUTLIER_MODELS, default="uniform-far")
    b.add_argument("--outlier-scale", type=float, default=None)
    b.add_argument("--oracle-budget", type=int, default=10 ** 5)
    b.add_argument("--trials", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return parser


def _setup_logging():
    level = os.environ.get("OSA_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"osa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"osa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BudgetExceeded, DegenerateWeights) as exc:
        print(f"osa: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
