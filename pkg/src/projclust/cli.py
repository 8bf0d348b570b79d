"""Command-line front end.

Subcommands: ``project``, ``coreset``, ``cluster``, ``stream``, ``verify``.
Points are read from headerless CSV files (one point per row); reports are
JSON documents that start with the resolved run configuration.

Exit codes: 0 pass, 1 check failed, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cech import cech_dimension, verify_sandwich
from .clustering import ProblemSpec, brute_force_optimal, check_brute_force_supported, solve, verify_objective_preservation
from .coresets import (
    fw_objective,
    frank_wolfe_coreset,
    greedy_center_coreset,
    meb_coreset,
    optimal_center,
    simplex_lower_bound,
)
from .geometry import center_value, format_rho, meb, parse_rho
from .pipeline import (
    PipelineConfig,
    PointFileError,
    StreamState,
    cluster_via_projection,
    iter_csv_points,
    read_points,
    stream_query,
    write_points,
)
from .projection import (
    DimensionBudget,
    jl_dimension,
    make_projection,
    project,
    projective_dimension,
    subspace_dimension,
    verify_flat_distance_distortion,
    verify_pairwise_distortion,
    verify_subspace_distortion,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
DEFAULT_SEED = 20140601
THREADS_ENV = "PROJCLUST_THREADS"


class UsageError(Exception):
    pass


def _rho(text: str) -> float:
    try:
        return parse_rho(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _eps(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="projclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--epsilon", type=_eps, default=0.5)
    common.add_argument("--rho", type=_rho, default=2.0, help="positive integer or 'inf'")
    common.add_argument("--q", type=int, default=0)
    common.add_argument("--lam", type=float, default=1.0)
    common.add_argument("--coreset-constant", type=float, default=1.0)
    common.add_argument("--m", type=int, default=None, help="override the target dimension")
    common.add_argument("--threads", type=int, default=None, help=f"cap BLAS threads (default: ${THREADS_ENV})")
    common.add_argument("--report", type=Path, default=None, help="write the JSON report here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", parents=[common], help="randomly project a point file")
    p.add_argument("input", type=Path)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--matrix", type=Path, default=None, help="binary projection-matrix sidecar")

    p = sub.add_parser("coreset", parents=[common], help="build a single-center coreset")
    p.add_argument("input", type=Path)
    p.add_argument("--method", choices=("greedy", "fw", "meb"), default="greedy")
    p.add_argument("--output", type=Path, default=None, help="text coreset record")

    p = sub.add_parser("cluster", parents=[common], help="solve a projective clustering instance")
    p.add_argument("input", type=Path)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--via-projection", action="store_true")
    p.add_argument("--solver", choices=("auto", "brute_force", "k_center", "lloyd", "alternating"), default="auto")

    p = sub.add_parser("stream", parents=[common], help="single-pass streaming estimate")
    p.add_argument("input", type=Path)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n", type=int, required=True, help="announced stream length")
    p.add_argument("--solver", choices=("auto", "brute_force", "k_center", "lloyd", "alternating"), default="auto")
    p.add_argument("--checkpoint", type=Path, default=None, help="directory for matrix + buffer dump")

    p = sub.add_parser("verify", parents=[common], help="empirical checks of the distortion guarantees")
    p.add_argument("suite", choices=("jl", "subspace", "flats", "objective", "cech", "simplex-lb"))
    p.add_argument("--input", type=Path, default=None, help="point file (default: Gaussian sample)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--c", type=int, default=3)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--s-max", type=int, default=3)
    p.add_argument("--c-slack", type=float, default=2.0)
    return parser


def _config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, Path):
            value = str(value)
        elif key == "rho":
            value = format_rho(value)
        cfg[key] = value
    return cfg


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, allow_nan=True) + "\n"
    if args.report is not None:
        args.report.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: Path) -> np.ndarray:
    return read_points(path)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_project(args) -> tuple[dict, int]:
    X = _load(args.input)
    n, d = X.shape
    formula = None
    if args.m is None:
        if n < 2:
            m = d
        else:
            budget = DimensionBudget(n=n, q=args.q, epsilon=args.epsilon, rho=args.rho, lam=args.lam,
                                     coreset_constant=args.coreset_constant)
            formula = projective_dimension(budget)
            m = min(formula, d)
    else:
        if not 1 <= args.m <= d:
            raise UsageError(f"--m must lie in [1, d={d}], got {args.m}")
        m = args.m
    pmap = make_projection(d, m, args.seed)
    write_points(args.output, project(X, pmap))
    if args.matrix is not None:
        pmap.save(args.matrix)
    return {"n": n, "d": d, "m": m, "seed": args.seed, "formula_dimension": formula,
            "formula_inputs": {"n": n, "q": args.q, "epsilon": args.epsilon, "lam": args.lam,
                               "coreset_constant": args.coreset_constant}}, EXIT_PASS


def cmd_coreset(args) -> tuple[dict, int]:
    X = _load(args.input)
    rho, eps = args.rho, args.epsilon
    if args.method == "fw" and rho != 2:
        raise UsageError("method 'fw' requires --rho 2")
    if args.method == "meb" and not math.isinf(rho):
        raise UsageError("method 'meb' requires --rho inf")
    oracle = optimal_center(X, rho)
    if args.method == "greedy":
        cs = greedy_center_coreset(X, rho, eps, oracle)
        value = center_value(X, cs.witness, rho)
        bound = (1.0 + eps) * oracle.value
        certificate = {"quantity": "delta(witness)", "value": value, "bound": bound}
    elif args.method == "fw":
        cs = frank_wolfe_coreset(X, eps)
        value = fw_objective(X, cs.witness)
        bound = (1.0 + 16.0 * eps) * fw_objective(X, oracle.center)
        certificate = {"quantity": "g(witness)", "value": value, "bound": bound}
    else:
        cs = meb_coreset(X, eps)
        value = float(np.max(np.linalg.norm(X - cs.witness, axis=1)))
        bound = (1.0 + eps) * meb(X).radius
        certificate = {"quantity": "max distance from witness", "value": value, "bound": bound}
    ok = value <= bound * (1.0 + 1e-9)
    certificate["certified"] = ok
    if args.output is not None:
        args.output.write_text(cs.to_text(), encoding="utf-8")
    report = {"method": args.method, "size": len(cs), "oracle_value": oracle.value,
              "certificate": certificate, "coreset": cs.to_dict()}
    return report, EXIT_PASS if ok else EXIT_FAIL


def _spec(args) -> ProblemSpec:
    try:
        return ProblemSpec(args.k, args.q, args.rho)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


SUPPORTED = ("brute force: n<=12, k<=3 with rho=2 (any q<d) or rho=inf (q=0); "
             "k_center: q=0, rho=inf; lloyd: q=0, rho=2; alternating: any q<d, any rho")


def cmd_cluster(args) -> tuple[dict, int]:
    X = _load(args.input)
    n, d = X.shape
    spec = _spec(args)
    if spec.q >= d:
        raise UsageError(f"q must be < d={d}. Supported: {SUPPORTED}")
    try:
        if args.via_projection:
            cfg = PipelineConfig(spec, args.epsilon, args.seed, args.solver, args.lam, args.coreset_constant, args.m)
            sol = cluster_via_projection(X, cfg)
        else:
            sol = solve(X, spec, args.solver, seed=args.seed)
    except ValueError as exc:
        raise UsageError(f"{exc}. Supported: {SUPPORTED}") from None
    report = {"solution": sol.to_dict()}
    try:
        check_brute_force_supported(n, d, spec)
        opt = brute_force_optimal(X, spec).value
        report["brute_force_value"] = opt
        report["brute_force_gap"] = sol.value / opt if opt > 0 else (1.0 if sol.value == 0 else math.inf)
    except ValueError:
        pass
    return report, EXIT_PASS


def cmd_stream(args) -> tuple[dict, int]:
    spec = _spec(args)
    state = None
    for row in iter_csv_points(args.input):
        if state is None:
            state = StreamState.create(row.shape[0], args.n, spec, args.epsilon, args.seed, args.lam,
                                       args.coreset_constant, args.m)
        state.ingest(row)
    if state is None:
        raise PointFileError("no points")
    if args.checkpoint is not None:
        state.save(args.checkpoint)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            value = stream_query(state, spec, args.solver)
    except ValueError as exc:
        raise UsageError(f"{exc}. Supported: {SUPPORTED}") from None
    return {"value": value, "n_seen": state.n_seen, "n_announced": args.n, "d": state.d, "m": state.m,
            "guarantee_void": state.guarantee_void, "ledger": state.space_report()}, EXIT_PASS


def _verify_data(args, default_n: int, default_d: int) -> np.ndarray:
    if args.input is not None:
        return _load(args.input)
    n = args.n or default_n
    d = args.d or default_d
    return np.random.default_rng(args.data_seed).standard_normal((n, d))


def _dim(args, d: int, formula: int) -> int:
    if args.m is not None:
        if not 1 <= args.m <= d:
            raise UsageError(f"--m must lie in [1, d={d}], got {args.m}")
        return args.m
    return min(d, formula)


def cmd_verify(args) -> tuple[dict, int]:
    eps = args.epsilon
    suite = args.suite
    if suite == "simplex-lb":
        n = args.n or 10_000
        if not 1 <= args.c < n:
            raise UsageError(f"need 1 <= c < n, got c={args.c}, n={n}")
        if math.isinf(args.rho):
            raise UsageError("simplex-lb needs a finite --rho")
        res = simplex_lower_bound(n, args.c, args.rho)
        res["rho"] = format_rho(res["rho"])
        res["exceeds_1_plus_eps"] = res["ratio"] > 1.0 + eps
        ok = res["max_abs_error"] <= 1e-9
        return {"suite": suite, "result": res, "pass": ok}, EXIT_PASS if ok else EXIT_FAIL
    if suite == "jl":
        X = _verify_data(args, 200, 500)
        n, d = X.shape
        m = _dim(args, d, jl_dimension(max(n, 2), eps))
        rep = verify_pairwise_distortion(X, make_projection(d, m, args.seed), eps)
    elif suite == "subspace":
        X = _verify_data(args, 100, 400)
        n, d = X.shape
        m = _dim(args, d, subspace_dimension(max(n, 2), args.c, eps, args.lam))
        rep = verify_subspace_distortion(X, make_projection(d, m, args.seed), args.c, eps, args.trials)
    elif suite == "flats":
        X = _verify_data(args, 100, 400)
        n, d = X.shape
        if not 0 <= args.q < args.c <= n:
            raise UsageError("flats suite needs q < c <= n")
        m = _dim(args, d, subspace_dimension(max(n, 2), args.c + 1, eps, args.lam))
        rep = verify_flat_distance_distortion(X, make_projection(d, m, args.seed), args.c, args.q, eps, args.trials)
    elif suite == "objective":
        X = _verify_data(args, 10, 50)
        n, d = X.shape
        spec = _spec(args)
        budget = DimensionBudget(n=max(n, 2), q=spec.q, epsilon=eps, rho=spec.rho, lam=args.lam,
                                 coreset_constant=args.coreset_constant)
        m = _dim(args, d, projective_dimension(budget))
        try:
            rep = verify_objective_preservation(X, make_projection(d, m, args.seed), spec, eps)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:  # cech
        X = _verify_data(args, 30, 60)
        n, d = X.shape
        m = _dim(args, d, cech_dimension(n, eps, args.lam, args.coreset_constant))
        try:
            rep = verify_sandwich(X, make_projection(d, m, args.seed), args.s_max, eps, args.c_slack)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    body = rep.to_dict()
    ok = bool(body["pass"])
    return {"suite": suite, "n": int(X.shape[0]), "d": int(X.shape[1]), "m": m, "seed": args.seed,
            "result": body, "pass": ok}, EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {"project": cmd_project, "coreset": cmd_coreset, "cluster": cmd_cluster,
            "stream": cmd_stream, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        threads = int(os.environ[THREADS_ENV])
        args.threads = threads
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            body, code = COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"projclust {args.command}: usage error: {exc}\n")
        return EXIT_USAGE
    except PointFileError as exc:
        sys.stderr.write(f"projclust {args.command}: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"projclust {args.command}: I/O error: {exc}\n")
        return EXIT_IO
    report = {"config": _config(args), **body}
    try:
        _emit(report, args)
    except OSError as exc:
        sys.stderr.write(f"projclust: cannot write report: {exc}\n")
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
