"""Command-line interface.

Subcommands: analyze (pattern diagnostics), certify (well-posedness and
characteristic rank), complete (run a solver), rank-test (sequential
chi-square table), experiment (simulation suite), wilson (the 6x6
two-solution demonstration).

Exit codes: 0 success, 1 validation error, 2 numerical failure. Text
output rounds floats to 9 significant digits; JSON keeps full precision
and re-serializes byte-identically.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import geometry, harness, patterns, solvers, stats
from .fileio import (
    canonical_json,
    fmt,
    load_observed,
    read_dense_csv,
    write_dense_csv,
)
from .patterns import ObservationPattern, ObservedMatrix


class _Parser(argparse.ArgumentParser):
    # usage problems are validation errors: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _pattern_of(data) -> ObservationPattern:
    return data.pattern if isinstance(data, ObservedMatrix) else data


def _require_values(data, what: str) -> ObservedMatrix:
    if not isinstance(data, ObservedMatrix):
        raise ValueError(f"{what} requires entry values, got a bare pattern file")
    return data


def _emit(args, text: str, report: dict) -> None:
    if args.format == "json":
        payload = canonical_json(report)
    else:
        payload = text if text.endswith("\n") else text + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _kv_lines(pairs) -> list[str]:
    return [f"{k}: {fmt(v)}" for k, v in pairs]


# --- analyze ---


def _cmd_analyze(args) -> int:
    data = load_observed(args.input)
    p = _pattern_of(data)
    rows, cols = patterns.row_col_counts(p)
    red = patterns.is_reducible(p)
    bounds = patterns.generic_bound(p)
    frac = p.m / (p.n1 * p.n2)
    table = []
    for r in range(1, max(bounds.R_ceil, 1) + 1):
        table.append({
            "r": r,
            "manifold_dim": bounds.manifold_dim(r),
            "f_rm": bounds.f_rm(r),
            "df": stats.degrees_of_freedom(r, p.n1, p.n2, p.m),
        })
    report = {
        "command": "analyze",
        "input": str(args.input),
        "n1": p.n1, "n2": p.n2, "m": p.m,
        "row_count_min": int(rows.min()), "row_count_max": int(rows.max()),
        "col_count_min": int(cols.min()), "col_count_max": int(cols.max()),
        "empty_rows": [int(i) for i in red.empty_rows],
        "empty_cols": [int(j) for j in red.empty_cols],
        "reducible": red.reducible,
        "n_components": red.n_components,
        "generic_rank_bound": bounds.R_value,
        "generic_rank_bound_ceil": bounds.R_ceil,
        "sampling_fraction": frac,
        "estimated_bound": patterns.estimated_bound(p.n1, p.n2, frac),
        "rank_table": table,
    }
    lines = _kv_lines((k, v) for k, v in report.items() if k != "rank_table")
    lines.append("r  dim(M_r)  f(r,m)  df")
    for row in table:
        lines.append(f"{row['r']:<2d} {row['manifold_dim']:<9d} {row['f_rm']:<7d} {row['df']}")
    _emit(args, "\n".join(lines), report)
    return 0


# --- certify ---


def _cmd_certify(args) -> int:
    data = load_observed(args.input)
    p = _pattern_of(data)
    r = args.rank
    if args.matrix:
        y = read_dense_csv(args.matrix).to_dense()
        if np.isnan(y).any():
            raise ValueError("--matrix must be a fully observed completion")
        source = str(args.matrix)
    else:
        rng = np.random.default_rng(args.seed)
        y = rng.standard_normal((p.n1, r)) @ rng.standard_normal((r, p.n2))
        source = f"random rank-{r} point (seed {args.seed})"
    wp = geometry.wellposedness_check(y, r, p, rtol=args.rtol)
    cr = geometry.characteristic_rank(p, r, trials=args.trials, seed=args.seed,
                                      rtol=args.rtol)
    report = {
        "command": "certify",
        "input": str(args.input),
        "point": source,
        "rank": r,
        "well_posed": wp.well_posed,
        "rank_of_K": wp.rank_of_K,
        "required_rank": wp.required_rank,
        "dimension_ok": wp.dimension_ok,
        "min_counts_ok": wp.min_counts_ok,
        "irreducible": wp.irreducible,
        "generic_rank_bound": wp.generic_rank_bound,
        "characteristic_rank": cr.rho,
        "f_rm": cr.f_rm,
        "ranks_per_trial": list(cr.ranks_per_trial),
        "generic_well_posed": cr.generic_well_posed,
        "config": {"rtol": args.rtol, "trials": args.trials, "seed": args.seed},
    }
    lines = _kv_lines((k, v) for k, v in report.items()
                      if k not in ("ranks_per_trial", "config"))
    lines.append(f"ranks_per_trial: {' '.join(str(t) for t in cr.ranks_per_trial)}")
    lines.append(f"config: rtol={fmt(args.rtol)} trials={args.trials} seed={args.seed}")
    _emit(args, "\n".join(lines), report)
    return 0


# --- complete ---


def _cmd_complete(args) -> int:
    obs = _require_values(load_observed(args.input), "complete")
    cfg = solvers.SolverConfig(tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    if args.method in ("lrma", "schur") and args.rank is None:
        raise ValueError(f"--method {args.method} requires --rank")
    filled_count = None
    if args.method == "lrma":
        res = solvers.lrma_fixed_rank(obs, args.rank, cfg)
        y = res.Y_hat
    elif args.method == "nuclear":
        res = solvers.nuclear_norm_complete(obs, cfg, tau=args.tau)
        y = res.Y_hat
    elif args.method == "rank1":
        y = solvers.rank_one_complete(obs)
        res = None
    else:
        y, filled = solvers.schur_cascade(obs, args.rank, args.max_subset_search)
        filled_count = len(filled)
        res = None
    report = {
        "command": "complete",
        "input": str(args.input),
        "method": args.method,
        "rank": args.rank,
        "completion": y.tolist(),
        "config": {"tol": args.tol, "max_iter": args.max_iter,
                   "seed": args.seed, "tau": args.tau},
    }
    pairs = [("method", args.method)]
    if args.rank is not None:
        pairs.append(("rank", args.rank))
    if res is not None:
        report.update(fit=res.fit, iterations=res.iterations, converged=res.converged,
                      optimality_residuals=list(res.optimality_residuals))
        pairs += [("fit", res.fit), ("iterations", res.iterations),
                  ("converged", res.converged),
                  ("optimality_residual_left", res.optimality_residuals[0]),
                  ("optimality_residual_right", res.optimality_residuals[1])]
    if filled_count is not None:
        missing = obs.pattern.n1 * obs.pattern.n2 - obs.pattern.m
        report.update(filled=filled_count, unobserved=missing)
        pairs += [("filled", filled_count), ("unobserved", missing)]
    pairs.append(("config", f"tol={fmt(args.tol)} max_iter={args.max_iter} "
                            f"seed={args.seed} tau={fmt(args.tau) if args.tau else 'auto'}"))
    lines = _kv_lines(pairs)
    lines.append("completion:")
    for i in range(y.shape[0]):
        lines.append(" ".join(fmt(v) for v in y[i]))
    if args.save:
        write_dense_csv(args.save, y)
    _emit(args, "\n".join(lines), report)
    return 0


# --- rank-test ---


def _cmd_rank_test(args) -> int:
    obs = _require_values(load_observed(args.input), "rank-test")
    noise = stats.NoiseModel(N=args.sample_size, sigma=args.sigma)
    cfg = solvers.SolverConfig(tol=args.tol, max_iter=args.max_iter)
    report_obj = stats.sequential_rank_test(obs, noise, alpha=args.alpha,
                                            cfg=cfg, r_max=args.r_max)
    rows = [{"r": t.r, "T_N": t.T_N, "df": t.df, "p_value": t.p_value,
             "converged": t.converged} for t in report_obj.rows]
    report = {
        "command": "rank-test",
        "input": str(args.input),
        "alpha": args.alpha,
        "selected_rank": report_obj.selected_rank,
        "rows": rows,
        "config": {"sigma": args.sigma, "sample_size": args.sample_size,
                   "tol": args.tol, "max_iter": args.max_iter, "r_max": args.r_max},
    }
    if args.format == "csv":
        lines = ["r,T_N,df,p_value,converged"]
        for t in report_obj.rows:
            lines.append(f"{t.r},{fmt(t.T_N)},{t.df},{fmt(t.p_value)},{t.converged}")
        lines.append(f"# selected_rank={report_obj.selected_rank} alpha={fmt(args.alpha)}")
        _emit(args, "\n".join(lines), report)
        return 0
    lines = [f"alpha: {fmt(args.alpha)}  sigma: {fmt(args.sigma)}  "
             f"N: {args.sample_size}  tol: {fmt(args.tol)}",
             "rank  T_N            df   p-value"]
    for t in report_obj.rows:
        mark = "" if t.converged else "  [not converged]"
        lines.append(f"{t.r:<5d} {fmt(t.T_N):<14s} {t.df:<4d} {fmt(t.p_value)}{mark}")
    lines.append(f"selected rank: {report_obj.selected_rank}")
    _emit(args, "\n".join(lines), report)
    return 0


# --- experiment ---


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _cmd_experiment(args) -> int:
    noise = stats.NoiseModel(N=args.sample_size, sigma=args.sigma)
    cfg = solvers.SolverConfig(tol=args.tol, max_iter=args.max_iter)
    if args.name == "wellposed":
        result = harness.wellposed_probability(
            args.n1, args.n2, _ints(args.r_list), _floats(args.p_list),
            reps=args.reps, seed=args.seed)
    elif args.name == "mse":
        result = harness.mse_compare(
            args.n1, args.n2, _ints(args.r_list), _floats(args.p_list), noise,
            reps=args.reps, seed=args.seed, cfg=cfg, tau=args.tau)
    elif args.name in ("qq", "qq-nested"):
        if args.rank is None:
            raise ValueError(f"experiment {args.name} requires --rank")
        spec = harness.InstanceSpec(
            args.n1, args.n2, args.rank,
            p=args.p, m=args.m if args.p is None else None,
            noise=noise, seed=args.seed)
        extra = args.nested_extra if args.name == "qq-nested" else 0
        if args.name == "qq-nested" and extra < 1:
            raise ValueError("--nested-extra must be >= 1 for qq-nested")
        result = harness.qq_data(spec, args.rank, reps=args.reps, cfg=cfg,
                                 nested_extra=extra)
    elif args.name == "rank-selection":
        sampling = args.p if args.p is not None else args.m
        if sampling is None:
            raise ValueError("rank-selection requires --p or --m")
        result = harness.rank_selection_compare(
            args.n1, args.n2, _ints(args.r_list), sampling, noise,
            reps=args.reps, thresholds=tuple(_floats(args.thresholds)),
            seed=args.seed, alpha=args.alpha, cfg=cfg)
    else:
        raise ValueError(f"unknown experiment {args.name!r}")
    if args.format == "json":
        _emit(args, "", result.to_dict())
        return 0
    lines = []
    for row in result.csv_rows():
        lines.append(",".join(fmt(c) for c in row))
    _emit(args, "\n".join(lines), result.to_dict())
    return 0


# --- wilson ---


def _cmd_wilson(args) -> int:
    observed, (first, second) = harness.wilson_fixture()
    p = observed.pattern
    bounds = patterns.generic_bound(p)
    cfg = solvers.SolverConfig(tol=args.tol, max_iter=args.max_iter)
    nuc = solvers.nuclear_norm_complete(observed, cfg, tau=args.tau)
    sv = {}
    wp = {}
    for name, y in (("first", first), ("second", second)):
        s = np.linalg.svd(y, compute_uv=False)
        sv[name] = s
        wp[name] = geometry.wellposedness_check(y, 3, p, rtol=args.rtol)
    s_nuc = np.linalg.svd(nuc.Y_hat, compute_uv=False)
    threshold_rank = solvers.rank_from_singular_values(nuc.Y_hat, args.threshold)
    report = {
        "command": "wilson",
        "m": p.m,
        "generic_rank_bound": bounds.R_value,
        "df_r3": stats.degrees_of_freedom(3, 6, 6, 30),
        "completions": {
            name: {
                "diagonal": list(np.diag(y)),
                "sigma4_over_sigma1": float(sv[name][3] / sv[name][0]),
                "well_posed_r3": wp[name].well_posed,
            }
            for name, y in (("first", first), ("second", second))
        },
        "nuclear": {
            "diagonal": list(np.diag(nuc.Y_hat)),
            "threshold_rank": threshold_rank,
            "sigma4_over_sigma1": float(s_nuc[3] / s_nuc[0]),
            "converged": nuc.converged,
            "iterations": nuc.iterations,
        },
        "config": {"tau": args.tau, "threshold": args.threshold,
                   "tol": args.tol, "max_iter": args.max_iter, "rtol": args.rtol},
    }
    lines = [
        f"m: {p.m}",
        f"generic_rank_bound: {fmt(bounds.R_value)}",
        f"df at r=3: {report['df_r3']}",
    ]
    for name in ("first", "second"):
        c = report["completions"][name]
        lines.append(f"{name} completion diagonal: "
                     + " ".join(fmt(v) for v in c["diagonal"]))
        lines.append(f"  sigma4/sigma1: {fmt(c['sigma4_over_sigma1'])}  "
                     f"well_posed at r=3: {c['well_posed_r3']}")
    lines.append("nuclear-norm diagonal:    "
                 + " ".join(fmt(v) for v in report["nuclear"]["diagonal"]))
    lines.append(f"  threshold rank (b={fmt(args.threshold)}): {threshold_rank}  "
                 f"sigma4/sigma1: {fmt(report['nuclear']['sigma4_over_sigma1'])}")
    _emit(args, "\n".join(lines), report)
    return 0


# --- parser assembly ---


def build_parser() -> _Parser:
    parser = _Parser(prog="lrmc",
                     description="Identifiability and completion tools for "
                                 "low-rank matrices observed on deterministic patterns.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt_choices=("text", "json")):
        sp.add_argument("--format", choices=fmt_choices, default=fmt_choices[0])
        sp.add_argument("--output", default=None, help="write the report here instead of stdout")

    sp = sub.add_parser("analyze", help="pattern diagnostics and rank bounds")
    sp.add_argument("--input", required=True)
    common(sp)
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("certify", help="well-posedness certificate and characteristic rank")
    sp.add_argument("--input", required=True, help="pattern or observed-matrix file")
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--matrix", default=None, help="dense CSV completion to certify")
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rtol", type=float, default=1e-9)
    common(sp)
    sp.set_defaults(func=_cmd_certify)

    sp = sub.add_parser("complete", help="run a completion solver")
    sp.add_argument("--input", required=True)
    sp.add_argument("--method", choices=("lrma", "nuclear", "rank1", "schur"),
                    default="lrma")
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=50000)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--max-subset-search", type=int, default=2000)
    sp.add_argument("--save", default=None, help="write the completed matrix (dense CSV)")
    common(sp)
    sp.set_defaults(func=_cmd_complete)

    sp = sub.add_parser("rank-test", help="sequential chi-square rank test")
    sp.add_argument("--input", required=True)
    sp.add_argument("--sigma", type=float, required=True,
                    help="noise scale (all entries)")
    sp.add_argument("--sample-size", type=int, default=1, metavar="N")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--r-max", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=50000)
    common(sp, ("text", "csv", "json"))
    sp.set_defaults(func=_cmd_rank_test)

    sp = sub.add_parser("experiment", help="run a named simulation")
    sp.add_argument("--name", required=True,
                    choices=("wellposed", "mse", "qq", "qq-nested", "rank-selection"))
    sp.add_argument("--n1", type=int, required=True)
    sp.add_argument("--n2", type=int, required=True)
    sp.add_argument("--r-list", default="1,2,3")
    sp.add_argument("--p-list", default="0.4,0.6")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--reps", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--sample-size", type=int, default=1, metavar="N")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--thresholds", default="0.25,0.5,0.9")
    sp.add_argument("--nested-extra", type=int, default=5)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=50000)
    sp.add_argument("--tau", type=float, default=None)
    common(sp, ("csv", "json"))
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("wilson", help="the 6x6 two-completion demonstration")
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--threshold", type=float, default=0.999)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=50000)
    sp.add_argument("--rtol", type=float, default=1e-9)
    common(sp)
    sp.set_defaults(func=_cmd_wilson)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
