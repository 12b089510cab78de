"""Command-line entry point: ``hypercolor <subcommand> [options]``.

Exit codes: 0 success, 2 parameter or parse error, 3 capacity error.
Results go to --out (or stdout when omitted); a one-line summary goes to
stdout when --out is given, otherwise to stderr.
"""

from __future__ import annotations

import argparse
import io
import csv
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import experiments as ex
from .decomposition import PROFILES, classify_vertices, cluster_log_estimate, core_peel, edge_data
from .enumeration import Restriction, cluster_log, partition_log, set_threads, spectrum
from .errors import CapacityError, ParameterError
from .hypergraph import (MODELS, ModelParams, format_coloring, format_hypergraph, generate, is_balanced,
                         monochromatic_count, parse_coloring, parse_hypergraph)
from .moments import feasible_alphas, first_moment_log, lambda_asymptotic_log, second_moment_alpha_log
from .phase import (LN2, beta_crit_expansion, beta_crit_root, classify_regime, d_from_c, lambda_eval,
                    lambda_value, phase_point, second_moment_verdict, sigma, verdict_grid)
from .planted import gen_planted

THREADS_ENV = "HYPERCOLOR_THREADS"
SEED_MAX = 2**64 - 1
# default alpha sweep for `moments` covers every feasible overlap up to this n
ALPHA_SWEEP_MAX_N = 64


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    fmt: str = "json"
    threads: int | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        skip = {"subcommand", "seed", "out", "format", "threads", "func"}
        params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        return cls(args.subcommand, params, args.seed, args.out, args.format, args.threads)

    def header(self) -> dict:
        """What goes into output files: everything except I/O and threading."""
        return {"subcommand": self.subcommand, "parameters": self.parameters, "seed": self.seed}


@dataclass
class Result:
    payload: dict
    csv_rows: list[dict] | str | None
    summary: str


def _rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0].keys())
    w.writerow(cols)
    for r in rows:
        w.writerow([ex._clean(r[c]) for c in cols])
    return buf.getvalue()


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as err:
        raise ParameterError(f"cannot read {path}: {err.strerror}") from None


def _write(path: str, text: str):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise ParameterError(f"cannot write {path}: {err.strerror}") from None


def _seed(text: str) -> int:
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= s <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return s


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _density(args, k: int) -> float:
    if getattr(args, "c_over_ln2", None) is not None:
        return d_from_c(k, args.c_over_ln2 * LN2)
    if getattr(args, "d", None) is not None:
        return args.d
    raise ParameterError("give the density as --d or --c-over-ln2")


def _params(args) -> ModelParams:
    if getattr(args, "m", None) is not None:
        if args.d is not None or args.c_over_ln2 is not None:
            raise ParameterError("--m excludes --d and --c-over-ln2")
        return ModelParams.from_m(args.n, args.k, args.m, args.beta)
    return ModelParams(n=args.n, k=args.k, d=_density(args, args.k), beta=args.beta)


def parse_restriction(text: str) -> Restriction:
    name, _, arg = text.partition(":")
    if name in ("all", "balanced"):
        if arg:
            raise ParameterError(f"restriction {name} takes no argument")
        return Restriction(name)
    if not arg:
        raise ParameterError(f"restriction {name!r} needs an argument, as in {name}:0.1")
    try:
        value = float(arg)
    except ValueError:
        raise ParameterError(f"restriction argument must be a number, got {arg!r}") from None
    return Restriction(name, value)


# ---------------------------------------------------------------- handlers

def cmd_gen(args, cfg):
    if args.model == "planted":
        if args.m is not None:
            raise ParameterError("the planted model is parametrised by --d or --c-over-ln2, not --m")
        inst = gen_planted(_density(args, args.k), args.k, args.n, args.beta, args.seed, balanced=args.balanced)
        H = inst.hypergraph
        if args.coloring_out:
            _write(args.coloring_out, format_coloring(inst.sigma) + "\n")
    else:
        if args.coloring_out:
            raise ParameterError("--coloring-out only applies to --model planted")
        H = generate(args.model, _params(args), args.seed)
    return Result({}, format_hypergraph(H), f"gen: model={args.model} n={H.n} k={H.k} m={H.m}")


def cmd_exact(args, cfg):
    H = parse_hypergraph(_read(args.input))
    sel = parse_restriction(args.restriction)
    if sel.variant == "overlap_at_least":
        if not args.coloring:
            raise ParameterError("overlap_at_least needs --coloring for the reference")
        T = spectrum(H, "overlap", parse_coloring(_read(args.coloring)))
    else:
        T = spectrum(H)
    if args.spectrum_csv:
        _write(args.spectrum_csv, T.to_csv())
    rows = [{"beta": b, "log_z": partition_log(T, b, sel)} for b in args.beta]
    payload = {"n": H.n, "k": H.k, "m": H.m, "restriction": args.restriction, "results": rows}
    summary = f"exact: n={H.n} k={H.k} m={H.m} " + " ".join(f"logZ({r['beta']:g})={r['log_z']:.12g}" for r in rows)
    return Result(payload, rows, summary)


def cmd_cluster(args, cfg):
    H = parse_hypergraph(_read(args.input))
    s = parse_coloring(_read(args.coloring))
    T = spectrum(H, "overlap", s)
    rows = []
    for b in args.beta:
        row = {"beta": b, "log_cluster": cluster_log(T, b, args.theta)}
        if args.expected_log_z is not None:
            row["tame"] = is_balanced(s) and row["log_cluster"] <= args.expected_log_z
        rows.append(row)
    payload = {"n": H.n, "k": H.k, "m": H.m, "theta": args.theta, "balanced": is_balanced(s), "results": rows}
    return Result(payload, rows, f"cluster: n={H.n} m={H.m} " +
                  " ".join(f"logC({r['beta']:g})={r['log_cluster']:.12g}" for r in rows))


def cmd_moments(args, cfg):
    p = _params(args)
    if args.alpha:
        alphas = args.alpha
    elif p.n <= ALPHA_SWEEP_MAX_N:
        alphas = [a for a in feasible_alphas(p.n)]
    else:
        alphas = []
    rows = []
    for a in alphas:
        row = {"alpha": a, "second_moment_log": second_moment_alpha_log(p, a)}
        row["asymptotic_log_per_n"] = lambda_asymptotic_log(p, a) if -1 < a < 1 else math.nan
        rows.append(row)
    payload = {"n": p.n, "k": p.k, "m": p.m, "d": p.d, "beta": p.beta,
               "first_moment_log": first_moment_log(p), "second_moment": rows}
    if args.mc_trials:
        payload["monte_carlo"] = ex.mc_first_moment_check(p.n, p.k, p.d, p.beta, args.mc_trials, args.seed,
                                                          m=p.m).to_dict()
    return Result(payload, rows, f"moments: n={p.n} k={p.k} m={p.m} beta={p.beta:g} "
                                 f"lnE[Z]={payload['first_moment_log']:.12g}")


def cmd_phase(args, cfg):
    d = _density(args, args.k)
    rows = []
    regime = None
    for b in args.beta:
        pp = phase_point(d, args.k, b, args.band)
        regime = pp.regime
        rows.append({"beta": b, "sigma": pp.sigma_value, "phi_upper": pp.phi_upper, "gap": pp.gap})
    payload = {"k": args.k, "d": d, "regime": _regime_dict(regime), "results": rows}
    return Result(payload, rows, f"phase: k={args.k} d={d:.12g} regime={regime.label}")


def _root_dict(root):
    if root is None:
        return None
    return {"beta": root.beta, "lo": root.lo, "hi": root.hi, "residual": root.residual,
            "iterations": root.iterations}


def _regime_dict(regime):
    return {"label": regime.label, "c": regime.c, "band": regime.band, "beta_c": _root_dict(regime.beta_c)}


def cmd_scan_alpha(args, cfg):
    d = _density(args, args.k)
    v = second_moment_verdict(d, args.k, args.beta, args.resolution)
    lv = lambda_eval(d, args.k, args.beta, 0.0)
    payload = {"k": args.k, "d": d, "beta": args.beta, "kind": v.kind, "alpha": v.alpha, "excess": v.excess,
               "lambda_zero": v.lambda_zero, "second_derivative_zero": lv.second_derivative}
    grid = verdict_grid(args.k, args.resolution)
    rows = [{"alpha": float(a), "lambda": float(x)} for a, x in zip(grid, lambda_value(d, args.k, args.beta, grid))]
    if args.grid:
        payload["grid"] = rows
    return Result(payload, rows, f"scan-alpha: k={args.k} beta={args.beta:g} verdict={v.kind}")


def cmd_beta_crit(args, cfg):
    d = _density(args, args.k)
    root = beta_crit_root(d, args.k, tol=args.tol)
    regime = classify_regime(d, args.k, args.band)
    expansion = beta_crit_expansion(d, args.k)
    payload = {"k": args.k, "d": d, "c": regime.c, "root": _root_dict(root), "expansion": expansion,
               "band": regime.band, "regime": regime.label,
               "sigma_at_root": None if root is None else sigma(d, args.k, root.beta)}
    rows = [{"k": args.k, "d": d, "root": None if root is None else root.beta, "expansion": expansion,
             "band": regime.band, "regime": regime.label}]
    shown = "none" if root is None else f"{root.beta:.12g}"
    return Result(payload, rows, f"beta-crit: k={args.k} root={shown} expansion={expansion:.12g}")


def cmd_decompose(args, cfg):
    H = parse_hypergraph(_read(args.input))
    s = parse_coloring(_read(args.coloring))
    th = PROFILES[args.profile]
    ed = edge_data(H, s)
    peel = core_peel(H, s, th, ed=ed)
    dec = classify_vertices(H, s, peel.members, ed=ed, peel_trace=peel.trace)
    est = cluster_log_estimate(H, s, args.beta, dec, th)
    row = ex.census_row(H.n, H.k, None, args.beta, dec, monochromatic_count(H, s), est)
    payload = {"sizes": dec.sizes(), "estimate": {"lower": est.lower, "upper": est.upper, "point": est.point,
                                                   "feasible": est.feasible, "theta": est.theta,
                                                   "terms": est.terms, "note": est.note},
               "census": row, "profile": args.profile}
    if args.trace:
        payload["trace"] = [[int(v), lab] for v, lab in peel.trace_labels()]
    sz = dec.sizes()
    return Result(payload, [row], "decompose: " + " ".join(f"{k}={v}" for k, v in sz.items()))


def _report_result(rep, csv_text, summary):
    return Result(rep.to_dict(), csv_text, summary)


def cmd_census(args, cfg):
    d = _density(args, args.k)
    rep = ex.decomposition_census(args.n, args.k, d, args.beta, args.trials, args.seed, PROFILES[args.profile])
    a = rep.aggregates
    return _report_result(rep, rep.trials_csv(),
                          f"census: trials={args.trials} core/n={a['core_fraction']['mean']:.6g} "
                          f"rest*2^k/n={a['rest_scaled']['mean']:.6g} pass={rep.passed}")


def cmd_gap_scan(args, cfg):
    d = _density(args, args.k)
    grid = np.linspace(args.beta_min, args.beta_max, args.steps)
    rep = ex.condensation_scan(d, args.k, grid, args.n, args.trials, args.seed, PROFILES[args.profile])
    change = rep.aggregates["empirical_sign_change"]
    return _report_result(rep, ex.scan_long_csv(rep),
                          f"gap-scan: k={args.k} steps={args.steps} sign_change={change} "
                          f"beta_c={rep.aggregates['beta_crit']}")


def cmd_planted_null(args, cfg):
    d = _density(args, args.k)
    rep = ex.planted_vs_null(args.n, args.k, d, args.beta, args.trials, args.seed)
    diff = rep.aggregates["difference"]
    return _report_result(rep, rep.trials_csv(),
                          f"planted-null: diff={diff['mean']:.6g} se={diff['se']:.3g}")


# ---------------------------------------------------------------- parser

def _density_args(p, with_m=False):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--d", type=float, help="average degree d")
    g.add_argument("--c-over-ln2", type=float, help="density as c/ln2 with c = d/k - (2^(k-1)-1) ln 2")
    if with_m:
        g.add_argument("--m", type=int, help="number of edges (gnm, gnm_rep)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default 0)")
    common.add_argument("--out", help="result file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="result format (default json)")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker threads; default from ${THREADS_ENV}, else all cores")

    parser = argparse.ArgumentParser(prog="hypercolor", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "draw a random or planted hypergraph (text format)")
    p.add_argument("--model", choices=MODELS + ("planted",), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    _density_args(p, with_m=True)
    p.add_argument("--beta", type=float, default=0.0, help="inverse temperature (planted model)")
    p.add_argument("--balanced", action="store_true", help="planted: condition sigma on balance")
    p.add_argument("--coloring-out", help="planted: write the hidden coloring here")

    p = add("exact", cmd_exact, "exact ln Z by enumeration")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--beta", type=float, nargs="+", default=[1.0])
    p.add_argument("--restriction", default="all",
                   help="all | balanced | imbalanced:EPS | energy_window:EPS | overlap_at_least:THETA")
    p.add_argument("--coloring", help="reference coloring for overlap_at_least")
    p.add_argument("--spectrum-csv", help="also write the (key, energy, count) table here")

    p = add("cluster", cmd_cluster, "exact log cluster mass around a coloring")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--coloring", required=True)
    p.add_argument("--beta", type=float, nargs="+", default=[1.0])
    p.add_argument("--theta", type=float, default=2 / 3)
    p.add_argument("--expected-log-z", type=float, help="report tameness against this ln E[Z]")

    p = add("moments", cmd_moments, "exact first and overlap-resolved second moments")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    _density_args(p, with_m=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--alpha", type=float, nargs="*",
                   help=f"overlaps to resolve (default: all feasible when n <= {ALPHA_SWEEP_MAX_N})")
    p.add_argument("--mc-trials", type=int, default=0, help="also run a Monte Carlo first-moment check")

    p = add("phase", cmd_phase, "Sigma, first-moment bound, gap and regime")
    p.add_argument("--k", type=int, required=True)
    _density_args(p)
    p.add_argument("--beta", type=float, nargs="+", required=True)
    p.add_argument("--band", type=float, default=None, help="indeterminate band (default k^4 2^-k)")

    p = add("scan-alpha", cmd_scan_alpha, "numerical second-moment verdict over alpha")
    p.add_argument("--k", type=int, required=True)
    _density_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--resolution", type=int, default=2000)
    p.add_argument("--grid", action="store_true", help="include the scanned grid in JSON output")

    p = add("beta-crit", cmd_beta_crit, "critical beta: bisection root and expansion")
    p.add_argument("--k", type=int, required=True)
    _density_args(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--band", type=float, default=None, help="indeterminate band (default k^4 2^-k)")

    p = add("decompose", cmd_decompose, "core / backbone / rest / free decomposition")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--coloring", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default="large_k", help="threshold profile")
    p.add_argument("--trace", action="store_true", help="include the core peeling trace")

    def scan_common(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
        _density_args(p)
        p.add_argument("--trials", type=_positive_int, default=1)
        p.add_argument("--profile", choices=sorted(PROFILES), default="large_k", help="threshold profile")

    p = add("census", cmd_census, "decomposition census over planted instances")
    scan_common(p)
    p.add_argument("--beta", type=float, required=True)

    p = add("gap-scan", cmd_gap_scan, "analytic and measured condensation gap along beta")
    scan_common(p)
    p.add_argument("--beta-min", type=float, required=True)
    p.add_argument("--beta-max", type=float, required=True)
    p.add_argument("--steps", type=_positive_int, default=5)

    p = add("planted-null", cmd_planted_null, "(1/n) ln Z under the null vs planted model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    _density_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--trials", type=_positive_int, default=10)
    return parser


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if not env:
        return None
    try:
        v = int(env)
    except ValueError:
        raise ParameterError(f"${THREADS_ENV} must be a positive integer, got {env!r}") from None
    if v < 1:
        raise ParameterError(f"${THREADS_ENV} must be a positive integer, got {env!r}")
    return v


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    cfg = RunConfig.from_args(args)
    try:
        set_threads(_threads(cfg.threads))
        res = args.func(args, cfg)
        if isinstance(res.csv_rows, str) and not res.payload:
            text = res.csv_rows
        elif cfg.fmt == "csv":
            text = res.csv_rows if isinstance(res.csv_rows, str) else _rows_to_csv(res.csv_rows or [])
        else:
            text = ex.dumps({"schema": ex.SCHEMA, "config": cfg.header(), "result": res.payload})
        if cfg.out:
            _write(cfg.out, text)
            print(res.summary)
        else:
            sys.stdout.write(text)
            print(res.summary, file=sys.stderr)
    except CapacityError as e:
        print(f"hypercolor {cfg.subcommand}: capacity error: {e}", file=sys.stderr)
        return 3
    except ParameterError as e:
        print(f"hypercolor {cfg.subcommand}: parameter error: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
