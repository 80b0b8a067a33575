"""Command-line front end: experiment configs, CSV emission, SVG plots, and
calculators.

Exit codes: 0 success, 2 malformed config/arguments, 3 runtime or
infeasible parameters.  The CSV schema is fixed: see CSV_HEADER; reals are
printed with 9 significant digits and a '.' decimal separator.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

from . import exponents, mgfnumeric, oracle
from .distmodel import flat_alternative, uniform
from .errors import (
    DegenerateStatisticError,
    DivergentMgfError,
    EnumerationTooLargeError,
    InvalidParameterError,
    OutOfDomainError,
    OutOfValidityError,
    QuadratureFailureError,
    UnsupportedStatisticError,
)
from .mc import (
    RunRow,
    default_workers,
    reproduce_figure,
    reproduce_intro,
    run_experiment,
    trial_seed,
)
from .statistics import (
    COLLISIONS,
    EMPTY_BINS,
    SINGLETONS,
    SQUARED,
    TV,
    StatisticKind,
    TesterSpec,
    default_beta,
    default_threshold,
    huber,
)

CSV_HEADER = (
    "tester,n,m,epsilon,gamma,side,trials,failures,delta_hat,"
    "ci_low,ci_high,threshold,beta,x_axis,seed"
)

_RUNTIME_ERRORS = (
    InvalidParameterError,
    UnsupportedStatisticError,
    EnumerationTooLargeError,
    DegenerateStatisticError,
    OutOfDomainError,
    OutOfValidityError,
    DivergentMgfError,
    QuadratureFailureError,
)

_BASE_KINDS: dict[str, StatisticKind] = {
    "collisions": COLLISIONS,
    "squared": SQUARED,
    "tv": TV,
    "empty_bins": EMPTY_BINS,
    "singletons": SINGLETONS,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class TesterConfig:
    kind: str
    beta: float | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class RunConfig:
    testers: tuple[TesterConfig, ...]
    grid_n_values: tuple[int, ...] | None
    grid_point: tuple[int, int] | None  # (m, n)
    epsilon_rule: str  # "fixed" | "figure8.1"
    epsilon: float | None
    gamma: float
    trials: int
    seed: int
    workers: int


def parse_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    try:
        testers_raw = obj["testers"]
        grid = obj["grid"]
        eps_rule = obj["epsilon_rule"]
        gamma = float(obj.get("gamma", 0.5))
        trials = int(obj["trials"])
        seed = int(obj["seed"])
        workers = int(obj.get("workers", 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config field: {exc}") from exc
    if not isinstance(testers_raw, list) or not testers_raw:
        raise ConfigError("testers must be a nonempty list")
    testers = []
    for entry in testers_raw:
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ConfigError(f"tester entry needs a 'kind': {entry!r}")
        kind = entry["kind"]
        if kind not in _BASE_KINDS and kind != "huber":
            raise ConfigError(f"unknown tester kind {kind!r}")
        testers.append(
            TesterConfig(
                kind=kind,
                beta=float(entry["beta"]) if "beta" in entry else None,
                threshold=float(entry["threshold"]) if "threshold" in entry else None,
            )
        )
    n_values = None
    point = None
    if "n_values" in grid:
        n_values = tuple(int(v) for v in grid["n_values"])
        if not n_values:
            raise ConfigError("grid.n_values must be nonempty")
    elif "m" in grid and "n" in grid:
        point = (int(grid["m"]), int(grid["n"]))
    else:
        raise ConfigError("grid needs either n_values or both m and n")
    rule = eps_rule.get("rule") if isinstance(eps_rule, dict) else None
    if rule == "fixed":
        if "epsilon" not in eps_rule:
            raise ConfigError("epsilon_rule 'fixed' needs an epsilon")
        epsilon = float(eps_rule["epsilon"])
    elif rule == "figure8.1":
        epsilon = None
    else:
        raise ConfigError("epsilon_rule.rule must be 'fixed' or 'figure8.1'")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    return RunConfig(
        testers=tuple(testers),
        grid_n_values=n_values,
        grid_point=point,
        epsilon_rule=rule,
        epsilon=epsilon,
        gamma=gamma,
        trials=trials,
        seed=seed,
        workers=workers,
    )


def config_to_dict(config: RunConfig) -> dict:
    testers = []
    for tc in config.testers:
        entry: dict = {"kind": tc.kind}
        if tc.beta is not None:
            entry["beta"] = tc.beta
        if tc.threshold is not None:
            entry["threshold"] = tc.threshold
        testers.append(entry)
    grid: dict = (
        {"n_values": list(config.grid_n_values)}
        if config.grid_n_values is not None
        else {"m": config.grid_point[0], "n": config.grid_point[1]}
    )
    eps_rule: dict = {"rule": config.epsilon_rule}
    if config.epsilon_rule == "fixed":
        eps_rule["epsilon"] = config.epsilon
    return {
        "testers": testers,
        "grid": grid,
        "epsilon_rule": eps_rule,
        "gamma": config.gamma,
        "trials": config.trials,
        "seed": config.seed,
        "workers": config.workers,
    }


def build_tester(tc: TesterConfig, n: int, m: int, epsilon: float) -> tuple[str, TesterSpec]:
    if tc.kind == "huber":
        beta = tc.beta if tc.beta is not None else default_beta(n, m, epsilon)[0]
        kind = huber(beta)
        threshold = tc.threshold if tc.threshold is not None else 2.0
    else:
        kind = _BASE_KINDS[tc.kind]
        threshold = (
            tc.threshold
            if tc.threshold is not None
            else default_threshold(kind, n, m, epsilon)
        )
    return tc.kind, TesterSpec(kind, n, m, epsilon, threshold)


def _effective_workers(configured: int) -> int:
    env = os.environ.get("UNIFORMITY_LAB_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, configured)


def run_config(config: RunConfig) -> list[RunRow]:
    workers = _effective_workers(config.workers)
    points = (
        [(n, n) for n in config.grid_n_values]
        if config.grid_n_values is not None
        else [(config.grid_point[0], config.grid_point[1])]
    )
    rows: list[RunRow] = []
    for m, n in points:
        epsilon = (
            config.epsilon
            if config.epsilon_rule == "fixed"
            else 0.7 * n ** (-1.0 / 8.1)
        )
        named = [build_tester(tc, n, m, epsilon) for tc in config.testers]
        q = flat_alternative(m, epsilon, config.gamma).probability_vector()
        rows.extend(
            run_experiment(
                named, q, config.gamma, config.trials, trial_seed(config.seed, n), workers
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV


def _real(x: float) -> str:
    return f"{x:.9g}"


def rows_to_csv(rows: list[RunRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.tester,
                    str(r.n),
                    str(r.m),
                    _real(r.epsilon),
                    _real(r.gamma),
                    r.side,
                    str(r.trials),
                    str(r.failures),
                    _real(r.delta_hat),
                    _real(r.ci_low),
                    _real(r.ci_high),
                    _real(r.threshold),
                    _real(r.beta),
                    _real(r.x_axis),
                    str(r.seed),
                ]
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG plot

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _read_csv_rows(path: str) -> list[dict]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ConfigError(f"CSV header does not match schema: {reader.fieldnames}")
        return list(reader)


def render_svg(rows: list[dict]) -> str:
    """Standalone 800x600 SVG: per tester one polyline of max-side failure
    rate (log10 y) with its Wilson band; zero rates clamp to 1/(2*trials)
    and get an open-circle marker."""
    if not rows:
        raise OutOfValidityError("empty CSV: nothing to plot")
    # per tester, per x: worst side
    by_tester: dict[str, dict[float, dict]] = {}
    order: list[str] = []
    for row in rows:
        name = row["tester"]
        x = float(row["x_axis"])
        if name not in by_tester:
            by_tester[name] = {}
            order.append(name)
        best = by_tester[name].get(x)
        if best is None or float(row["delta_hat"]) > float(best["delta_hat"]):
            by_tester[name][x] = row

    width, height = 800.0, 600.0
    left, right, top, bottom = 80.0, 630.0, 50.0, 540.0
    floor = min(1.0 / (2.0 * int(row["trials"])) for row in rows)
    ys: list[float] = []
    xs: list[float] = []
    for series in by_tester.values():
        for x, row in series.items():
            xs.append(x)
            delta = float(row["delta_hat"]) or floor
            lo = float(row["ci_low"]) or floor
            hi = float(row["ci_high"]) or floor
            ys.extend([delta, lo, hi])
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    y_min = min(ys)
    y_max = max(max(ys), y_min * 1.0001)
    ly_min, ly_max = math.log10(y_min) - 0.1, math.log10(y_max) + 0.1

    def sx(x: float) -> float:
        return left + (right - left) * (x - x_min) / (x_max - x_min)

    def sy(y: float) -> float:
        ly = math.log10(max(y, 1e-300))
        return bottom - (bottom - top) * (ly - ly_min) / (ly_max - ly_min)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:g} {height:g}">',
        f'<rect x="0" y="0" width="{width:g}" height="{height:g}" fill="white"/>',
        f'<line x1="{left:.2f}" y1="{bottom:.2f}" x2="{right:.2f}" y2="{bottom:.2f}" stroke="black"/>',
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" y2="{bottom:.2f}" stroke="black"/>',
    ]
    for i in range(5):
        x = x_min + (x_max - x_min) * i / 4.0
        parts.append(
            f'<line x1="{sx(x):.2f}" y1="{bottom:.2f}" x2="{sx(x):.2f}" y2="{bottom + 5:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{sx(x):.2f}" y="{bottom + 20:.2f}" font-size="12" text-anchor="middle">{x:.4g}</text>'
        )
    decade = math.ceil(ly_min)
    while decade <= ly_max:
        y = 10.0**decade
        parts.append(
            f'<line x1="{left - 5:.2f}" y1="{sy(y):.2f}" x2="{left:.2f}" y2="{sy(y):.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 8:.2f}" y="{sy(y) + 4:.2f}" font-size="12" text-anchor="end">1e{decade}</text>'
        )
        decade += 1
    parts.append(
        f'<text x="{(left + right) / 2:.2f}" y="{bottom + 38:.2f}" font-size="14" '
        'text-anchor="middle">n^2 eps^4 / m</text>'
    )
    parts.append(
        f'<text x="22" y="{(top + bottom) / 2:.2f}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 22 {(top + bottom) / 2:.2f})">failure probability</text>'
    )
    for t, name in enumerate(order):
        color = _PALETTE[t % len(_PALETTE)]
        series = sorted(by_tester[name].items())
        band_fwd = [
            f"{sx(x):.2f},{sy(max(float(r['ci_high']), floor)):.2f}" for x, r in series
        ]
        band_rev = [
            f"{sx(x):.2f},{sy(max(float(r['ci_low']), floor)):.2f}"
            for x, r in reversed(series)
        ]
        parts.append(
            f'<polygon points="{" ".join(band_fwd + band_rev)}" fill="{color}" '
            'fill-opacity="0.2" stroke="none"/>'
        )
        line = [
            f"{sx(x):.2f},{sy(max(float(r['delta_hat']), floor)):.2f}" for x, r in series
        ]
        parts.append(
            f'<polyline points="{" ".join(line)}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, r in series:
            if float(r["delta_hat"]) == 0.0:
                clamp = 1.0 / (2.0 * int(r["trials"]))
                parts.append(
                    f'<circle cx="{sx(x):.2f}" cy="{sy(clamp):.2f}" r="4" fill="white" '
                    f'stroke="{color}" stroke-width="2"/>'
                )
        ly = top + 18.0 * (t + 1)
        parts.append(
            f'<line x1="{right + 10:.2f}" y1="{ly:.2f}" x2="{right + 40:.2f}" y2="{ly:.2f}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{right + 46:.2f}" y="{ly + 4:.2f}" font-size="13">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# depoissonization self-check


def depoissonize_check(out=sys.stdout) -> bool:
    """Built-in contour-integral checks; prints one pass/fail line each."""
    checks: list[tuple[str, float, float, float]] = []
    for n in (1, 5, 20):
        spec = mgfnumeric.default_contour(n)
        value = mgfnumeric.depoissonize(lambda lam: 0.0 + 0.0j, n, spec)
        checks.append((f"unit product, n={n}", value, 1.0, 1e-10))
    p2 = uniform(2)
    builder = mgfnumeric._log_product_builder(
        EMPTY_BINS, math.log(2.0), p2, 2, 2, 1.0, 1e-12, None, lam_radius=2.0
    )
    value = mgfnumeric.depoissonize(builder, 2, mgfnumeric.default_contour(2))
    checks.append(("E[2^empty], n=m=2", value, 1.5, 1e-8))
    n, m, epsilon, theta = 6, 3, 0.4, 0.3
    p3 = uniform(m)
    via_contour = mgfnumeric.depoissonized_mgf(
        SQUARED, theta, p3, n, m, epsilon, beta=float(n)
    )
    t = n * n * epsilon**4 / m * theta
    via_oracle = oracle.exact_mgf(SQUARED, p3, n, m, epsilon, t)
    checks.append(("squared MGF vs oracle, n=6 m=3", via_contour, via_oracle, 1e-6))
    all_ok = True
    for label, got, want, tol in checks:
        ok = abs(got - want) <= tol * max(abs(want), 1.0)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {label}: got {got!r}, want {want!r}", file=out)
    return all_ok


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uniformity-lab",
        description="Uniformity-testing laboratory: experiments and calculators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiments from a JSON config, CSV to stdout")
    p_run.add_argument("config", help="path to JSON config file")

    p_plot = sub.add_parser("plot", help="render a CSV of runs to a standalone SVG")
    p_plot.add_argument("csv_file")
    p_plot.add_argument("out_svg")

    p_calc = sub.add_parser("calc", help="closed-form calculators")
    calc_sub = p_calc.add_subparsers(dest="calc_command", required=True)

    p_ss = calc_sub.add_parser("samplesize")
    p_ss.add_argument("--m", type=int, required=True)
    p_ss.add_argument("--eps", type=float, required=True)
    p_ss.add_argument("--delta", type=float, default=None)
    p_ss.add_argument("--delta-minus", type=float, default=None)
    p_ss.add_argument("--delta-plus", type=float, default=None)
    p_ss.add_argument("--kind", required=True,
                      choices=["huber", "squared", "collisions", "tv", "superlinear"])

    p_nv = calc_sub.add_parser("nvar")
    p_nv.add_argument("--kind", required=True, choices=["squared", "collisions", "huber", "tv", "empty_bins"])
    p_nv.add_argument("--n", type=int, required=True)
    p_nv.add_argument("--m", type=int, required=True)
    p_nv.add_argument("--eps", type=float, required=True)

    p_ex = calc_sub.add_parser("exponent")
    p_ex.add_argument("--kind", required=True, choices=["huber", "squared", "collisions", "tv", "empty_bins"])
    p_ex.add_argument("--alpha", type=float, required=True)

    p_beta = calc_sub.add_parser("beta")
    p_beta.add_argument("--n", type=int, required=True)
    p_beta.add_argument("--m", type=int, required=True)
    p_beta.add_argument("--eps", type=float, required=True)
    p_beta.add_argument("--k-mult", type=float, default=1.0)

    p_reg = calc_sub.add_parser("regime")
    p_reg.add_argument("--n", type=int, required=True)
    p_reg.add_argument("--m", type=int, required=True)
    p_reg.add_argument("--eps", type=float, required=True)
    p_reg.add_argument("--delta", type=float, required=True)

    p_oracle = sub.add_parser("oracle", help="exact brute-force computations")
    oracle_sub = p_oracle.add_subparsers(dest="oracle_command", required=True)
    p_err = oracle_sub.add_parser("error-rates")
    p_err.add_argument("--kind", required=True,
                       choices=["collisions", "squared", "tv", "empty_bins", "singletons", "huber"])
    p_err.add_argument("--n", type=int, required=True)
    p_err.add_argument("--m", type=int, required=True)
    p_err.add_argument("--eps", type=float, required=True)
    p_err.add_argument("--gamma", type=float, default=0.5)
    p_err.add_argument("--threshold", type=float, default=None)
    p_err.add_argument("--beta", type=float, default=None)

    p_dep = sub.add_parser("depoissonize", help="contour-integral numerics")
    dep_sub = p_dep.add_subparsers(dest="dep_command", required=True)
    dep_sub.add_parser("check")

    p_rep = sub.add_parser("reproduce", help="rerun the built-in experiments")
    rep_sub = p_rep.add_subparsers(dest="rep_command", required=True)
    p_intro = rep_sub.add_parser("intro")
    p_intro.add_argument("--trials", type=int, default=20_000)
    p_intro.add_argument("--seed", type=int, default=1)
    p_intro.add_argument("--workers", type=int, default=None)
    p_fig = rep_sub.add_parser("figure")
    p_fig.add_argument("--n-values", default="200,300,400,500,600")
    p_fig.add_argument("--trials", type=int, default=300_000)
    p_fig.add_argument("--seed", type=int, default=1)
    p_fig.add_argument("--workers", type=int, default=None)
    return parser


def _cmd_run(args) -> int:
    try:
        with open(args.config) as handle:
            obj = json.load(handle)
        config = parse_config(obj)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    rows = run_config(config)
    sys.stdout.write(rows_to_csv(rows))
    return 0


def _cmd_plot(args) -> int:
    try:
        rows = _read_csv_rows(args.csv_file)
    except (OSError, ConfigError) as exc:
        print(f"csv error: {exc}", file=sys.stderr)
        return 2
    svg = render_svg(rows)
    with open(args.out_svg, "w") as handle:
        handle.write(svg)
    return 0


def _cmd_calc(args) -> int:
    if args.calc_command == "samplesize":
        dm = args.delta_minus if args.delta_minus is not None else args.delta
        dp = args.delta_plus if args.delta_plus is not None else args.delta
        if dm is None or dp is None:
            print("samplesize needs --delta or both --delta-minus/--delta-plus", file=sys.stderr)
            return 2
        print(exponents.sample_size(args.m, args.eps, dm, dp, args.kind))
    elif args.calc_command == "nvar":
        print(_real(exponents.nvar_closed_form(args.kind, args.n, args.m, args.eps)))
    elif args.calc_command == "exponent":
        print(_real(exponents.error_exponent(args.kind, args.alpha)))
    elif args.calc_command == "beta":
        beta, diag = default_beta(args.n, args.m, args.eps, args.k_mult)
        print(json.dumps({"beta": beta, **dataclasses.asdict(diag)}))
    elif args.calc_command == "regime":
        report = exponents.regime(args.n, args.m, args.eps, args.delta)
        print(json.dumps(dataclasses.asdict(report)))
    return 0


def _cmd_oracle(args) -> int:
    if args.kind == "huber":
        beta = args.beta if args.beta is not None else default_beta(args.n, args.m, args.eps)[0]
        kind = huber(beta)
        threshold = args.threshold if args.threshold is not None else 2.0
    else:
        kind = _BASE_KINDS[args.kind]
        threshold = (
            args.threshold
            if args.threshold is not None
            else default_threshold(kind, args.n, args.m, args.eps)
        )
    spec = TesterSpec(kind, args.n, args.m, args.eps, threshold)
    p = uniform(args.m)
    q = flat_alternative(args.m, args.eps, args.gamma).probability_vector()
    delta_minus, delta_plus = oracle.exact_error_rates(spec, p, q)
    print(json.dumps({"delta_minus": delta_minus, "delta_plus": delta_plus,
                      "threshold": threshold}))
    return 0


def _cmd_reproduce(args) -> int:
    workers = args.workers if args.workers is not None else default_workers()
    workers = _effective_workers(workers)
    if args.rep_command == "intro":
        rows = reproduce_intro(args.trials, args.seed, workers)
    else:
        n_values = [int(v) for v in str(args.n_values).split(",") if v]
        rows = reproduce_figure(n_values, args.trials, args.seed, workers)
    sys.stdout.write(rows_to_csv(rows))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plot":
            return _cmd_plot(args)
        if args.command == "calc":
            return _cmd_calc(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "depoissonize":
            return 0 if depoissonize_check() else 3
        if args.command == "reproduce":
            return _cmd_reproduce(args)
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
