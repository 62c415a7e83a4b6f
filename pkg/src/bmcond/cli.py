"""Command-line surface: analytic curves, simulations, fit reports, table.

Exit codes: 0 success, 2 usage error, 3 numerical domain error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path as FsPath

import numpy as np

from . import estimator, moments, svg
from .analytic import ExtremaTriple
from .errors import CapacityError, DomainError, InsufficientDataError
from .sampler import SimulationConfig

_DIM_LETTER = {"c": "close", "a": "argmax", "h": "high", "l": "low"}
_DIM_ORDER = ("close", "argmax", "high", "low")

_MARK_COLORS = {5.0: "#1f77b4", 2.0: "#17becf", 1.0: "#2ca02c", 0.2: "#d62728"}
_FALLBACK_COLORS = ("#1f77b4", "#17becf", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return f"{x:.9g}"


def _parse_given(parser: argparse.ArgumentParser, text: str) -> tuple[str, ...]:
    letters = text.replace(",", "")
    dims = []
    for ch in letters:
        if ch not in _DIM_LETTER:
            parser.error(f"unknown conditioning letter {ch!r} in --given {text!r}")
        dims.append(_DIM_LETTER[ch])
    ordered = tuple(d for d in _DIM_ORDER if d in dims)
    if len(ordered) != len(dims):
        parser.error(f"duplicate conditioning letters in --given {text!r}")
    return ordered


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BMCOND_THREADS", "1")))
    except ValueError:
        return 1


def _analytic_curve_fn(dims: tuple[str, ...]):
    """Closed-form (mean, var) curves for the sets that have them, else None."""
    key = frozenset(dims)
    if key == {"argmax"}:
        return lambda p, t: _pair(moments.curve_given_theta(t, p["argmax"]))
    if key == {"argmax", "high"}:
        return lambda p, t: _pair(moments.curve_given_theta_h(t, p["argmax"], p["high"]))
    if key == {"close", "argmax", "high"}:
        return lambda p, t: _pair(
            moments.curve_given_c_theta_h(
                t, ExtremaTriple(p["argmax"], max(p["high"], max(p["close"], 0.0)), p["close"])
            )
        )
    if key == {"close"}:
        # pinned endpoint: linear mean, bridge variance
        return lambda p, t: (p["close"] * np.asarray(t), np.asarray(t) * (1.0 - np.asarray(t)))
    return None


def _pair(curve):
    return curve.means, curve.variances


# ---------------------------------------------------------------------------
# curves

def _cmd_curves(args, parser) -> int:
    n = args.times
    if n < 2:
        parser.error("--times must be >= 2")
    lines = ["t,mean_analytic,var_analytic"]
    if args.given == "th-table":
        thetas = (np.arange(n) + 1.0) / (n + 1.0)
        lines = ["theta,mean_analytic,var_analytic"]
        for th in thetas:
            mp = moments.b1_moments_given_theta(float(th))
            lines.append(f"{_fmt(th)},{_fmt(mp.mean)},{_fmt(mp.variance)}")
    else:
        times = np.linspace(0.0, 1.0, n)
        if args.given == "a":
            if args.theta is None:
                parser.error("--given a requires --theta")
            curve = moments.curve_given_theta(times, args.theta)
        elif args.given == "ah":
            if args.theta is None or args.high is None:
                parser.error("--given ah requires --theta and --high")
            curve = moments.curve_given_theta_h(times, args.theta, args.high)
        else:  # cah
            if args.theta is None or args.high is None or args.close is None:
                parser.error("--given cah requires --theta, --high and --close")
            curve = moments.curve_given_c_theta_h(
                times, ExtremaTriple(args.theta, args.high, args.close)
            )
        for t, m, v in zip(curve.times, curve.means, curve.variances):
            lines.append(f"{_fmt(t)},{_fmt(m)},{_fmt(v)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        FsPath(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# simulate

def _run(args, dims, parser, n_groups: int = 1):
    targets = None
    if args.close_targets is not None:
        if "close" not in dims:
            parser.error("--close-targets requires close in --given")
        targets = tuple(float(x) for x in args.close_targets.split(","))
    config = SimulationConfig(
        n_sim=args.sims,
        n_steps=args.steps,
        seed=args.seed,
        n_bins=args.bins,
        dimensions=dims,
        close_targets=targets,
        n_groups=n_groups,
    )
    return estimator.run_simulation(config, threads=_threads())


def _bins_csv(result, dims) -> str:
    fn = _analytic_curve_fn(dims)
    lines = [
        "bin_id,close,argmax,high,low,n_paths,t,mean_sim,var_sim,mean_analytic,var_analytic"
    ]
    for rec in result.records(min_count=2):
        if fn is not None:
            am, av = fn(rec.params, rec.curve.times)
        else:
            am = av = None
        for j, t in enumerate(rec.curve.times):
            lines.append(
                ",".join(
                    [
                        rec.key,
                        _fmt(rec.params["close"]),
                        _fmt(rec.params["argmax"]),
                        _fmt(rec.params["high"]),
                        _fmt(rec.params["low"]),
                        str(rec.count),
                        _fmt(t),
                        _fmt(rec.curve.means[j]),
                        _fmt(rec.curve.variances[j]),
                        _fmt(am[j]) if am is not None else "",
                        _fmt(av[j]) if av is not None else "",
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def _write_manifest(out_dir: FsPath, args, dims, outputs: list[FsPath], wall: float) -> FsPath:
    digest = hashlib.sha256()
    for f in outputs:
        digest.update(f.read_bytes())
    lines = [
        f"sims={args.sims}",
        f"steps={args.steps}",
        f"bins={args.bins}",
        f"seed={args.seed}",
        f"given={''.join(d[0] for d in dims)}",
        f"close_targets={args.close_targets or ''}",
        f"content_sha256={digest.hexdigest()}",
        f"wall_time_s={wall:.3f}",
        f"outputs={','.join(f.name for f in outputs)}",
    ]
    path = out_dir / "run.manifest"
    path.write_text("\n".join(lines) + "\n")
    return path


def _cmd_simulate(args, parser) -> int:
    dims = _parse_given(parser, args.given)
    t0 = time.time()
    result = _run(args, dims, parser)
    out_dir = FsPath(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "bins.csv"
    csv_path.write_text(_bins_csv(result, dims))
    _write_manifest(out_dir, args, dims, [csv_path], time.time() - t0)
    return 0


# ---------------------------------------------------------------------------
# worst fit

def _cmd_worst_fit(args, parser) -> int:
    dims = _parse_given(parser, args.given)
    fn = _analytic_curve_fn(dims)
    if fn is None and not args.self_check:
        parser.error(f"no analytic curves for --given {args.given}; use --self-check")
    marks = tuple(float(x) for x in args.quantiles.split(","))
    t0 = time.time()
    result = _run(args, dims, parser)
    records = result.records(min_count=2)
    if args.self_check:
        lookup = {tuple(sorted(r.params.items())): r.curve for r in records}

        def fn(params, times):  # noqa: F811 - self-comparison mode
            curve = lookup[tuple(sorted(params.items()))]
            return curve.means, curve.variances

    report = estimator.mse_rank(records, fn, marks, min_count=args.min_count)

    out_dir = FsPath(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["metric,quantile_pct,bin_id,close,argmax,high,low,mse"]
    for metric, sel in (("mean", report.selected_mean), ("var", report.selected_var)):
        for mark in marks:
            r = sel[mark]
            lines.append(
                ",".join(
                    [
                        metric,
                        _fmt(mark),
                        r.key,
                        _fmt(r.params["close"]),
                        _fmt(r.params["argmax"]),
                        _fmt(r.params["high"]),
                        _fmt(r.params["low"]),
                        _fmt(r.mse_mean if metric == "mean" else r.mse_var),
                    ]
                )
            )
    report_path = out_dir / "worst_fit.csv"
    report_path.write_text("\n".join(lines) + "\n")

    rec_by_key = {r.key: r for r in records}
    outputs = [report_path]
    for metric, sel in (("mean", report.selected_mean), ("var", report.selected_var)):
        series = []
        for i, mark in enumerate(marks):
            r = sel[mark]
            rec = rec_by_key[r.key]
            sim = rec.curve.means if metric == "mean" else rec.curve.variances
            am, av = fn(r.params, rec.curve.times)
            ana = am if metric == "mean" else av
            color = _MARK_COLORS.get(mark, _FALLBACK_COLORS[i % len(_FALLBACK_COLORS)])
            series.append(svg.Series(rec.curve.times, sim, color, markers=True))
            series.append(svg.Series(rec.curve.times, ana, color, markers=False))
        path = out_dir / f"worst_fit_{metric}.svg"
        path.write_text(svg.render_line_chart(series))
        outputs.append(path)
    _write_manifest(out_dir, args, dims, outputs, time.time() - t0)
    return 0


# ---------------------------------------------------------------------------
# table

_TABLE_ROWS = (
    ("Start point only", ()),
    ("Close", ("close",)),
    ("High", ("high",)),
    ("ArgMax", ("argmax",)),
    ("Close, High", ("close", "high")),
    ("Close, ArgMax", ("close", "argmax")),
    ("ArgMax, High", ("argmax", "high")),
    ("Close, High, ArgMax", ("close", "argmax", "high")),
    ("Close, High, Low", ("close", "high", "low")),
)


def table_values(sims: int, steps: int, bins: int, seed: int, threads: int = 1):
    """Time-averaged conditional variance per conditioning set."""
    values = {}
    for label, dims in _TABLE_ROWS:
        targets = estimator.default_close_targets(bins) if "close" in dims else None
        config = SimulationConfig(
            n_sim=sims,
            n_steps=steps,
            seed=seed,
            n_bins=bins,
            dimensions=dims,
            close_targets=targets,
        )
        result = estimator.run_simulation(config, threads=threads)
        values[label] = estimator.time_avg_variance(result)
    return values


def _cmd_table(args, parser) -> int:
    values = table_values(args.sims, args.steps, args.bins, args.seed, _threads())
    width = max(len(k) for k in values)
    sys.stdout.write(f"{'Givens':<{width}}  {'Var':>10}  {'Var*6':>10}\n")
    for label, _ in _TABLE_ROWS:
        v = values[label]
        sys.stdout.write(f"{label:<{width}}  {v:>10.5f}  {6 * v:>10.5f}\n")
    return 0


# ---------------------------------------------------------------------------

def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sims", type=int, default=200_000)
    p.add_argument("--steps", type=int, default=512)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmcond",
        description="Conditioned Brownian motion: analytic curves and Monte Carlo validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="evaluate analytic moment curves as CSV")
    p.add_argument("--given", required=True, choices=["a", "ah", "cah", "th-table"])
    p.add_argument("--theta", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--close", type=float)
    p.add_argument("--times", type=int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("simulate", help="simulate, bin, and dump per-bin curves")
    _add_sim_flags(p)
    p.add_argument("--given", required=True)
    p.add_argument("--close-targets", dest="close_targets")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("worst-fit", help="rank bins by MSE against the analytic curves")
    _add_sim_flags(p)
    p.add_argument("--given", default="cah")
    p.add_argument("--close-targets", dest="close_targets")
    p.add_argument("--quantiles", default="5,2,1,0.2")
    p.add_argument("--min-count", type=int, default=estimator.DEFAULT_MIN_COUNT)
    p.add_argument("--self-check", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_worst_fit)

    p = sub.add_parser("table", help="time-averaged variance per conditioning set")
    _add_sim_flags(p)
    p.set_defaults(func=_cmd_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DomainError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
