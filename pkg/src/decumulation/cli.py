"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 ingestion failure, 4 validation failure,
5 reproduction outside tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

from . import reproduce as rp
from .backtest import (
    DEBT_MODES,
    FIXED_DEBT,
    PortfolioSpec,
    RetirementPlan,
    cohort_grid,
    run_cohorts,
    summarize,
    write_report_json,
    write_trajectories_csv,
)
from .errors import IngestError, ModelError
from .ingest import DataStore, PriceSeries, load_monthly_csv, returns_from_prices
from .leverage import FREE, LeverageQuote, levered_gamma, optimal_leverage_costly, optimal_leverage_free
from .model import (
    PERPETUAL,
    annualized_withdrawal_rate,
    expected_w_over_c,
    gamma2,
    gamma4,
    longevity_haircut,
    withdrawal_rate,
)
from .series import MomentSummary, MonthIndex, MonthlyReturnSeries, blend, compute_moments

EXIT_OK = 0
EXIT_INGEST = 3
EXIT_VALIDATION = 4
EXIT_TOLERANCE = 5

log = logging.getLogger("decumulation")


def _horizon(text: str):
    if str(text).lower() in ("inf", "perpetual", "infinite"):
        return PERPETUAL
    return int(text)


def _weights(text: str) -> dict:
    out = {}
    for part in text.split(","):
        name, _, w = part.partition("=")
        if not w:
            raise argparse.ArgumentTypeError(f"expected asset=weight, got {part!r}")
        out[name.strip()] = float(w)
    return out


def _month(text: str) -> MonthIndex:
    try:
        return MonthIndex.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise IngestError(f"expected a boolean, got {text!r}")


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use option names."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise IngestError(f"{path}:{lineno}: expected key = value")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


# ---------------------------------------------------------------- output


def emit(rows: list[dict], fmt: str, output: Optional[str]) -> None:
    if fmt == "json":
        text = json.dumps(rows, indent=2, default=_jsonable) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    else:
        text = _table(rows)
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(x):
    return str(x)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _table(rows: list[dict]) -> str:
    cols = list(rows[0])
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _clean(v):
    if isinstance(v, float) and math.isinf(v):
        return None
    return v


# --------------------------------------------------------------- inputs


def _store(args) -> DataStore:
    return DataStore(args.data_dir) if args.data_dir else DataStore()


def _named_series(store: DataStore, name: str) -> MonthlyReturnSeries:
    key = name.lower()
    if key in ("stocks", "shiller_sp", "sp"):
        return store.stocks()
    if key in ("bonds", "shiller_gs10", "gs10"):
        return store.bonds()
    if name.upper() in rp.ETF_SYMBOLS:
        return store.etf(name.upper())
    raise ModelError(f"unknown series {name!r}")


def _window(series: MonthlyReturnSeries, args) -> MonthlyReturnSeries:
    return series.window(getattr(args, "start", None), getattr(args, "end", None))


def _portfolio_series(args, store: DataStore) -> MonthlyReturnSeries:
    weights = args.portfolio
    names = list(weights)
    series = [_named_series(store, n) for n in names]
    port = blend(series, [weights[n] for n in names], label=",".join(f"{n}={weights[n]:g}" for n in names))
    return _window(port, args)


def _file_series(args) -> list[MonthlyReturnSeries]:
    out = []
    for path in args.returns_file or []:
        tab = load_monthly_csv(path, ("return",))
        start, (r,) = tab.span("return")
        out.append(MonthlyReturnSeries(Path(path).stem, start, r))
    for path in args.prices_file or []:
        tab = load_monthly_csv(path, ("adjusted_close",))
        start, (p,) = tab.span("adjusted_close")
        out.append(returns_from_prices(PriceSeries(Path(path).stem, start, p)))
    return out


def _moments_from_args(args, store_factory) -> MomentSummary:
    if args.mean is not None:
        if args.variance is None:
            raise ModelError("--mean needs --variance")
        return MomentSummary(args.mean, args.variance, args.skewness, args.kurtosis)
    if args.portfolio:
        return compute_moments(_portfolio_series(args, store_factory()))
    files = _file_series(args)
    if files:
        return compute_moments(_window(files[0], args))
    raise ModelError("give --mean/--variance, --portfolio, or a series file")


def _cost_series(args, store: DataStore) -> Optional[MonthlyReturnSeries]:
    if args.cost == "none":
        return None
    return store.cost(args.cost, spread_bp=args.spread_bp)


def _quote(args, store_factory) -> LeverageQuote:
    if args.cost_mean is not None:
        return LeverageQuote(args.cost_mean, args.cost_var or 0.0)
    if args.cost == "none":
        return FREE
    q = _cost_series(args, store_factory())
    return LeverageQuote.from_series(_window(q, args))


# -------------------------------------------------------------- commands


def cmd_moments(args) -> int:
    series = _file_series(args)
    names = args.series
    if not series and not names:
        names = ["shiller_sp", "shiller_gs10", *rp.ETF_SYMBOLS]
    if names:
        store = _store(args)
        series += [_named_series(store, n) for n in names]
    rows = [rp.moment_row(s.label, _window(s, args), args.s) for s in series]
    emit(rows, args.format, args.output)
    return EXIT_OK


def cmd_plan(args) -> int:
    t = _horizon(args.t)
    if args.gamma is not None:
        g = float(args.gamma)
        m = None
    else:
        m = _moments_from_args(args, lambda: _store(args))
        g = (gamma4(m, args.s) if args.order == 4 else gamma2(m, args.s)).value
    cw = withdrawal_rate(g, t)
    row = {
        "gamma": g,
        "cw": cw,
        "awr": annualized_withdrawal_rate(cw, args.s),
        "expected_w_over_c": expected_w_over_c(g, t),
        "longevity_haircut": longevity_haircut(g, t),
        "t": str(t) if t is PERPETUAL else t,
        "s": args.s,
    }
    if m is not None:
        row = {"mean": m.mean, "variance": m.variance, **row}
    emit([row], args.format, args.output)
    return EXIT_OK


def cmd_leverage(args) -> int:
    m = _moments_from_args(args, lambda: _store(args))
    quote = _quote(args, lambda: _store(args))
    if quote.mean_cost == 0 and quote.var_cost == 0:
        l = optimal_leverage_free(m)
    else:
        l = optimal_leverage_costly(m, quote)
    g = levered_gamma(m, args.s, l, quote)
    cw = withdrawal_rate(g, int(args.t))
    emit(
        [{
            "mean": m.mean,
            "variance": m.variance,
            "cost_mean": quote.mean_cost,
            "cost_var": quote.var_cost,
            "l": l,
            "gamma": g.value,
            "cw": cw,
            "awr": annualized_withdrawal_rate(cw, args.s),
        }],
        args.format,
        args.output,
    )
    return EXIT_OK


def cmd_backtest(args) -> int:
    store = _store(args)
    weights = args.portfolio or {"stocks": 0.6, "bonds": 0.4}
    assets = {name: _named_series(store, name) for name in weights}
    cost = _cost_series(args, store) if args.leverage != 1 else None
    if args.leverage != 1 and cost is None:
        raise ModelError("--leverage other than 1 needs --cost tbill|effr")
    spec = PortfolioSpec(weights, args.leverage, cost, args.debt_mode)
    t = int(args.t)
    cw = args.cw
    if cw is None:
        port = spec.portfolio_returns(assets)
        m = compute_moments(port)
        g = gamma2(m, args.s) if args.leverage == 1 else levered_gamma(
            m, args.s, args.leverage, LeverageQuote.from_series(cost)
        )
        cw = withdrawal_rate(g, t)
    levered = args.leverage != 1
    first = args.first or (rp.LEVERED_GRID if levered else rp.UNLEVERED_GRID)[0]
    last = args.last or (rp.LEVERED_GRID if levered else rp.UNLEVERED_GRID)[1]
    label = f"{','.join(f'{k}={v:g}' for k, v in weights.items())} l={args.leverage:g} c/W={cw:.5f}"
    report = run_cohorts(
        spec, RetirementPlan(cw, args.s, t), cohort_grid(first, last, args.step), assets,
        workers=args.workers, label=label,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out / "report.json")
    write_trajectories_csv(report, out / "trajectories.csv")
    if args.svg:
        from .plotting import write_equity_svg

        write_equity_svg([rp.Panel("", "", args.leverage, cw, report)], out / "equity.svg", ncols=1)
    print(summarize(report, "json" if args.format == "json" else "text"))
    return EXIT_OK


def _write_checks(results, path) -> None:
    payload = [
        {"id": r.id, "kind": r.kind, "computed": _clean(r.computed), "expected": r.expected,
         "tol": r.tol, "passed": r.passed}
        for r in results
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _write_rows(rows, stem: Path) -> None:
    rows = [{k: _clean(v) for k, v in r.items()} for r in rows]
    stem.with_suffix(".json").write_text(json.dumps(rows, indent=2) + "\n")
    with stem.with_suffix(".csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_reproduce(args) -> int:
    store = _store(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    targets = ["table1", "table2", "figure1"] if args.target == "all" else [args.target]
    failed = False
    for target in targets:
        if target == "table1":
            rows, cells = rp.build_table1(store, args.s)
            _write_rows(rows, out / "table1")
        elif target == "table2":
            rows, cells = rp.build_table2(store, args.s, int(args.t))
            _write_rows(rows, out / "table2")
        else:
            panels, cells = rp.build_figure1(store, args.s, int(args.t), workers=args.workers)
            fig_dir = out / "figure1"
            fig_dir.mkdir(exist_ok=True)
            summary = []
            for p in panels:
                stem = f"{p.portfolio.replace('/', '_')}_{p.column}"
                write_trajectories_csv(p.report, fig_dir / f"{stem}_trajectories.csv")
                write_report_json(p.report, fig_dir / f"{stem}_report.json")
                summary.append({"panel": stem, **{k: _clean(v) for k, v in p.report.to_dict(False).items()}})
            (fig_dir / "panels.json").write_text(json.dumps(summary, indent=2) + "\n")
            if args.svg:
                from .plotting import write_equity_svg

                write_equity_svg(panels, fig_dir / "figure1.svg")
        results = rp.judge(cells, rp.load_manifest(target))
        _write_checks(results, out / f"{target}_checks.json")
        print(f"== {target}")
        for r in results:
            print(r.line())
        failed |= any(r.passed is False for r in results)
    return EXIT_TOLERANCE if failed else EXIT_OK


def cmd_pin_data(args) -> int:
    files = _store(args).pin()
    for name, digest in files.items():
        print(f"{digest}  {name}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--data-dir", help="data root (default $DECUMULATION_DATA or ./data)")
    common.add_argument("--format", choices=["table", "csv", "json"], default="table")
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--s", type=float, default=rp.S_DEFAULT, help="monthly consumption growth")
    common.add_argument("--t", default=str(rp.T_DEFAULT), help="horizon in periods, or 'perpetual'")
    common.add_argument("--start", type=_month, help="first month of the estimation window")
    common.add_argument("--end", type=_month, help="last month of the estimation window")

    moments_in = argparse.ArgumentParser(add_help=False)
    moments_in.add_argument("--mean", type=float)
    moments_in.add_argument("--variance", type=float)
    moments_in.add_argument("--skewness", type=float)
    moments_in.add_argument("--kurtosis", type=float)
    moments_in.add_argument("--portfolio", type=_weights, help="e.g. stocks=0.6,bonds=0.4")

    files_in = argparse.ArgumentParser(add_help=False)
    files_in.add_argument("--returns-file", action="append", help="CSV with date, return")
    files_in.add_argument("--prices-file", action="append", help="CSV with date, adjusted_close")

    cost_in = argparse.ArgumentParser(add_help=False)
    cost_in.add_argument("--cost", choices=["none", "tbill", "effr"], default="tbill")
    cost_in.add_argument("--spread-bp", type=float, default=0.0, help="annual spread over the rate")

    p = argparse.ArgumentParser(prog="decumulation", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("moments", parents=[common, files_in], help="moment table per series")
    sp.add_argument("--series", action="append", help="stocks, bonds, or an ETF symbol")
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("plan", parents=[common, moments_in, files_in], help="c/W, AWR, E[W/c]")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--order", type=int, choices=[2, 4], default=2)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("leverage", parents=[common, moments_in, files_in, cost_in], help="optimal leverage")
    sp.add_argument("--cost-mean", type=float, help="explicit E[q] per month")
    sp.add_argument("--cost-var", type=float, help="explicit Var[q] per month")
    sp.set_defaults(func=cmd_leverage)

    sp = sub.add_parser("backtest", parents=[common, cost_in], help="historical cohorts")
    sp.add_argument("--portfolio", type=_weights)
    sp.add_argument("--leverage", type=float, default=1.0)
    sp.add_argument("--cw", type=float, help="first-month withdrawal rate (default: from gamma)")
    sp.add_argument("--first", type=_month, help="first cohort start")
    sp.add_argument("--last", type=_month, help="last cohort start")
    sp.add_argument("--step", type=int, default=12)
    sp.add_argument("--debt-mode", choices=DEBT_MODES, default=FIXED_DEBT)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir", default="backtest_out")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("reproduce", parents=[common], help="rebuild published tables")
    sp.add_argument("target", choices=["table1", "table2", "figure1", "all"])
    sp.add_argument("--out-dir", default="reproduce_out")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("pin-data", parents=[common], help="record data digests in MANIFEST.json")
    sp.set_defaults(func=cmd_pin_data)
    return p


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            raise IngestError(f"{args.config}: unknown keys {unknown}")
        defaults = {}
        for key, value in cfg.items():
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = _boolean(value)
            else:
                conv = action.type or (lambda x: x)
                defaults[key] = conv(value)
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except IngestError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (ModelError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
