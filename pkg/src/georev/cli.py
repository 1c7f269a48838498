"""Command-line front end.

    georev analyze  --config model.yaml
    georev simulate --config model.yaml --samples 1000000 --format csv
    georev verify   --config model.yaml --seed 7 --format json --out report.json
    georev sweep    --config powerlaw.yaml --param-range 1.1:5:0.01

Exit codes: 0 success (vacuous or rejected checks included), 1 some bound was
Violated, 2 usage or config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .analytics import (
    concentration_ratio,
    expectation,
    geometric_expectation,
    monopoly_price,
    random_reserve_revenue,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    default_sweep_param,
    load_config,
    sweep_values,
    with_base_param,
)
from .distributions import JointValuationModel, Replicated, max_distribution
from .mechanisms import (
    Fixed,
    PostedPrice,
    RandomFromMax,
    SecondPriceReplicated,
    SecondPriceReserve,
    estimate_revenue,
)
from .verification import VIOLATED, BoundReport, run_checks

SCHEMA_VERSION = 1
E_OVER_4 = math.e / 4.0

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

ANALYZE_COLUMNS = [
    "model",
    "n",
    "mode",
    "expectation",
    "geometric_expectation",
    "concentration_ratio",
    "monopoly_price",
    "monopoly_revenue",
    "monopoly_attained",
    "random_reserve_revenue",
    "geo_over_e",
    "c_over_e_times_expectation",
]
SWEEP_COLUMNS = ["param", "value"] + ANALYZE_COLUMNS + ["ratio_ge_e_over_4"]
SIMULATE_COLUMNS = [
    "mechanism",
    "revenue",
    "std_err",
    "ci_low",
    "ci_high",
    "welfare",
    "samples",
    "seed",
    "original_block_revenue",
    "replica_block_revenue",
]
VERIFY_COLUMNS = [
    "bound_id",
    "verdict",
    "lhs",
    "lhs_method",
    "lhs_std_err",
    "rhs",
    "rhs_method",
    "rhs_std_err",
    "margin",
    "note",
]


# ---------------------------------------------------------------------------
# row builders


def analyze_model(
    model: JointValuationModel, mode: str = "auto", samples: Optional[int] = None, seed: int = 0, workers: int = 1
) -> Dict[str, Any]:
    md = max_distribution(model, samples=samples, seed=seed, mode=mode, workers=workers)
    e = expectation(md)
    g = geometric_expectation(md)
    c = concentration_ratio(md)
    mono = monopoly_price(md)
    rr = random_reserve_revenue(md)
    return {
        "model": model.describe(),
        "n": model.n,
        "mode": md.mode,
        "expectation": e.value,
        "geometric_expectation": g.value,
        "concentration_ratio": c.value,
        "monopoly_price": mono.price,
        "monopoly_revenue": mono.revenue,
        "monopoly_attained": mono.attained,
        "random_reserve_revenue": rr.value,
        "geo_over_e": g.value / math.e,
        "c_over_e_times_expectation": c.value * e.value / math.e if math.isfinite(e.value) else 0.0,
    }


def simulate_model(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    model = cfg.model
    inner = model.inner if isinstance(model, Replicated) else model
    md = max_distribution(inner, samples=cfg.samples, seed=cfg.seed, mode=cfg.mode, workers=cfg.workers)
    mechs = [PostedPrice(RandomFromMax()), SecondPriceReserve(RandomFromMax())]
    if cfg.price is not None:
        mechs += [PostedPrice(Fixed(cfg.price)), SecondPriceReserve(Fixed(cfg.price))]
    rows = []
    for mech in mechs:
        est = estimate_revenue(mech, inner, cfg.samples, cfg.seed, cfg.workers, maxdist=md)
        rows.append(_estimate_row(est))
    rep = model if isinstance(model, Replicated) else Replicated(model)
    est = estimate_revenue(SecondPriceReplicated(), rep, cfg.samples, cfg.seed, cfg.workers)
    rows.append(_estimate_row(est))
    return rows


def _estimate_row(est) -> Dict[str, Any]:
    return {
        "mechanism": est.mechanism,
        "revenue": est.mean,
        "std_err": est.std_err,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "welfare": est.welfare,
        "samples": est.samples,
        "seed": est.seed,
        "original_block_revenue": est.original_block[0] if est.original_block else None,
        "replica_block_revenue": est.replica_block[0] if est.replica_block else None,
    }


def _verify_row(r: BoundReport) -> Dict[str, Any]:
    return {
        "bound_id": r.bound_id,
        "verdict": r.verdict,
        "lhs": r.lhs.value if r.lhs else None,
        "lhs_method": r.lhs.method if r.lhs else None,
        "lhs_std_err": r.lhs.std_err if r.lhs else None,
        "rhs": r.rhs.value if r.rhs else None,
        "rhs_method": r.rhs.method if r.rhs else None,
        "rhs_std_err": r.rhs.std_err if r.rhs else None,
        "margin": r.margin,
        "note": r.note,
    }


def sweep_model(cfg: ExperimentConfig, param: Optional[str] = None, values: Optional[Sequence[float]] = None):
    """One analyze row per parameter value plus the first e/4 crossing of the ratio.

    The crossing is refined by bisection on the concentration ratio between the
    last row below e/4 and the first row at or above it.
    """
    param = param or cfg.sweep_param or default_sweep_param(cfg)
    if values is None:
        if cfg.sweep_range is None:
            raise ConfigError("sweep needs --param-range LO:HI:STEP or sweep.range", path="sweep.range")
        values = sweep_values(*cfg.sweep_range)
    models = [with_base_param(cfg, param, v) for v in values]

    def row(i):
        r = analyze_model(models[i], cfg.mode, cfg.samples, cfg.seed)
        return {"param": param, "value": values[i], **r, "ratio_ge_e_over_4": r["concentration_ratio"] >= E_OVER_4}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(row, range(len(values))))
    else:
        rows = [row(i) for i in range(len(values))]

    crossing = None
    for i, r in enumerate(rows):
        if r["ratio_ge_e_over_4"]:
            if i == 0:
                crossing = values[0]
            else:
                crossing = _bisect_crossing(cfg, param, values[i - 1], values[i])
            break
    return rows, crossing


def _bisect_crossing(cfg: ExperimentConfig, param: str, lo: float, hi: float, tol: float = 1e-10) -> float:
    def ratio(v):
        return concentration_ratio(max_distribution(with_base_param(cfg, param, v))).value

    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if ratio(mid) >= E_OVER_4:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# formatting


def fmt_number(x):
    """10 significant digits; non-finite floats become strings."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.10g}")


def normalize(obj):
    if isinstance(obj, dict):
        return {k: normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    return fmt_number(obj)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}" if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def _table_cell(v) -> str:
    if isinstance(v, float):
        if not math.isfinite(v):
            return _csv_cell(v)
        return f"{v:.4f}" if abs(v) < 1e6 else f"{v:.4g}"
    return _csv_cell(v)


def render(rows: List[Dict[str, Any]], columns: List[str], fmt: str, payload: Dict[str, Any]) -> str:
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, **payload, "rows": [{c: r.get(c) for c in columns} for r in rows]}
        return json.dumps(normalize(doc), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_csv_cell(r.get(c)) for c in columns])
        return buf.getvalue()
    cells = [[_table_cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _emit(text: str, cfg: ExperimentConfig):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: ExperimentConfig) -> int:
    row = analyze_model(cfg.model, cfg.mode, cfg.samples, cfg.seed, cfg.workers)
    _emit(render([row], ANALYZE_COLUMNS, cfg.format, {"command": "analyze", "config": cfg.echo()}), cfg)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    rows = simulate_model(cfg)
    _emit(render(rows, SIMULATE_COLUMNS, cfg.format, {"command": "simulate", "config": cfg.echo()}), cfg)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    reports = run_checks(cfg.model, cfg.samples, cfg.seed, cfg.checks, cfg.workers, cfg.mode, cfg.tolerance)
    violations = sum(r.verdict == VIOLATED for r in reports)
    payload = {
        "command": "verify",
        "config": cfg.echo(),
        "violations": violations,
        "reports": [r.to_dict() for r in reports],
    }
    _emit(render([_verify_row(r) for r in reports], VERIFY_COLUMNS, cfg.format, payload), cfg)
    return EXIT_VIOLATED if violations else EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    rows, crossing = sweep_model(cfg)
    payload = {"command": "sweep", "config": cfg.echo(), "threshold": E_OVER_4, "crossing": crossing}
    _emit(render(rows, SWEEP_COLUMNS, cfg.format, payload), cfg)
    if cfg.format != "json":
        where = "not reached in range" if crossing is None else f"{crossing:.10g}"
        print(f"ratio >= e/4 first at {rows[0]['param'] if rows else 'param'} = {where}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="georev", description="Posted-price and auction revenue vs. geometric expectation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else None)
        p.add_argument("--config", metavar="PATH", help="YAML experiment config")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override a config field, e.g. model.base.m=4")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--format", choices=("table", "csv", "json"))
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--workers", type=int)
        p.add_argument("--mode", choices=("auto", "sampled"))
        if name == "sweep":
            p.add_argument("--param-range", metavar="LO:HI:STEP")
            p.add_argument("--param")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    flags = {
        "seed": args.seed,
        "samples": args.samples,
        "format": args.format,
        "out": args.out,
        "workers": args.workers,
        "mode": args.mode,
        "param_range": getattr(args, "param_range", None),
        "param": getattr(args, "param", None),
    }
    try:
        cfg = load_config(args.config, overrides=args.set, flags=flags)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"georev: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"georev: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
