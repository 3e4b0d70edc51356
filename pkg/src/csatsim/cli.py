"""Command-line entry point: run presets, print the analytic table, validate saved runs."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import analytic
from .metrics import SUMMARY_COLUMNS, MalformedTrace, summarize, summary_csv
from .params import DUTY_50_SHORT, DUTY_80, DUTY_95, DutyCycle, ParameterError
from .presets import CASES, PRESETS, resolve
from .scenario import Scenario
from .simcore import ConfigurationError, run
from .trace import TraceLog
from .validation import mann_whitney_greater, median

log = logging.getLogger("csatsim")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING = 4

CASE_SEEDS = 20
VALIDATION_SEEDS = 1000


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _setup_logging():
    level = os.environ.get("CSATSIM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# -- run -------------------------------------------------------------------------

def _simulate(args):
    scenario, k = args
    trace = run(scenario)
    m = summarize(trace, k, scenario.phy.beacon_interval_us)
    return trace.to_csv(), m.summary_row(scenario.name, scenario.seed)


def _load_scenario(ns) -> Scenario:
    if ns.config:
        try:
            text = Path(ns.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
        try:
            s = Scenario.from_json(text)
        except (ValueError, TypeError, KeyError) as exc:
            raise CliError(f"unparseable config {ns.config}: {exc}", EXIT_CONFIG) from exc
    else:
        try:
            s = resolve(ns.preset)
        except KeyError as exc:
            raise CliError(str(exc.args[0]), EXIT_CONFIG) from None
    overrides = {}
    if ns.duration_s is not None:
        overrides["duration_us"] = int(round(ns.duration_s * 1e6))
    if ns.probe_rate is not None:
        overrides["probe_rate_per_s"] = ns.probe_rate
    s = replace(s, **overrides)
    try:
        s.validate()
    except ValueError as exc:
        raise CliError(f"invalid scenario: {exc}", EXIT_CONFIG) from exc
    return s


def _aggregate(rows) -> dict:
    def col(name):
        i = SUMMARY_COLUMNS.index(name)
        return [float(r[i]) for r in rows if r[i] != "" and not math.isnan(float(r[i]))]
    out = {"runs": len(rows)}
    for name in ("reception_frac", "delay_to_k_us", "scale_back_us"):
        v = col(name)
        out[f"median_{name}"] = median(v) if v else ""
        out[f"mean_{name}"] = sum(v) / len(v) if v else ""
        out[f"n_{name}"] = len(v)
    return out


def cmd_run(ns) -> int:
    base = _load_scenario(ns)
    n = ns.seeds
    if n is None:
        n = VALIDATION_SEEDS if base.name.startswith("beacon_") else CASE_SEEDS
    seeds = list(range(ns.seed_start, ns.seed_start + n))
    out = Path(ns.out) / base.name
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.json").write_text(base.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}", EXIT_IO) from exc
    jobs = [(replace(base, seed=s), ns.k) for s in seeds]
    workers = ns.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate, jobs))
    else:
        results = [_simulate(j) for j in jobs]
    rows = []
    try:
        for seed, (trace_csv, row) in zip(seeds, results):
            (out / f"trace_seed{seed:04d}.csv").write_text(trace_csv, encoding="utf-8")
            rows.append(row)
            log.info("%s seed %d: reception %s", base.name, seed, row[6])
        (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
        agg = _aggregate(rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", *agg])
        w.writerow([base.name, *agg.values()])
        (out / "aggregate.csv").write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}", EXIT_IO) from exc
    print(f"{base.name}: {len(rows)} runs, median reception {agg['median_reception_frac']}, "
          f"outputs in {out}")
    return 0


# -- analytic ----------------------------------------------------------------------

TABLE3_DUTIES = (DUTY_50_SHORT, DUTY_95, DUTY_80)


def cmd_analytic(ns) -> int:
    if ns.grid == "table3":
        duties = TABLE3_DUTIES
    elif ns.t_on is not None and ns.t_off is not None:
        try:
            duties = (DutyCycle(ns.t_on, ns.t_off),)
        except ParameterError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
    else:
        raise CliError("give --grid table3 or both --t-on and --t-off", EXIT_CONFIG)
    try:
        rows = analytic.table_rows(duties, k=ns.k)
    except analytic.ModelRangeError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    w = csv.DictWriter(sys.stdout, fieldnames=analytic.CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    if ns.grid == "table3":
        for dc, printed in analytic.TABLE3_GRID:
            r = analytic.expected_delay_k_beacons(dc, k=ns.k)
            gap = printed - r.delay_us / 1000
            if abs(gap) > 0.05:
                print(f"note: {dc} computes to {r.delay_us / 1000:.2f} ms; published table lists "
                      f"{printed:.2f} ms (difference {gap:+.2f} ms)", file=sys.stderr)
    return 0


# -- validate ------------------------------------------------------------------------

def _load_runs(root: Path) -> dict:
    runs = {}
    for d in sorted(p for p in root.iterdir() if (p / "scenario.json").is_file()):
        scenario = Scenario.from_json((d / "scenario.json").read_text(encoding="utf-8"))
        metrics = []
        for f in sorted(d.glob("trace_seed*.csv")):
            metrics.append(summarize(TraceLog.from_csv(f), 5, scenario.phy.beacon_interval_us))
        if metrics:
            runs[d.name] = (scenario, metrics)
    return runs


def _line(ok, name, measured, tolerance):
    return f"{'PASS' if ok else 'FAIL'}  {name}: {measured} (target {tolerance})"


def validation_report(runs: dict, k: int = 5) -> list[str]:
    lines = []
    for dc, printed in analytic.TABLE3_GRID:
        r = analytic.expected_delay_k_beacons(dc, k=k)
        lines.append(_line(True, f"analytic delay {dc}", f"{r.delay_us / 1000:.2f} ms",
                           f"closed form; published {printed:.2f} ms"))
    for name, (s, ms) in runs.items():
        if s.probe_rate_per_s > 0 or s.second_ap:
            continue
        if s.lte is None:
            frac = min(m.reception_frac for m in ms)
            lines.append(_line(frac == 1.0, f"{name} empty-channel reception", f"{frac:.4f}", "1.0"))
        elif isinstance(s.lte, DutyCycle):
            attempts = sum(m.beacons_received + m.dropped_overlap_on + m.dropped_collision for m in ms)
            p_hat = sum(m.dropped_overlap_on for m in ms) / attempts
            p_d = analytic.beacon_drop_probability(s.lte)
            bound = 4 * math.sqrt(p_d * (1 - p_d) / attempts)
            lines.append(_line(abs(p_hat - p_d) < bound, f"{name} drop fraction",
                               f"|{p_hat:.6f} - {p_d:.6f}| = {abs(p_hat - p_d):.6f} over {attempts} attempts",
                               f"< 4 sigma = {bound:.6f}"))
            delays = [m.delay_to_k_us for m in ms if m.delay_to_k_us is not None]
            if delays:
                mean = sum(delays) / len(delays)
                model = analytic.expected_delay_k_beacons(s.lte, k=k).delay_us
                rel = abs(mean - model) / model
                lines.append(_line(rel < 0.02, f"{name} mean delay to {k} beacons",
                                   f"{mean / 1000:.2f} ms vs {model / 1000:.2f} ms over {len(delays)} runs",
                                   "within 2%"))
    rec = {c: median([m.reception_frac for m in runs[c][1]]) for c in CASES if c in runs}
    for hi, lo in (("case_a", "case_d"), ("case_e", "case_d"), ("case_f", "case_g")):
        if hi in rec and lo in rec:
            lines.append(_line(rec[hi] > rec[lo], f"median reception {hi} > {lo}",
                               f"{rec[hi]:.4f} vs {rec[lo]:.4f}", "strictly greater"))
    trio = [c for c in ("case_b", "case_c", "case_e") if c in rec]
    if len(trio) == 3:
        spread = max(rec[c] for c in trio) - min(rec[c] for c in trio)
        lines.append(_line(spread <= 0.05, "median reception B, C, E agree", f"spread {spread:.4f}", "<= 0.05"))
    if "case_d" in rec:
        lines.append(_line(0.55 <= rec["case_d"] <= 0.80, "case_d median reception",
                           f"{rec['case_d']:.4f}", "[0.55, 0.80]"))
    if "case_f" in runs and "case_g" in runs:
        f = [m.scale_back_time_us for m in runs["case_f"][1] if m.scale_back_time_us is not None]
        g = [m.scale_back_time_us for m in runs["case_g"][1] if m.scale_back_time_us is not None]
        if f and g:
            p = mann_whitney_greater(g, f)
            lines.append(_line(p < 0.05, "scale-back case_g > case_f",
                               f"medians {median(g) / 1e6:.3f} s vs {median(f) / 1e6:.3f} s, "
                               f"Mann-Whitney p = {p:.4f}", "p < 0.05"))
    return lines


def cmd_validate(ns) -> int:
    root = Path(ns.out)
    if not root.is_dir():
        raise CliError(f"no such output directory: {root}", EXIT_MISSING)
    try:
        runs = _load_runs(root)
    except (OSError, ValueError, MalformedTrace) as exc:
        raise CliError(f"cannot read runs under {root}: {exc}", EXIT_IO) from exc
    if not runs:
        raise CliError(f"no completed runs under {root}; use 'run' first", EXIT_MISSING)
    lines = validation_report(runs)
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    try:
        (root / "validation_report.txt").write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_IO) from exc
    return 0


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csatsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a preset or config over a batch of seeds")
    r.add_argument("preset", nargs="?", choices=PRESETS, help="named scenario")
    r.add_argument("--config", help="scenario JSON file (instead of a preset)")
    r.add_argument("--seeds", type=int,
                   help="number of seeds (default 20; 1000 for the beacon_* validation presets)")
    r.add_argument("--seed-start", type=int, default=0)
    r.add_argument("--duration-s", type=float)
    r.add_argument("--probe-rate", type=float)
    r.add_argument("--k", type=int, default=5, help="beacons needed for delay-to-k")
    r.add_argument("--out", default="runs")
    r.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analytic", help="closed-form drop probability and expected delay")
    a.add_argument("--k", type=int, default=5)
    a.add_argument("--t-on", type=int)
    a.add_argument("--t-off", type=int)
    a.add_argument("--grid", choices=("table3",))
    a.set_defaults(func=cmd_analytic)

    v = sub.add_parser("validate", help="check saved runs against the acceptance targets")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "run" and bool(ns.preset) == bool(ns.config):
        parser.error("run needs exactly one of PRESET or --config")
    if getattr(ns, "seeds", None) is not None and ns.seeds < 1:
        parser.error("--seeds must be >= 1")
    if getattr(ns, "k", 1) < 1:
        parser.error("--k must be >= 1")
    try:
        return ns.func(ns)
    except (CliError, ConfigurationError) as exc:
        print(f"csatsim: error: {exc}", file=sys.stderr)
        return getattr(exc, "code", EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
