"""Experiment recipes and CSV comparison against reference data."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import access
from .config import ExperimentSpec
from .coverage import CURVES, THZ, calibrate_absorption, coverage_probability, curve_config
from .linkstack import LinkStack, write_flow_stats
from .propagation import (DEFAULT_ABSORPTION, AbsorptionTable, LinkConfig, snr_db, thz_model,
                          umi_model)
from .scenarios import stack_config
from .transport import CbrFlowConfig, TcpConfig, run_cbr_flow, run_tcp_flow

REFERENCES = {
    "initial-access": "initial_access.csv",
    "coverage": "coverage.csv",
    "e2e-udp": "e2e_udp.csv",
}

# Key columns and value column used when comparing each experiment to its reference.
COMPARE_KEYS = {
    "initial-access": (("technology", "N_ss", "T_ss_s"), "delay_s"),
    "coverage": (("curve_label", "density_bs_per_km2"), "coverage"),
    "e2e-udp": (("technology", "distance_m", "rate_gbps"), "throughput_gbps"),
}

DEFAULT_ANCHORS = {"thz0.43-1024x256": (10.0, 50.0), "thz1.5-1024x256": (100.0, 300.0)}


class SchemaError(ValueError):
    """Produced and reference tables do not share the compared columns."""


# ---------------------------------------------------------------- CSV I/O

def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def unique_path(path: Path) -> Path:
    """``path`` if free, else the first free ``stem-N.suffix``."""
    if not path.exists():
        return path
    n = 1
    while True:
        cand = path.with_name(f"{path.stem}-{n}{path.suffix}")
        if not cand.exists():
            return cand
        n += 1


def write_output(directory: Path, name: str, text: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = unique_path(directory / name)
    path.write_text(text)
    return path


def read_table(source: str | Path) -> list[dict[str, str]]:
    """Read a CSV file, or packaged reference data named ``ref:<experiment>``."""
    source = str(source)
    if source.startswith("ref:"):
        name = source[4:]
        if name not in REFERENCES:
            raise KeyError(f"no reference data for {name!r}; have {sorted(REFERENCES)}")
        text = resources.files("thznet.data").joinpath(REFERENCES[name]).read_text()
    else:
        text = Path(source).read_text()
    return list(csv.DictReader(io.StringIO(text)))


# ------------------------------------------------------------- comparison

@dataclass(frozen=True)
class Tolerance:
    abs: float = 0.0
    rel: float = 0.0
    sigma: float = 0.0  # multiples of the produced row's ``std_error`` column

    def allowed(self, reference: float, std_error: float | None) -> float:
        bound = max(self.abs, self.rel * abs(reference))
        if self.sigma and std_error is not None:
            bound = max(bound, self.sigma * std_error)
        return bound


@dataclass
class RowResult:
    key: tuple[str, ...]
    produced: float
    reference: float
    allowed: float

    @property
    def error(self) -> float:
        return self.produced - self.reference

    @property
    def passed(self) -> bool:
        return abs(self.error) <= self.allowed


@dataclass
class ComparisonReport:
    rows: list[RowResult]
    missing: list[tuple[str, ...]]  # reference keys absent from the produced table

    @property
    def failures(self) -> list[RowResult]:
        return [r for r in self.rows if not r.passed]

    @property
    def passed(self) -> bool:
        return bool(self.rows) and not self.failures

    def format(self) -> str:
        lines = []
        for r in self.rows:
            status = "ok  " if r.passed else "FAIL"
            lines.append(f"{status} {'/'.join(r.key)}: produced={r.produced:.6g} "
                         f"reference={r.reference:.6g} err={r.error:+.3g} allowed={r.allowed:.3g}")
        lines.append(f"{len(self.rows) - len(self.failures)}/{len(self.rows)} rows within tolerance; "
                     f"{len(self.missing)} reference rows not produced")
        return "\n".join(lines)


def _norm_key(value: str) -> str:
    try:
        return repr(float(value))
    except ValueError:
        return value


def compare_to_reference(produced: str | Path | list[dict], reference: str | Path | list[dict],
                         key_columns: Sequence[str], value_column: str,
                         tolerance: Tolerance) -> ComparisonReport:
    """Match rows on ``key_columns`` and check ``value_column`` within tolerance.

    Numeric keys are compared by value, so ``20`` matches ``20.0``.
    """
    prod = produced if isinstance(produced, list) else read_table(produced)
    ref = reference if isinstance(reference, list) else read_table(reference)
    needed = list(key_columns) + [value_column]
    for name, table in (("produced", prod), ("reference", ref)):
        if not table:
            raise SchemaError(f"{name} table is empty")
        absent = [c for c in needed if c not in table[0]]
        if absent:
            raise SchemaError(f"{name} table lacks column(s) {absent}")
    index = {tuple(_norm_key(r[c]) for c in key_columns): r for r in prod}
    rows, missing = [], []
    for r in ref:
        key = tuple(_norm_key(r[c]) for c in key_columns)
        p = index.get(key)
        if p is None:
            missing.append(tuple(r[c] for c in key_columns))
            continue
        se = float(p["std_error"]) if "std_error" in p and p["std_error"] != "" else None
        rv = float(r[value_column])
        rows.append(RowResult(tuple(r[c] for c in key_columns), float(p[value_column]), rv,
                              tolerance.allowed(rv, se)))
    return ComparisonReport(rows, missing)


# ----------------------------------------------------------------- recipes

@dataclass
class ExperimentResult:
    paths: list[Path]
    summary: str
    tables: dict[str, str]


def _absorption(spec: ExperimentSpec) -> AbsorptionTable:
    path = spec.get("propagation", "absorption_file")
    return AbsorptionTable.from_file(path) if path else DEFAULT_ABSORPTION


def linkbudget_table(spec: ExperimentSpec) -> str:
    table = _absorption(spec)
    tx = spec.get("propagation", "tx_power", 0.5)
    nf = spec.get("propagation", "noise_figure", 10.0)
    distances = spec.get("linkbudget", "distances", (5.0, 30.0, 100.0))
    mm_f = spec.get("linkbudget", "mmwave_frequencies_ghz", tuple(float(f) for f in range(10, 101, 5)))
    lo, hi = table.frequencies[0] / 1e9, table.frequencies[-1] / 1e9
    thz_f = spec.get("linkbudget", "thz_frequencies_ghz",
                     tuple(float(f) for f in range(int(math.ceil(lo)), int(hi) + 1, 10)))
    mm_b = spec.get("linkbudget", "mmwave_bandwidth", 400e6)
    thz_b = spec.get("linkbudget", "thz_bandwidth", 50e9)
    rows = []
    los = umi_model(los=True)
    thz = thz_model(table)
    for d in distances:
        for f in mm_f:
            rows.append(("mmwave", f * 1e9, d, snr_db(LinkConfig(f * 1e9, mm_b, tx, nf), d, los)))
        for f in thz_f:
            rows.append(("thz", f * 1e9, d, snr_db(LinkConfig(f * 1e9, thz_b, tx, nf), d, thz)))
    rows.sort(key=lambda r: (r[0], r[2], r[1]))
    return csv_text(("technology", "frequency_hz", "distance_m", "snr_db"), rows)


def initial_access_table(spec: ExperimentSpec) -> str:
    rows = access.scan_delay_grid(
        mmwave_pairs=spec.get("access", "mmwave_pairs", access.MMWAVE_PAIRS),
        thz_pairs=spec.get("access", "thz_pairs", access.THZ_PAIRS),
        per_signal_time=spec.get("access", "per_signal_time", access.T_SIG_DEFAULT),
        fixed_overhead=spec.get("access", "fixed_overhead", access.T_PROC_DEFAULT),
    )
    return csv_text(("technology", "N_ss", "T_ss_s", "delay_s"), rows)


def reference_densities(curve: str) -> list[float]:
    return sorted({float(r["density_bs_per_km2"]) for r in read_table("ref:coverage")
                   if r["curve_label"] == curve})


def coverage_table(spec: ExperimentSpec) -> tuple[str, list[str]]:
    curves = spec.get("coverage", "curves", tuple(sorted(CURVES)))
    trials = spec.trials or spec.get("coverage", "trials", 50_000)
    overrides = dict(trials=trials, rng_seed=spec.seed, absorption=_absorption(spec))
    for key in ("snr_threshold", "region_area", "conditioning", "chunk_size"):
        value = spec.get("coverage", key)
        if value is not None:
            overrides[key] = value
    calibrate = spec.get("coverage", "calibrate", False)
    anchors_cfg = spec.get("coverage", "anchors")
    rows, notes = [], []
    for curve in curves:
        if curve not in CURVES:
            raise KeyError(f"unknown coverage curve {curve!r}; choose from {sorted(CURVES)}")
        densities = spec.get("coverage", "densities") or reference_densities(curve)
        base = curve_config(curve, densities[0], **overrides)
        if calibrate and base.channel == THZ:
            ref = {float(r["density_bs_per_km2"]): float(r["coverage"])
                   for r in read_table("ref:coverage") if r["curve_label"] == curve}
            anchor_d = anchors_cfg or DEFAULT_ANCHORS.get(curve, (densities[0], densities[-1]))
            fit = calibrate_absorption(base, [(d, ref[d]) for d in anchor_d])
            base = replace(base, absorption=base.absorption.with_coefficient(
                base.link.carrier_frequency, fit.k))
            notes.append(f"{curve}: calibrated k = {fit.k:.6g} 1/m at anchors {list(anchor_d)}")
        k = (base.absorption.coefficient(base.link.carrier_frequency)
             if base.channel == THZ else float("nan"))
        for lam in densities:
            est = coverage_probability(replace(base, density=lam), workers=spec.parallel)
            rows.append((curve, float(lam), est.probability, est.std_error, est.trials, k))
    rows.sort(key=lambda r: (r[0], r[1]))
    header = ("curve_label", "density_bs_per_km2", "coverage", "std_error", "trials", "absorption_k")
    return csv_text(header, rows), notes


def _map(fn, jobs: list, parallel: int) -> list:
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _udp_point(job: tuple) -> tuple:
    tech, stack_name, distance, rate, duration, seed, overrides = job
    stack = LinkStack(stack_config(stack_name, distance, **overrides), seed=seed)
    stats = run_cbr_flow(CbrFlowConfig(rate * 1e9), stack, duration,
                         flow_id=f"{tech}-{distance:g}m-{rate:g}gbps")
    return (tech, distance, rate, stats.delivered_bps / 1e9, stats.offered_bps / 1e9,
            stats.dropped_packets, stats.mean_delay_s, stack_name), stats


def _stack_overrides(spec: ExperimentSpec, name: str) -> dict:
    cap = spec.get("linkstack", "queue_capacity")
    if cap is None:
        return {}
    base = stack_config(name)
    return {"mac": replace(base.mac, queue_capacity=cap)}


def e2e_udp_tables(spec: ExperimentSpec) -> tuple[str, str]:
    distances = spec.get("e2e_udp", "distances", (1.0, 5.0, 10.0, 20.0))
    rates = spec.get("e2e_udp", "rates_gbps", (4.0, 6.0, 12.0))
    mm_rate = spec.get("e2e_udp", "mmwave_rate_gbps", 0.6)
    duration = spec.get("e2e_udp", "duration", 1.0)
    thz_stack = spec.get("linkstack", "thz_stack", "thz-rotating")
    mm_stack = spec.get("linkstack", "mmwave_stack", "mmwave-scheduled")
    jobs = []
    for d in distances:
        for r in rates:
            jobs.append(("thz", thz_stack, d, r, duration, spec.seed, _stack_overrides(spec, thz_stack)))
        jobs.append(("mmwave", mm_stack, d, mm_rate, duration, spec.seed,
                     _stack_overrides(spec, mm_stack)))
    results = _map(_udp_point, jobs, spec.parallel)
    rows = sorted((r for r, _ in results), key=lambda r: (r[0], r[1], r[2]))
    header = ("technology", "distance_m", "rate_gbps", "throughput_gbps", "offered_gbps",
              "drops", "mean_delay_s", "stack")
    buf = io.StringIO()
    write_flow_stats([s for _, s in results], buf)
    return csv_text(header, rows), buf.getvalue()


def _tcp_point(job: tuple) -> tuple:
    name, distance, duration, seed, cfg, overrides = job
    stack = LinkStack(stack_config(name, distance, **overrides), seed=seed)
    stats, trace, flow = run_tcp_flow(stack, duration, cfg, flow_id=name)
    return name, stats, list(trace.rows()), flow.timeouts, flow.fast_recoveries


def e2e_tcp_tables(spec: ExperimentSpec) -> tuple[str, str, str]:
    stacks = spec.get("e2e_tcp", "stacks", ("thz-contention", "thz-ideal", "mmwave-scheduled"))
    distance = spec.get("e2e_tcp", "distance", 1.0)
    duration = spec.get("e2e_tcp", "duration", 10.0)
    cfg = TcpConfig(min_rto=spec.get("e2e_tcp", "min_rto", 0.2))
    jobs = []
    for name in stacks:
        overrides = _stack_overrides(spec, name)
        core = spec.get("e2e_tcp", "core_delay")
        if core is not None:
            overrides["core_delay"] = core
        jobs.append((name, distance, duration, spec.seed, cfg, overrides))
    results = sorted(_map(_tcp_point, jobs, spec.parallel), key=lambda r: r[0])
    trace_rows = [(name, t, c, e) for name, _, rows, _, _ in results for t, c, e in rows]
    summary_rows = [(name, s.delivered_bps, to, fr) for name, s, _, to, fr in results]
    buf = io.StringIO()
    write_flow_stats([s for _, s, *_ in results], buf)
    return (csv_text(("stack", "time_s", "cwnd_bytes", "event"), trace_rows),
            csv_text(("stack", "throughput_bps", "timeouts", "fast_recoveries"), summary_rows),
            buf.getvalue())


def run_experiment(spec: ExperimentSpec, write: bool = True) -> ExperimentResult:
    """Run ``spec``; with ``write`` the CSVs go to ``spec.out`` without overwriting."""
    tables: dict[str, str] = {}
    notes: list[str] = []
    if spec.kind == "linkbudget":
        tables["linkbudget.csv"] = linkbudget_table(spec)
    elif spec.kind == "initial-access":
        tables["initial_access.csv"] = initial_access_table(spec)
    elif spec.kind == "coverage":
        tables["coverage.csv"], notes = coverage_table(spec)
    elif spec.kind == "e2e-udp":
        tables["e2e_udp.csv"], tables["e2e_udp_flows.csv"] = e2e_udp_tables(spec)
    elif spec.kind == "e2e-tcp":
        (tables["e2e_tcp_cwnd.csv"], tables["e2e_tcp_summary.csv"],
         tables["e2e_tcp_flows.csv"]) = e2e_tcp_tables(spec)
    paths = [write_output(spec.out, name, text) for name, text in tables.items()] if write else []
    first = next(iter(tables.values()))
    summary = "\n".join(notes + [f"{spec.kind}: {first.count(chr(10)) - 1} rows"]
                        + [f"wrote {p}" for p in paths])
    return ExperimentResult(paths, summary, tables)
