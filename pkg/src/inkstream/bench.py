"""Experiment harness: runtime, accuracy and scalability runs over sampled KBs.

Every run writes deterministic CSV files (values, iteration counts, flags)
and keeps wall-clock measurements in ``timings.json`` and the summary, so
two runs with the same master seed produce byte-identical CSVs.

Configuration is a flat TOML file::

    experiment = "accuracy"            # runtime | accuracy | scalability
    measures = ["hs:10:smooth:0.75:recip", "window:mi:10:max"]
    num_formulas = 200
    num_atoms = 10
    clause_min = 2
    clause_max = 4
    target = "hs:4"                    # optional, required for accuracy/scalability
    trials = 10
    iterations = 600
    per_iteration_timeout = 120.0      # seconds
    probe_cadence = 100
    master_seed = 0
    output_dir = "out"
    sizes = [500, 1000]                # scalability only
    max_passes = 3                     # scalability: iteration cap per KB size
    tolerance = 1.0                    # scalability: convergence band
    workers = 1
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .measures import format_value
from .formula import Signature
from .sampler import SampleSpec, atom_names, sample
from .stream import clear_caches, kb_stream, make_measure, run_stream

log = logging.getLogger(__name__)

EXPERIMENTS = ("runtime", "accuracy", "scalability")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


class ConfigError(ValueError):
    pass


def derive_seed(master: int, *parts) -> int:
    """63-bit seed from the master seed and an identity tuple."""
    h = hashlib.blake2b(repr((master,) + parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass
class ExperimentConfig:
    experiment: str = "runtime"
    measures: list = field(default_factory=lambda: ["hs:10:smooth:0.75:recip"])
    num_formulas: int = 5000
    num_atoms: int = 30
    clause_min: int = 2
    clause_max: int = 4
    target: Optional[str] = None
    trials: int = 100
    iterations: int = 40000
    per_iteration_timeout: Optional[float] = 120.0
    probe_cadence: int = 100
    master_seed: int = 0
    output_dir: str = "bench-out"
    sizes: list = field(default_factory=list)
    max_passes: int = 3
    tolerance: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, not {self.experiment!r}")
        if not self.measures:
            raise ConfigError("at least one measure is required")
        if self.trials < 1 or self.iterations < 1:
            raise ConfigError("trials and iterations must be at least 1")
        if self.probe_cadence < 1:
            raise ConfigError("probe_cadence must be at least 1")
        if self.experiment in ("accuracy", "scalability") and self.target is None:
            raise ConfigError(f"{self.experiment} experiments need a target such as 'hs:4'")
        if self.experiment == "scalability" and not self.sizes:
            raise ConfigError("scalability experiments need a list of sizes")
        if self.target is not None:
            try:
                SampleSpec.parse_target(self.target)
            except ValueError as e:
                raise ConfigError(str(e)) from None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(data)

    def spec(self, num_formulas: int, seed: int) -> SampleSpec:
        target = SampleSpec.parse_target(self.target) if self.target else None
        return SampleSpec(num_formulas, self.num_atoms, (self.clause_min, self.clause_max), seed, target)


# ---------------------------------------------------------------------------
# Single runs (top-level so a process pool can pickle them)


@dataclass(frozen=True)
class Job:
    measure_index: int
    measure: str
    kb_index: int
    num_formulas: int


@dataclass
class JobResult:
    job: Job
    kb_id: str
    seed: int
    rows: list  # (iteration, value, timeout_flag)
    elapsed_micros: int
    iterations_done: int
    aborted: bool
    converged_at: Optional[int] = None


def _kb_for(cfg: ExperimentConfig, kb_index: int, num_formulas: int):
    seed = derive_seed(cfg.master_seed, "kb", num_formulas, kb_index)
    return f"kb{num_formulas}-{kb_index}", sample(cfg.spec(num_formulas, seed))


def _run_job(cfg: ExperimentConfig, job: Job) -> JobResult:
    kb_id, kb = _kb_for(cfg, job.kb_index, job.num_formulas)
    seed = derive_seed(cfg.master_seed, job.num_formulas, job.kb_index, job.measure_index)
    clear_caches()
    m = make_measure(job.measure, kb.signature, seed, time_budget=cfg.per_iteration_timeout)
    until = None
    iterations = cfg.iterations
    if cfg.experiment == "scalability":
        target = SampleSpec.parse_target(cfg.target)[1]
        until = lambda v: abs(v - target) <= cfg.tolerance  # noqa: E731
        iterations = cfg.max_passes * job.num_formulas
    trace = run_stream(m, kb_stream(kb), iterations, cfg.probe_cadence,
                       timeout=cfg.per_iteration_timeout, until=until)
    rows = [(p.iteration, p.value, p.timeout) for p in trace.points]
    return JobResult(
        job, kb_id, seed, rows, trace.elapsed_micros, trace.iterations_done, trace.aborted,
        trace.iterations_done if trace.stopped else None,
    )


def _warm_up(cfg: ExperimentConfig) -> None:
    # one short untimed run per measure so imports and first-call costs stay out of the means
    _, kb = _kb_for(cfg, -1, min(cfg.num_formulas if not cfg.sizes else cfg.sizes[0], 50))
    for spec in cfg.measures:
        m = make_measure(spec, kb.signature, 0, time_budget=cfg.per_iteration_timeout)
        run_stream(m, kb_stream(kb), min(cfg.iterations, 50), timeout=cfg.per_iteration_timeout)


def _jobs(cfg: ExperimentConfig) -> list[Job]:
    sizes = cfg.sizes if cfg.experiment == "scalability" else [cfg.num_formulas]
    return [
        Job(mi, spec, k, size)
        for size in sizes
        for k in range(cfg.trials)
        for mi, spec in enumerate(cfg.measures)
    ]


def _execute(cfg: ExperimentConfig) -> list[JobResult]:
    # validate every measure spec before spending time on runs
    sig = Signature(atom_names(cfg.num_atoms))
    for spec in cfg.measures:
        make_measure(spec, sig, 0)
    jobs = _jobs(cfg)
    _warm_up(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_job, [cfg] * len(jobs), jobs))
    else:
        results = []
        for j in jobs:
            log.info("%s on kb%d-%d", j.measure, j.num_formulas, j.kb_index)
            results.append(_run_job(cfg, j))
    results.sort(key=lambda r: (r.job.num_formulas, r.job.kb_index, r.job.measure_index))
    return results


# ---------------------------------------------------------------------------
# Output helpers


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.6g}"


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``y = a*x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2:
        return 0.0, float(y.mean()) if len(y) else 0.0, float("nan")
    a, b = np.polyfit(x, y, 1)
    ss_res = float(((y - (a * x + b)) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def svg_line_chart(series: dict, title: str, xlabel: str, ylabel: str,
                   reference: Optional[float] = None, width: int = 640, height: int = 400) -> str:
    """A minimal SVG line chart.  ``series`` maps a label to ``(xs, ys)``.

    ``reference`` draws a dashed horizontal line (e.g. the true value).
    """
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys if not math.isinf(y)]
    if reference is not None:
        ys_all.append(reference)
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0, 1)
    y0, y1 = (min(0.0, min(ys_all)), max(ys_all)) if ys_all else (0, 1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    y1 += 0.05 * (y1 - y0)

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    if reference is not None:
        out.append(f'<line x1="{left}" y1="{sy(reference):.1f}" x2="{left + pw}" y2="{sy(reference):.1f}" '
                   'stroke="gray" stroke-dasharray="6,4"/>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys) if not math.isinf(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 28}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda cells: "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"  # noqa: E731
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def _records(results: list[JobResult]) -> list[list]:
    return [
        [r.job.measure, r.kb_id, r.seed, it, format_value(v), int(flag)]
        for r in results
        for it, v, flag in r.rows
    ]


RECORD_COLUMNS = ("measure", "kb_id", "seed", "iteration", "value", "timeout_flag")


def _write_timings(out: Path, results: list[JobResult]) -> None:
    data = [
        {
            "measure": r.job.measure,
            "kb_id": r.kb_id,
            "seed": r.seed,
            "iterations": r.iterations_done,
            "elapsed_micros": r.elapsed_micros,
            "aborted": r.aborted,
        }
        for r in results
    ]
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Experiments


@dataclass
class RuntimeRow:
    measure: str
    per_iteration_ms: float
    total_ms: float
    timeouts: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    output_dir: Path
    results: list
    summary: str
    runtime: list = field(default_factory=list)
    accuracy: dict = field(default_factory=dict)  # measure -> (iterations, mean values)
    scalability: dict = field(default_factory=dict)  # measure -> ScalabilityCurve


def _prepare_dir(cfg: ExperimentConfig, out: Optional[os.PathLike]) -> Path:
    path = Path(out if out is not None else cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_runtime_experiment(cfg: ExperimentConfig, out: Optional[os.PathLike] = None) -> ExperimentResult:
    """Mean per-iteration and total runtime per measure, as a table."""
    path = _prepare_dir(cfg, out)
    results = _execute(cfg)
    _write_csv(path / "records.csv", RECORD_COLUMNS, _records(results))
    _write_timings(path, results)
    rows = []
    for spec in cfg.measures:
        mine = [r for r in results if r.job.measure == spec]
        iters = sum(r.iterations_done for r in mine)
        micros = sum(r.elapsed_micros for r in mine)
        rows.append(RuntimeRow(
            spec,
            micros / 1000 / iters if iters else float("nan"),
            micros / 1000 / len(mine),
            sum(r.aborted for r in mine),
        ))
    table = _format_table(
        ("measure", "runtime/iteration (ms)", "total runtime (ms)", "timeouts"),
        [(r.measure, f"{r.per_iteration_ms:.4f}", f"{r.total_ms:.1f}", str(r.timeouts)) for r in rows],
    )
    summary = (f"runtime experiment: {cfg.trials} KBs x {cfg.num_formulas} formulas, "
               f"{cfg.num_atoms} atoms, {cfg.iterations} iterations\n\n" + table)
    (path / "summary.txt").write_text(summary, encoding="utf-8")
    return ExperimentResult(cfg, path, results, summary, runtime=rows)


def run_accuracy_experiment(cfg: ExperimentConfig, out: Optional[os.PathLike] = None) -> ExperimentResult:
    """Per-probe mean value across KBs against the true target value."""
    path = _prepare_dir(cfg, out)
    target = SampleSpec.parse_target(cfg.target)[1]
    results = _execute(cfg)
    _write_csv(path / "records.csv", RECORD_COLUMNS, _records(results))
    _write_timings(path, results)
    curves = {}
    acc_rows = []
    for spec in cfg.measures:
        by_iter: dict[int, list[float]] = {}
        for r in results:
            if r.job.measure == spec:
                for it, v, _ in r.rows:
                    by_iter.setdefault(it, []).append(float(v))
        its = sorted(by_iter)
        means = [float(np.mean(by_iter[i])) for i in its]
        curves[spec] = (its, means)
        acc_rows += [[spec, i, _fmt(m), target, len(by_iter[i])] for i, m in zip(its, means)]
    _write_csv(path / "accuracy.csv", ("measure", "iteration", "mean_value", "target", "runs"), acc_rows)
    svg = svg_line_chart(curves, f"accuracy (target {cfg.target})", "iteration", "mean value", reference=target)
    (path / "accuracy.svg").write_text(svg, encoding="utf-8")
    lines = []
    for spec, (its, means) in curves.items():
        finals = [float(r.rows[-1][1]) for r in results if r.job.measure == spec]
        within = sum(abs(v - target) <= 1 for v in finals)
        lines.append((spec, _fmt(means[-1]) if means else "-", f"{within}/{len(finals)}"))
    table = _format_table(("measure", "final mean", "runs within +-1"), lines)
    summary = f"accuracy experiment: target {cfg.target}, {cfg.trials} KBs, {cfg.iterations} iterations\n\n" + table
    (path / "summary.txt").write_text(summary, encoding="utf-8")
    return ExperimentResult(cfg, path, results, summary, accuracy=curves)


@dataclass
class ScalabilityCurve:
    measure: str
    sizes: list
    mean_micros: list  # mean runtime to convergence over converged KBs
    converged: list  # converged KB count per size
    slope: float = 0.0
    intercept: float = 0.0
    r_squared: float = float("nan")


def runtime_ratio(a: ScalabilityCurve, b: ScalabilityCurve) -> float:
    """Total runtime of ``b`` divided by that of ``a`` over sizes both cover."""
    common = [s for s in a.sizes if s in b.sizes]
    ta = sum(a.mean_micros[a.sizes.index(s)] for s in common)
    tb = sum(b.mean_micros[b.sizes.index(s)] for s in common)
    return tb / ta if ta else float("nan")


def run_scalability_experiment(cfg: ExperimentConfig, out: Optional[os.PathLike] = None) -> ExperimentResult:
    """Runtime until the value first comes within ``tolerance`` of the target, per KB size."""
    path = _prepare_dir(cfg, out)
    results = _execute(cfg)
    rows = [
        [r.job.measure, r.job.num_formulas, r.kb_id, r.seed,
         r.converged_at if r.converged_at is not None else "", int(r.converged_at is not None), int(r.aborted)]
        for r in results
    ]
    _write_csv(path / "scalability.csv",
               ("measure", "num_formulas", "kb_id", "seed", "iterations_to_converge", "converged", "timeout_flag"),
               rows)
    _write_timings(path, results)
    curves = {}
    for spec in cfg.measures:
        sizes, means, counts = [], [], []
        for size in cfg.sizes:
            ok = [r.elapsed_micros for r in results
                  if r.job.measure == spec and r.job.num_formulas == size and r.converged_at is not None]
            counts.append(len(ok))
            if ok:
                sizes.append(size)
                means.append(float(np.mean(ok)))
        a, b, r2 = linear_fit(sizes, means)
        curves[spec] = ScalabilityCurve(spec, sizes, means, counts, a, b, r2)
    svg = svg_line_chart({k: (c.sizes, [m / 1e6 for m in c.mean_micros]) for k, c in curves.items()},
                         f"runtime to +-{cfg.tolerance:g} of {cfg.target}", "formulas", "seconds")
    (path / "scalability.svg").write_text(svg, encoding="utf-8")
    table = _format_table(
        ("measure", "sizes fitted", "slope (ms/formula)", "R^2", "non-converged"),
        [(c.measure, str(len(c.sizes)), f"{c.slope / 1000:.5f}", f"{c.r_squared:.3f}",
          str(cfg.trials * len(cfg.sizes) - sum(c.converged))) for c in curves.values()],
    )
    summary = f"scalability experiment: target {cfg.target}, {cfg.num_atoms} atoms, sizes {cfg.sizes}\n\n" + table
    (path / "summary.txt").write_text(summary, encoding="utf-8")
    return ExperimentResult(cfg, path, results, summary, scalability=curves)


def run_experiment(cfg: ExperimentConfig, out: Optional[os.PathLike] = None) -> ExperimentResult:
    runner = {
        "runtime": run_runtime_experiment,
        "accuracy": run_accuracy_experiment,
        "scalability": run_scalability_experiment,
    }[cfg.experiment]
    return runner(cfg, out)
