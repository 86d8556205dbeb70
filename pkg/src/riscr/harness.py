"""Seeded multi-realization experiment runner and CSV emission.

Seed derivation: every random stream is a `SeedSequence(seed, spawn_key=...)`
child, keyed by realization index and purpose (0 = channel sampling,
1 = initial point, (2, i) = mutual-information noise of iteration i,
3 = final-point mutual-information noise). Method arms of one realization
therefore share the channel, the initial point, and the noise draws, and
results do not depend on execution order.

CSV rows follow the fixed column order
run_id, method, realization, iteration, R0, MI, MI_stderr, MI_lower_bound,
gaussian_rate, f_log
with floats in shortest round-trip form (locale-independent '.'), so equal
(config, seed) pairs produce byte-identical files. Wall-clock time is kept
on the in-memory records only.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .channel import ChannelSet, assemble_channel, realize_channels
from .config import ExperimentConfig
from .constellation import ConstellationTable, build_table
from .metrics import (
    cutoff_rate_half_noise,
    gaussian_rate,
    mi_lower_bound,
    mutual_information_mc,
    objective_f,
    pair_phis,
)
from .pgm import OptimizerTrace, grad_p, grad_theta, random_design_point, run_pgm
from .sca import run_sca

CSV_COLUMNS = (
    "run_id",
    "method",
    "realization",
    "iteration",
    "R0",
    "MI",
    "MI_stderr",
    "MI_lower_bound",
    "gaussian_rate",
    "f_log",
)

SUMMARY_LABEL = "mean"


@dataclass(frozen=True)
class RunRecord:
    """One CSV row; wall_time is diagnostic only and never serialized."""

    run_id: str
    method: str
    realization: int | str
    iteration: int
    r0: float
    mi: float
    mi_stderr: float
    mi_lower_bound: float
    gaussian_rate: float
    f_log: float
    wall_time: float = field(default=0.0, compare=False)


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _format(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip form, plain for numpy scalars
    return str(value)


def emit_csv(records: Iterable[RunRecord], path: str | Path) -> Path:
    """Write records in the documented column order; header always present."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.run_id,
                    rec.method,
                    rec.realization,
                    rec.iteration,
                    _format(rec.r0),
                    _format(rec.mi),
                    _format(rec.mi_stderr),
                    _format(rec.mi_lower_bound),
                    _format(rec.gaussian_rate),
                    _format(rec.f_log),
                ]
            )
    return path


def parse_csv(path: str | Path) -> list[RunRecord]:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            realization: int | str = row[2]
            if realization != SUMMARY_LABEL:
                realization = int(realization)
            out.append(
                RunRecord(
                    run_id=row[0],
                    method=row[1],
                    realization=realization,
                    iteration=int(row[3]),
                    r0=float(row[4]),
                    mi=float(row[5]),
                    mi_stderr=float(row[6]),
                    mi_lower_bound=float(row[7]),
                    gaussian_rate=float(row[8]),
                    f_log=float(row[9]),
                )
            )
    return out


def _effective_channels(config: ExperimentConfig, realization: int) -> ChannelSet:
    channels = realize_channels(
        config.geometry,
        _substream(config.seed, realization, 0),
        direct_blocked=config.direct_blocked,
    )
    if not config.ris_enabled:
        channels = replace(channels, beta_indir_inv=0.0)
    return channels


def _trace_records(
    run_id: str,
    realization: int,
    method: str,
    trace: OptimizerTrace,
    channels: ChannelSet,
    table: ConstellationTable,
    config: ExperimentConfig,
    wall_time: float,
) -> list[RunRecord]:
    sigma2 = config.sigma2
    rows = []
    last = len(trace.records)
    for rec, point in zip(trace.records, trace.points):
        i = rec.iteration
        is_last = i == last
        if is_last and config.final_noise > 0:
            mi, stderr = mutual_information_mc(
                point.theta, point.precoder, channels, table, sigma2,
                config.final_noise, _substream(config.seed, realization, 3),
            )
        elif config.mi_every > 0 and i % config.mi_every == 0 and config.n_noise > 0:
            mi, stderr = mutual_information_mc(
                point.theta, point.precoder, channels, table, sigma2,
                config.n_noise, _substream(config.seed, realization, 2, i),
            )
        else:
            mi, stderr = math.nan, math.nan
        r0_half = cutoff_rate_half_noise(
            point.theta, point.precoder, channels, table, sigma2
        )
        rows.append(
            RunRecord(
                run_id=run_id,
                method=method,
                realization=realization,
                iteration=i,
                r0=rec.r0,
                mi=mi,
                mi_stderr=stderr,
                mi_lower_bound=mi_lower_bound(r0_half, table.n_streams),
                gaussian_rate=gaussian_rate(point.theta, point.precoder, channels, sigma2),
                f_log=math.log(rec.f),
                wall_time=wall_time,
            )
        )
    return rows


def run_realization_records(
    config: ExperimentConfig,
    run_id: str,
    method_suffix: str = "",
    sink: list[RunRecord] | None = None,
) -> list[RunRecord]:
    """Per-realization, per-iteration records for every configured method arm.

    Completed arms are appended to `sink` as they finish, so a caller can
    flush partial results if the run is interrupted.
    """
    geometry = config.geometry
    table = build_table(
        config.modulation_order, config.modulation_kind, geometry.n_rx, config.max_vectors
    )
    records: list[RunRecord] = sink if sink is not None else []
    for realization in range(config.n_realizations):
        channels = _effective_channels(config, realization)
        init = random_design_point(
            geometry.n_ris, geometry.n_tx, geometry.n_rx,
            _substream(config.seed, realization, 1),
        )
        for method in config.methods:
            start = time.perf_counter()
            if method == "pgm":
                trace = run_pgm(
                    init, channels, table, config.sigma2, config.pgm,
                    update_theta=config.ris_enabled,
                )
            else:
                trace = run_sca(
                    init, channels, table, config.sigma2, config.sca,
                    update_theta=config.ris_enabled,
                )
            wall = time.perf_counter() - start
            records.extend(
                _trace_records(
                    run_id, realization, method + method_suffix, trace,
                    channels, table, config, wall,
                )
            )
    return records


def summarize_records(records: list[RunRecord]) -> list[RunRecord]:
    """Across-realization mean curves, one row per (method, iteration).

    Traces shorter than the longest one are extended by holding their final
    row (a converged trace stays at its converged value). Mean rows carry
    realization = "mean"; MI_stderr combines as sqrt(sum se^2)/n.
    """
    by_method: dict[str, dict[int | str, list[RunRecord]]] = {}
    for rec in records:
        if rec.realization == SUMMARY_LABEL:
            continue
        by_method.setdefault(rec.method, {}).setdefault(rec.realization, []).append(rec)

    out = []
    for method in sorted(by_method):
        traces = [
            sorted(rows, key=lambda r: r.iteration)
            for _, rows in sorted(by_method[method].items())
        ]
        run_id = traces[0][0].run_id
        length = max(len(t) for t in traces)
        for i in range(length):
            rows = [t[min(i, len(t) - 1)] for t in traces]
            n = len(rows)
            out.append(
                RunRecord(
                    run_id=run_id,
                    method=method,
                    realization=SUMMARY_LABEL,
                    iteration=i + 1,
                    r0=sum(r.r0 for r in rows) / n,
                    mi=sum(r.mi for r in rows) / n,
                    mi_stderr=math.sqrt(sum(r.mi_stderr**2 for r in rows)) / n,
                    mi_lower_bound=sum(r.mi_lower_bound for r in rows) / n,
                    gaussian_rate=sum(r.gaussian_rate for r in rows) / n,
                    f_log=sum(r.f_log for r in rows) / n,
                )
            )
    return out


def run_experiment(
    config: ExperimentConfig,
    csv_path: str | Path | None = None,
    run_id: str | None = None,
) -> list[RunRecord]:
    """Run the configured experiment; returns realization rows plus mean rows.

    On KeyboardInterrupt the rows finished so far (plus their summary) are
    flushed to csv_path before the interrupt is re-raised.
    """
    if run_id is None:
        run_id = f"run-s{config.seed}"
    records: list[RunRecord] = []
    try:
        run_realization_records(config, run_id, sink=records)
    except KeyboardInterrupt:
        if csv_path is not None and records:
            emit_csv(records + summarize_records(records), csv_path)
        raise
    records = records + summarize_records(records)
    if csv_path is not None:
        emit_csv(records, csv_path)
    return records


def run_no_ris_baseline(
    config: ExperimentConfig,
    csv_path: str | Path | None = None,
    run_id: str | None = None,
) -> list[RunRecord]:
    """The same experiment without the reflecting surface (precoder-only)."""
    baseline = replace(config, ris_enabled=False)
    if run_id is None:
        run_id = f"noris-s{config.seed}"
    records = run_realization_records(baseline, run_id, method_suffix="_noris")
    records = records + summarize_records(records)
    if csv_path is not None:
        emit_csv(records, csv_path)
    return records


# ---------------------------------------------------------------------------
# gradient check


@dataclass(frozen=True)
class GradCheckReport:
    n_points: int
    max_rel_theta: float
    max_rel_p: float
    threshold: float

    @property
    def passed(self) -> bool:
        return max(self.max_rel_theta, self.max_rel_p) < self.threshold


def _fd_real_imag(fun, x: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of a real function over Re/Im of x."""
    out = np.empty(x.shape + (2,))
    it = np.nditer(np.zeros(x.shape), flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        for comp, delta in enumerate((step, 1j * step)):
            xp = x.copy()
            xm = x.copy()
            xp[idx] += delta
            xm[idx] -= delta
            out[idx + (comp,)] = (fun(xp) - fun(xm)) / (2.0 * step)
    return out


def _rel_error(fd: np.ndarray, grad: np.ndarray) -> float:
    expected = np.stack([2.0 * grad.real, 2.0 * grad.imag], axis=-1)
    denom = np.linalg.norm(expected.ravel())
    diff = np.linalg.norm((fd - expected).ravel())
    if denom == 0.0:
        return float(diff)
    return float(diff / denom)


def gradcheck(
    config: ExperimentConfig,
    n_points: int = 5,
    step: float = 1e-6,
    threshold: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Uses the config's dimensions with unit-scale synthetic channels (CN(0,1)
    entries, unit path gains, sigma^2 near 1), where finite differencing is
    well conditioned. Instance caps: N_s <= 64 and N_ris <= 16.
    """
    geometry = config.geometry
    n_ris = geometry.n_ris
    table = build_table(
        config.modulation_order, config.modulation_kind, geometry.n_rx, config.max_vectors
    )
    if table.n_symbols > 64 or n_ris > 16:
        raise ValueError(
            f"gradcheck wants a small instance: N_s <= 64, N_ris <= 16, got "
            f"N_s={table.n_symbols}, N_ris={n_ris}"
        )
    rng = _substream(config.seed, 0, 4)
    max_theta = 0.0
    max_p = 0.0
    for _ in range(n_points):
        cn = lambda *shape: (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        ) / np.sqrt(2.0)
        channels = ChannelSet(
            h_direct=cn(geometry.n_rx, geometry.n_tx),
            h_tx_ris=cn(n_ris, geometry.n_tx),
            h_ris_rx=cn(geometry.n_rx, n_ris),
            beta_dir_inv=1.0,
            beta_indir_inv=1.0,
        )
        point = random_design_point(n_ris, geometry.n_tx, geometry.n_rx, rng)
        # noise matched to the instance's pair-distance scale: keeps the
        # exponentials away from saturation where differencing sees nothing
        h = assemble_channel(channels, point.theta)
        phis = pair_phis(h, point.precoder, table)
        sigma2 = float(np.median(phis[1:]) / 4.0 * rng.uniform(0.5, 2.0))

        fd_theta = _fd_real_imag(
            lambda th: objective_f(th, point.precoder, channels, table, sigma2),
            point.theta.astype(complex),
            step,
        )
        g_theta = grad_theta(point.theta, point.precoder, channels, table, sigma2)
        max_theta = max(max_theta, _rel_error(fd_theta, g_theta))

        fd_p = _fd_real_imag(
            lambda p: objective_f(point.theta, p, channels, table, sigma2),
            point.precoder.astype(complex),
            step,
        )
        g_p = grad_p(point.theta, point.precoder, channels, table, sigma2)
        max_p = max(max_p, _rel_error(fd_p, g_p))
    return GradCheckReport(
        n_points=n_points,
        max_rel_theta=max_theta,
        max_rel_p=max_p,
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# figure reproductions


def _fig_config(
    seed: int,
    blocked: bool,
    order: int,
    method: str,
    n_realizations: int,
    mi_every: int,
    overrides: dict | None = None,
) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg = replace(
        cfg,
        seed=seed,
        direct_blocked=blocked,
        modulation_order=order,
        method=method,
        n_realizations=n_realizations,
        mi_every=mi_every,
    )
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _converged_means(records: list[RunRecord]) -> dict[str, dict[str, float]]:
    """Mean of each arm's final-iteration values across realizations."""
    finals: dict[str, list[RunRecord]] = {}
    for rec in records:
        if rec.realization == SUMMARY_LABEL:
            continue
        key = (rec.method, rec.realization)
        cur = finals.setdefault(rec.method, {})
        if rec.realization not in cur or rec.iteration > cur[rec.realization].iteration:
            cur[rec.realization] = rec
    out = {}
    for method, rows_by_real in finals.items():
        rows = list(rows_by_real.values())
        n = len(rows)
        out[method] = {
            "r0": sum(r.r0 for r in rows) / n,
            "mi": sum(r.mi for r in rows) / n,
            "mi_stderr": math.sqrt(sum(r.mi_stderr**2 for r in rows)) / n,
            "gaussian_rate": sum(r.gaussian_rate for r in rows) / n,
            "mi_lower_bound": sum(r.mi_lower_bound for r in rows) / n,
        }
    return out


def reproduce_fig2(
    seed: int,
    out_dir: str | Path = ".",
    n_realizations: int = 30,
    mi_every: int = 1,
    include_baseline: bool = True,
    overrides: dict | None = None,
) -> dict:
    """Both-panel convergence experiment: PGM and SCA, with/without surface.

    Writes fig2_present.csv and fig2_blocked.csv (per-realization rows plus
    mean curves) and returns the converged means per arm.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for panel, blocked in (("present", False), ("blocked", True)):
        cfg = _fig_config(seed, blocked, 4, "both", n_realizations, mi_every, overrides)
        run_id = f"fig2-{panel}-s{seed}"
        records = run_realization_records(cfg, run_id)
        if include_baseline:
            baseline = replace(cfg, ris_enabled=False)
            records += run_realization_records(baseline, run_id, method_suffix="_noris")
        records = records + summarize_records(records)
        emit_csv(records, out_dir / f"fig2_{panel}.csv")
        summary[panel] = _converged_means(records)
    return summary


def reproduce_fig3(
    seed: int,
    out_dir: str | Path = ".",
    orders: tuple[int, ...] = (4, 16),
    panels: tuple[str, ...] = ("present", "blocked"),
    n_realizations: int = 30,
    mi_every: int = 1,
    overrides: dict | None = None,
) -> dict:
    """Discrete-vs-Gaussian rate experiment for the cutoff-rate optimizer.

    Runs the gradient method per alphabet order; emits one CSV per panel
    with arms labeled pgm_m{order}. The gaussian_rate column is the
    log-det rate evaluated at the optimized point of each iteration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for panel in panels:
        blocked = panel == "blocked"
        records: list[RunRecord] = []
        run_id = f"fig3-{panel}-s{seed}"
        for order in orders:
            cfg = _fig_config(seed, blocked, order, "pgm", n_realizations, mi_every, overrides)
            records += run_realization_records(cfg, run_id, method_suffix=f"_m{order}")
        records = records + summarize_records(records)
        emit_csv(records, out_dir / f"fig3_{panel}.csv")
        summary[panel] = _converged_means(records)
    return summary
