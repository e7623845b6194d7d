"""Monte-Carlo sweeps: one channel per trial, feasibility gate, then solve or admit."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .admission import admit_users
from .channel import build_channel
from .config import ExperimentConfig, SystemConfig
from .ee_solver import solve_ee
from .errors import ConvergenceError, UnattainableTargetError
from .qos import check_feasibility

CSV_HEADER = ("sweep_value", "mean_ee_bit_per_j", "ci95", "mean_admitted",
              "feasibility_rate", "num_trials")
OUTPUT_DIR_ENV = "MIMO_EE_OUTPUT_DIR"


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    feasible: bool
    ee_bit_per_j: float  # nan on the admission branch or when the solver failed
    admitted: int
    converged: bool
    error: str | None = None


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    mean_ee_bit_per_j: float
    mean_admitted: float
    feasibility_rate: float
    num_trials: int
    ci95_halfwidth: float

    def __post_init__(self):
        if not 0.0 <= self.feasibility_rate <= 1.0:
            raise ValueError("feasibility_rate must lie in [0, 1]")
        if self.ci95_halfwidth < 0:
            raise ValueError("ci95_halfwidth must be nonnegative")


def trial_seed(master_seed: int, trial_index: int) -> int:
    return int(master_seed) ^ int(trial_index)


def run_system_trial(system: SystemConfig, master_seed: int, trial_index: int) -> TrialRecord:
    seed = trial_seed(master_seed, trial_index)
    K = system.num_users
    channel = build_channel(system.geometry, system.num_antennas, K, seed)
    qos = system.qos(K)
    verdict = check_feasibility(channel, qos, system.max_power_w)
    if not verdict.feasible:
        res = admit_users(channel, qos, system.max_power_w)
        return TrialRecord(trial_index, seed, False, math.nan, res.admitted_count, True)
    if system.max_power_w <= 0:
        # Zero budget with zero requirements: nothing to optimize.
        return TrialRecord(trial_index, seed, True, 0.0, K, True)
    try:
        res = solve_ee(channel, qos, system.link, system.max_power_w, system.solver)
    except (ConvergenceError, UnattainableTargetError) as exc:
        return TrialRecord(trial_index, seed, True, math.nan, K, False,
                           f"{type(exc).__name__}: {exc}")
    return TrialRecord(trial_index, seed, True, res.achieved_ee, K, res.converged)


def run_trial(config: ExperimentConfig, trial_index: int, sweep_index: int = 0) -> TrialRecord:
    system = config.system_at(config.sweep_values[sweep_index])
    return run_system_trial(system, config.master_seed, trial_index)


def _ci95(values) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / math.sqrt(n)


def aggregate(value: float, records) -> SweepRow:
    # Sorting by trial index makes the reduction independent of completion order.
    records = sorted(records, key=lambda r: r.trial_index)
    n = len(records)
    ees = [r.ee_bit_per_j for r in records if r.feasible and not math.isnan(r.ee_bit_per_j)]
    mean_ee = math.fsum(ees) / len(ees) if ees else math.nan
    return SweepRow(
        sweep_value=float(value),
        mean_ee_bit_per_j=mean_ee,
        mean_admitted=math.fsum(r.admitted for r in records) / n,
        feasibility_rate=sum(r.feasible for r in records) / n,
        num_trials=n,
        ci95_halfwidth=_ci95(ees),
    )


def _run_chunk(args):
    system, master_seed, indices = args
    return [run_system_trial(system, master_seed, i) for i in indices]


def run_point(system: SystemConfig, master_seed: int, num_trials: int, workers: int = 1):
    """All trials of one sweep point, optionally on a process pool."""
    if workers <= 1 or num_trials < 2:
        return [run_system_trial(system, master_seed, i) for i in range(num_trials)]
    chunks = [(system, master_seed, list(range(i, num_trials, workers))) for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [rec for part in pool.map(_run_chunk, chunks) for rec in part]


def default_output_path(config: ExperimentConfig) -> Path:
    if config.output_path:
        return Path(config.output_path)
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "results"))
    return base / f"sweep_{config.sweep_variable}.csv"


def run_sweep(config: ExperimentConfig, output_path=None, write: bool = True):
    """Run every sweep point and (by default) write the CSV. Returns the rows."""
    rows = []
    for value in config.sweep_values:
        records = run_point(config.system_at(value), config.master_seed,
                            config.num_trials, config.workers)
        rows.append(aggregate(value, records))
    if write:
        write_csv(rows, output_path or default_output_path(config))
    return rows


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(rows, path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(r.sweep_value), _fmt(r.mean_ee_bit_per_j), _fmt(r.ci95_halfwidth),
                        _fmt(r.mean_admitted), _fmt(r.feasibility_rate), str(r.num_trials)])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        return [SweepRow(sweep_value=float(v), mean_ee_bit_per_j=float(ee),
                         ci95_halfwidth=float(ci), mean_admitted=float(adm),
                         feasibility_rate=float(fr), num_trials=int(n))
                for v, ee, ci, adm, fr, n in reader]
