"""Command line entry point: ``mimo-ee {solve,admit,sweep,validate}``.

Exit codes: 0 success, 1 validation failure (or an infeasible ``solve``),
2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .admission import admit_users
from .channel import GeometryConfig, build_channel
from .config import ExperimentConfig, load_config
from .ee_solver import SolverConfig, solve_ee
from .errors import ConfigError, NoFeasiblePointError
from .experiment import default_output_path, run_sweep
from .link_metrics import LinkParams
from .oracle import GridSpec, exhaustive_admission, golden_section_ee, grid_search_ee
from .qos import QosSpec, check_feasibility, qos_thresholds

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _build_parser():
    parser = argparse.ArgumentParser(prog="mimo-ee",
                                     description="Energy-efficient massive MIMO power allocation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("solve", "solve one instance and print the result as JSON"),
                       ("admit", "run greedy admission on one instance and print JSON"),
                       ("sweep", "run a Monte-Carlo sweep and write a CSV"),
                       ("validate", "cross-check the solver against brute-force oracles")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=int, help="channel seed (master seed for sweep)")
        p.add_argument("--out", type=Path, help="output file")
        p.add_argument("--trials", type=int, help="number of trials")
        if name == "sweep":
            p.add_argument("--workers", type=int, help="worker processes per sweep point")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("must be at least 1", field="--trials")
        changes["num_trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("must be at least 1", field="--workers")
        changes["workers"] = args.workers
    return replace(cfg, **changes) if changes else cfg


def _instance(cfg: ExperimentConfig):
    system = cfg.base
    channel = build_channel(system.geometry, system.num_antennas, system.num_users,
                            cfg.master_seed)
    return system, channel, system.qos()


def _emit(text: str, out):
    print(text)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")


def cmd_solve(args) -> int:
    cfg = _load(args)
    system, channel, qos = _instance(cfg)
    verdict = check_feasibility(channel, qos, system.max_power_w)
    if not verdict.feasible or system.max_power_w <= 0:
        print(f"infeasible: QoS needs {verdict.required_total_w:.6g} W, budget "
              f"{system.max_power_w:.6g} W (use 'admit')", file=sys.stderr)
        return EXIT_FAIL
    res = solve_ee(channel, qos, system.link, system.max_power_w, system.solver)
    _emit(res.to_json(indent=2), args.out)
    return EXIT_OK


def cmd_admit(args) -> int:
    cfg = _load(args)
    system, channel, qos = _instance(cfg)
    res = admit_users(channel, qos, system.max_power_w)
    _emit(res.to_json(indent=2), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = args.out or default_output_path(cfg)
    rows = run_sweep(cfg, output_path=out)
    for r in rows:
        print(f"{r.sweep_value:.6g}\tEE={r.mean_ee_bit_per_j:.6g} bit/J\t"
              f"admitted={r.mean_admitted:.3f}\tfeasible={r.feasibility_rate:.3f}")
    print(f"wrote {out}")
    return EXIT_OK


def _validation_checks(seed: int, trials: int):
    """Yield ``(name, passed, detail)`` for each oracle cross-check."""
    params = LinkParams()
    sigma2 = params.noise_power_w
    budget = 1.0
    for K, N in ((2, 200), (3, 60)):
        worst, done = 0.0, 0
        for t in range(trials):
            ch = build_channel(GeometryConfig(), params.num_antennas, K, seed + 1000 * K + t)
            qos = QosSpec.uniform(1.0, K, sigma2)
            if not check_feasibility(ch, qos, budget).feasible:
                continue
            res = solve_ee(ch, qos, params, budget)
            _, ee_grid = grid_search_ee(ch, qos, params, budget, GridSpec(N, min_power_w=1e-12))
            worst = max(worst, (ee_grid - res.achieved_ee) / ee_grid)
            done += 1
        yield f"solver vs grid, K={K}", worst <= 1e-2, f"{done} channels, worst gap {worst:.2e}"

    worst = 0.0
    cfg = SolverConfig(budget="inequality")
    for t in range(trials):
        ch = build_channel(GeometryConfig(), params.num_antennas, 1, seed + 5000 + t)
        qos = QosSpec.uniform(0.0, 1, sigma2)
        res = solve_ee(ch, qos, params, budget, cfg)
        _, ee_ref = golden_section_ee(ch, params, budget)
        worst = max(worst, (ee_ref - res.achieved_ee) / ee_ref)
    yield "solver vs golden section, K=1", worst <= 1e-3, f"worst gap {worst:.2e}"

    bad = 0
    for t in range(trials):
        ch = build_channel(GeometryConfig(), params.num_antennas, 3, seed + 7000 + t)
        qos = QosSpec.uniform(1.0, 3, sigma2)
        if not check_feasibility(ch, qos, budget).feasible:
            continue
        p = solve_ee(ch, qos, params, budget).powers_w
        if p.sum() > budget * (1 + 1e-9) or np.any(qos_thresholds(p, ch, qos) - p > 1e-6):
            bad += 1
    yield "constraints hold, K=3", bad == 0, f"{bad} violations"

    rng = np.random.default_rng(seed)
    worse = 0
    for t in range(trials):
        ch = build_channel(GeometryConfig(), params.num_antennas, 3, seed + 9000 + t)
        qos = QosSpec.uniform(float(rng.uniform(2.0, 10.0)), 3, sigma2)
        pmax = float(rng.uniform(0.0, 2.0))
        if admit_users(ch, qos, pmax).admitted_count > exhaustive_admission(ch, qos, pmax):
            worse += 1
    yield "greedy admission within exhaustive, K=3", worse == 0, f"{worse} excess"


def cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 10
    if trials < 1:
        raise ConfigError("must be at least 1", field="--trials")
    lines, ok = [], True
    try:
        for name, passed, detail in _validation_checks(seed, trials):
            ok &= passed
            lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
            print(lines[-1])
    except NoFeasiblePointError as exc:
        ok = False
        lines.append(f"FAIL  oracle error: {exc}")
        print(lines[-1])
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"solve": cmd_solve, "admit": cmd_admit, "sweep": cmd_sweep, "validate": cmd_validate}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())
