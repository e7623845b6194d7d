"""Time the compiled and pure-Python kernels on the same solves.

    python3 benchmarks/bench_kernels.py [--channels N] [--users K]
"""

import argparse
import time

import numpy as np

from mimo_ee import kernels
from mimo_ee.channel import GeometryConfig, build_channel
from mimo_ee.ee_solver import SolverConfig, solve_ee
from mimo_ee.link_metrics import LinkParams
from mimo_ee.qos import QosSpec, check_feasibility


def _instances(n, K, params):
    out, seed = [], 0
    while len(out) < n:
        ch = build_channel(GeometryConfig(), params.num_antennas, K, seed)
        qos = QosSpec.uniform(1.0, K, params.noise_power_w)
        if check_feasibility(ch, qos, 1.0).feasible:
            out.append((ch, qos))
        seed += 1
    return out


def _time_backend(module, instances, params, config):
    saved = {name: getattr(kernels, name) for name in ("multiplier_loop", "project", "lb_sum_rate")}
    for name in saved:
        setattr(kernels, name, getattr(module, name))
    try:
        t0 = time.perf_counter()
        ees = [solve_ee(ch, qos, params, 1.0, config).achieved_ee for ch, qos in instances]
        return time.perf_counter() - t0, np.array(ees)
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--channels", type=int, default=5)
    ap.add_argument("--users", type=int, default=3)
    args = ap.parse_args()
    params = LinkParams()
    inst = _instances(args.channels, args.users, params)
    rows = []
    for budget in ("equality", "inequality"):
        config = SolverConfig(budget=budget)
        results = {name: _time_backend(mod, inst, params, config)
                   for name, mod in kernels.available_backends().items()}
        for name, (secs, ees) in results.items():
            rows.append((budget, name, secs / len(inst), ees))
    print(f"{'budget':<11}{'backend':<9}{'s/solve':>10}{'speedup':>10}")
    for budget in ("equality", "inequality"):
        sub = [r for r in rows if r[0] == budget]
        py = next(r[2] for r in sub if r[1] == "python")
        for _, name, secs, ees in sub:
            print(f"{budget:<11}{name:<9}{secs:>10.4f}{py / secs:>10.1f}")
        if len(sub) == 2:
            gap = np.max(np.abs(sub[0][3] - sub[1][3]) / sub[1][3])
            print(f"  max relative EE difference between backends: {gap:.1e}")


if __name__ == "__main__":
    main()
