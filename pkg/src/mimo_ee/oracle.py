"""Brute-force references for small instances (tests and validation only)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from mimo_ee.channel import ChannelState
from mimo_ee.errors import NoFeasiblePointError
from mimo_ee.link_metrics import LinkParams
from mimo_ee.qos import QosSpec, decode_order

MAX_GRID_USERS = 4
MAX_EXHAUSTIVE_USERS = 12
_CHUNK = 1 << 18


@dataclass(frozen=True)
class GridSpec:
    points_per_dim: int = 200
    log_spaced: bool = True
    min_power_w: float = 1e-6
    max_power_w: float | None = None
    refine: bool = True

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be at least 2")
        if not self.min_power_w > 0:
            raise ValueError("min_power_w must be positive")
        if self.max_power_w is not None and self.max_power_w <= self.min_power_w:
            raise ValueError("max_power_w must exceed min_power_w")

    def axis(self, lo: float, hi: float) -> np.ndarray:
        if self.log_spaced:
            return np.geomspace(lo, hi, self.points_per_dim)
        return np.linspace(lo, hi, self.points_per_dim)


def _ee_batch(P, beta, sigma2, M, B, Pc):
    """Lower-bound energy efficiency of every row of ``P``."""
    total = P.sum(axis=1, keepdims=True)
    arg = M * beta * P / (beta * (total - P) + sigma2)
    return B * np.log2(arg).sum(axis=1) / (total[:, 0] + Pc)


def _feasible_mask(P, order, omega, n_gain, max_power_w, equality):
    ok = np.all(P > 0, axis=1)
    total = P.sum(axis=1)
    if equality:
        ok &= np.abs(total - max_power_w) <= 1e-9 * max_power_w
    else:
        ok &= total <= max_power_w * (1 + 1e-12)
    acc = np.zeros(P.shape[0])
    for k in order:
        ok &= P[:, k] >= (omega[k] - 1.0) * (acc + n_gain[k])
        acc += P[:, k]
    return ok


def _search(axes, free, last, K, ctx):
    """Best feasible point over the product of ``axes`` (one per free user)."""
    best_ee, best_p = -math.inf, None
    head, tail = axes[0], axes[1:]
    tail_grid = (np.stack(np.meshgrid(*tail, indexing="ij"), axis=-1).reshape(-1, len(tail))
                 if tail else np.zeros((1, 0)))
    rows_per_chunk = max(1, _CHUNK // tail_grid.shape[0])
    for start in range(0, head.shape[0], rows_per_chunk):
        h = head[start:start + rows_per_chunk]
        n = h.shape[0] * tail_grid.shape[0]
        P = np.zeros((n, K))
        P[:, free[0]] = np.repeat(h, tail_grid.shape[0])
        for j, k in enumerate(free[1:]):
            P[:, k] = np.tile(tail_grid[:, j], h.shape[0])
        if last is not None:
            P[:, last] = ctx["max_power_w"] - P[:, free].sum(axis=1)
        ok = _feasible_mask(P, ctx["order"], ctx["omega"], ctx["n_gain"],
                            ctx["max_power_w"], last is not None)
        if not ok.any():
            continue
        P = P[ok]
        ee = _ee_batch(P, ctx["beta"], ctx["sigma2"], ctx["M"], ctx["B"], ctx["Pc"])
        i = int(np.argmax(ee))
        if ee[i] > best_ee:
            best_ee, best_p = float(ee[i]), P[i].copy()
    return best_p, best_ee


def grid_search_ee(channel: ChannelState, qos: QosSpec, params: LinkParams,
                   max_power_w: float, grid: GridSpec = GridSpec(), budget: str = "equality"):
    """Exhaustive grid maximization of the lower-bound energy efficiency.

    With ``budget="equality"`` the user decoded last takes whatever the grid
    leaves of ``max_power_w``; otherwise every user is on the grid and points
    above the budget are discarded. Points breaking a QoS constraint are
    discarded in both modes. One refinement pass re-grids two cells either side
    of the incumbent. Returns ``(powers, ee)``.
    """
    K = channel.num_users
    if K > MAX_GRID_USERS:
        raise ValueError(f"grid search supports at most {MAX_GRID_USERS} users")
    if budget not in ("equality", "inequality"):
        raise ValueError("budget must be 'equality' or 'inequality'")
    order = decode_order(channel)
    ctx = dict(
        order=order, omega=qos.omega, n_gain=1.0 / (qos.qos_snr * channel.composite_gain),
        max_power_w=float(max_power_w), beta=channel.large_scale,
        sigma2=params.noise_power_w, M=params.num_antennas, B=params.bandwidth_hz,
        Pc=params.circuit_power_w,
    )
    hi = grid.max_power_w if grid.max_power_w is not None else max_power_w
    if hi <= grid.min_power_w:
        raise NoFeasiblePointError("no feasible grid point: budget below the grid floor")
    if budget == "equality":
        last = int(order[-1])
        free = [int(k) for k in range(K) if k != last]
        if not free:
            p = np.array([float(max_power_w)])
            ok = _feasible_mask(p[None, :], order, ctx["omega"], ctx["n_gain"], max_power_w, True)
            if not ok[0]:
                raise NoFeasiblePointError("no feasible grid point")
            return p, float(_ee_batch(p[None, :], ctx["beta"], ctx["sigma2"], ctx["M"],
                                      ctx["B"], ctx["Pc"])[0])
    else:
        last = None
        free = list(range(K))
    base = grid.axis(grid.min_power_w, hi)
    axes = [base] * len(free)
    best_p, best_ee = _search(axes, free, last, K, ctx)
    if best_p is None:
        raise NoFeasiblePointError("no feasible grid point")
    if grid.refine:
        fine = []
        for k in free:
            i = int(np.argmin(np.abs(base - best_p[k])))
            lo, up = base[max(i - 2, 0)], base[min(i + 2, base.shape[0] - 1)]
            fine.append(grid.axis(lo, up))
        p2, ee2 = _search(fine, free, last, K, ctx)
        if p2 is not None and ee2 > best_ee:
            best_p, best_ee = p2, ee2
    check = _feasible_mask(best_p[None, :], order, ctx["omega"], ctx["n_gain"],
                           max_power_w, last is not None)
    if not check[0]:
        raise AssertionError("grid incumbent violates a constraint it was filtered on")
    return best_p, best_ee


def golden_section_ee(channel: ChannelState, params: LinkParams, max_power_w: float,
                      min_power_w: float = 1e-15, tol: float = 1e-10):
    """Single-user optimum of ``B log2(M beta p / sigma^2) / (p + P_c)`` on ``(0, max_power_w]``.

    Golden-section search on ``log p``; the objective is unimodal there.
    """
    if channel.num_users != 1:
        raise ValueError("golden-section oracle is single-user")
    beta = channel.large_scale[0]
    M, B = params.num_antennas, params.bandwidth_hz
    sigma2, Pc = params.noise_power_w, params.circuit_power_w

    def f(x):
        p = math.exp(x)
        return B * math.log2(M * beta * p / sigma2) / (p + Pc)

    a, b = math.log(min_power_w), math.log(max_power_w)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    if f(math.log(max_power_w)) >= f(x):
        x = math.log(max_power_w)
    return math.exp(x), f(x)


def exhaustive_admission(channel: ChannelState, qos: QosSpec, max_power_w: float) -> int:
    """Largest number of users whose sequential QoS requirements fit the budget."""
    K = channel.num_users
    if K > MAX_EXHAUSTIVE_USERS:
        raise ValueError(f"exhaustive admission supports at most {MAX_EXHAUSTIVE_USERS} users")
    omega = qos.omega
    n_gain = 1.0 / (qos.qos_snr * channel.composite_gain)
    ranked = [int(k) for k in decode_order(channel)]
    for size in range(K, 0, -1):
        for subset in itertools.combinations(ranked, size):
            total = 0.0
            for k in subset:
                total += (omega[k] - 1.0) * (total + n_gain[k])
            if total <= max_power_w:
                return size
    return 0
