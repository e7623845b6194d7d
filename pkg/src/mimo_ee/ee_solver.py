"""Energy-efficiency maximization for the QoS-feasible regime.

Three nested loops: bisection on the candidate efficiency ``q`` (the
parametric form ``max R(p) - q (sum p + P_c)`` has root ``q*`` at the optimum),
projected subgradient on the QoS and budget prices, and a Jacobi fixed point
of the stationarity condition for the powers. Rates are the large-array lower
bounds ``B log2(M beta_k p_k / (beta_k I_k + sigma^2))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from mimo_ee import kernels
from mimo_ee.channel import ChannelState
from mimo_ee.errors import ConvergenceError, InfeasibleInputError, UnattainableTargetError
from mimo_ee.link_metrics import LN2, LinkParams, PowerAllocation, lower_bound_rates
from mimo_ee.qos import QosSpec, check_feasibility, decode_order, noise_to_gain, qos_thresholds

BUDGET_MODES = ("equality", "inequality")
CHI_VARIANTS = {"corrected": 0, "printed": 1}


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, caps and steps.

    ``bisection_tol`` is absolute (bit/J); when None the bracket is closed to
    ``bisection_rtol`` times the current lower end. ``fixed_point_tol`` is the
    per-user relative power change that ends the inner loop. Steps are
    dimensionless (see ``update_multipliers``). ``budget`` selects
    ``sum p = P_max`` or ``sum p <= P_max``.
    """

    bisection_tol: float | None = None
    bisection_rtol: float = 1e-6
    fixed_point_tol: float = 1e-10
    max_bisection_iters: int = 60
    max_inner_iters: int = 200
    max_multiplier_iters: int = 500
    multiplier_tol: float = 1e-9
    step_theta: float = 1.0
    step_lambda: float = 1.0
    power_floor_w: float = 1e-12
    budget: str = "equality"
    chi_variant: str = "corrected"

    def __post_init__(self):
        for name in ("bisection_rtol", "fixed_point_tol", "multiplier_tol",
                     "step_theta", "step_lambda", "power_floor_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.bisection_tol is not None and not self.bisection_tol > 0:
            raise ValueError("bisection_tol must be positive")
        for name in ("max_bisection_iters", "max_inner_iters", "max_multiplier_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.budget not in BUDGET_MODES:
            raise ValueError(f"budget must be one of {BUDGET_MODES}")
        if self.chi_variant not in CHI_VARIANTS:
            raise ValueError(f"chi_variant must be one of {tuple(CHI_VARIANTS)}")

    @property
    def equality(self) -> bool:
        return self.budget == "equality"


@dataclass(eq=False)
class SolverResult:
    powers_w: np.ndarray
    achieved_ee: float
    theta: float
    lam: np.ndarray
    converged: bool
    bisection_trace: list = field(default_factory=list)
    parametric_residual: float = 0.0
    q_bisection: float = 0.0
    bisection_tol_used: float = 0.0
    backend: str = kernels.BACKEND

    def to_dict(self) -> dict:
        d = asdict(self)
        d["powers_w"] = [float(x) for x in self.powers_w]
        d["lambda"] = [float(x) for x in d.pop("lam")]
        d["bisection_trace"] = [[float(a) for a in row] for row in self.bisection_trace]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def parametric_objective(q: float, alloc: PowerAllocation, channel: ChannelState,
                         params: LinkParams) -> float:
    """``sum_k r~_k - q (sum_k p_k + M P_c,m)``; zero at the optimum efficiency."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    rates = lower_bound_rates(alloc, channel, params)
    return float(rates.sum() - q * (alloc.total_w + params.circuit_power_w))


def chi_term(user_index: int, lam, omega, order, variant: str = "corrected") -> float:
    """Net QoS price on one user's power: own multiplier minus the ``(omega_j - 1)``-weighted
    multipliers of the users whose constraints contain its power."""
    lam = np.asarray(lam, dtype=float)
    omega = np.asarray(omega, dtype=float)
    order = np.asarray(order, dtype=np.intp)
    if not (lam.shape == omega.shape == order.shape):
        raise ValueError("lam, omega and order must have the same length")
    return float(kernels.chi_values(lam, omega, order, CHI_VARIANTS[variant])[user_index])


def _problem_arrays(channel, qos, params):
    order = decode_order(channel).astype(np.intp)
    omega = qos.omega
    n_gain = noise_to_gain(channel, qos)
    n_beta = params.noise_power_w / channel.large_scale
    return order, omega, n_gain, n_beta


def fixed_point_power_update(q, theta, lam, channel, qos, params, initial_powers,
                             config: SolverConfig = SolverConfig(), target_total=None):
    """Powers satisfying the stationarity condition at fixed prices.

    With ``target_total`` the budget price is re-solved on every sweep so the
    powers sum to it, and the pair ``(powers, theta)`` is returned; otherwise
    only the powers are returned and ``theta`` is held fixed.

    Raises ConvergenceError at the sweep cap and UnattainableTargetError when a
    stationarity denominator turns nonpositive.
    """
    lam = np.asarray(lam, dtype=float)
    p0 = np.asarray(initial_powers, dtype=float)
    if q < 0 or theta < 0 and target_total is None or np.any(lam < 0):
        raise ValueError("prices must be nonnegative")
    if np.any(p0 <= 0):
        raise ValueError("initial powers must be positive")
    order, omega, _, n_beta = _problem_arrays(channel, qos, params)
    chi = kernels.chi_values(lam, omega, order, CHI_VARIANTS[config.chi_variant])
    target = -1.0 if target_total is None else float(target_total)
    p, th, sweeps, status = kernels.fixed_point(
        float(q), float(theta), chi, n_beta, params.bandwidth_hz, p0, target,
        config.fixed_point_tol, config.max_inner_iters, config.power_floor_w)
    if status == kernels.UNATTAINABLE:
        raise UnattainableTargetError(f"nonpositive denominator at q={q:g}, theta={theta:g}")
    if status == kernels.ITERATION_CAP:
        raise ConvergenceError(f"fixed point not reached in {sweeps} sweeps")
    return (p, th) if target_total is not None else p


def stationarity_residual(q, theta, lam, powers, channel, qos, params,
                          variant: str = "corrected") -> np.ndarray:
    """Gradient of the Lagrangian with respect to each power, in bit/s/W."""
    p = np.asarray(powers, dtype=float)
    order, omega, _, n_beta = _problem_arrays(channel, qos, params)
    chi = kernels.chi_values(np.asarray(lam, float), omega, order, CHI_VARIANTS[variant])
    B = params.bandwidth_hz
    w = B / (LN2 * (p.sum() - p + n_beta))
    return B / (LN2 * p) - (w.sum() - w) - (q + theta - chi)


def update_multipliers(theta, lam, powers, channel, qos, max_power_w,
                       config: SolverConfig = SolverConfig(), iteration: int = 1,
                       bandwidth_hz: float = 120e3):
    """One projected subgradient step on the budget and QoS prices.

    ``theta' = max(0, theta - s (P_max - sum p))`` and
    ``lam'_k = max(0, lam_k - s (p_k - Preq_k(p)))`` with
    ``s = step * B / (ln2 (sum p)^2) / sqrt(iteration)``.
    """
    if iteration < 1:
        raise ValueError("iteration counts from 1")
    p = np.asarray(powers, dtype=float)
    lam = np.asarray(lam, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ValueError("total power must be positive")
    kappa = bandwidth_hz / (LN2 * total * total) / math.sqrt(iteration)
    viol = qos_thresholds(p, channel, qos) - p
    lam_new = np.maximum(lam + config.step_lambda * kappa * viol, 0.0)
    theta_new = max(theta - config.step_theta * kappa * (max_power_w - total), 0.0)
    return theta_new, lam_new


def solve_ee(channel: ChannelState, qos: QosSpec, params: LinkParams, max_power_w: float,
             config: SolverConfig = SolverConfig()) -> SolverResult:
    """Maximize lower-bound energy efficiency subject to the budget and QoS constraints.

    Raises InfeasibleInputError when the QoS requirements exceed ``max_power_w``.
    Hitting the bisection cap is reported through ``converged=False``; the best
    feasible allocation seen is returned either way.
    """
    verdict = check_feasibility(channel, qos, max_power_w)
    if not verdict.feasible:
        raise InfeasibleInputError(
            f"QoS needs {verdict.required_total_w:.6g} W but budget is {max_power_w:.6g} W")
    if max_power_w <= 0:
        raise InfeasibleInputError("power budget must be positive")

    order, omega, n_gain, n_beta = _problem_arrays(channel, qos, params)
    K = channel.num_users
    B = params.bandwidth_hz
    M = params.num_antennas
    Pc = params.circuit_power_w
    floor = config.power_floor_w
    equality = config.equality
    variant = CHI_VARIANTS[config.chi_variant]

    def realized(p):
        return kernels.lb_sum_rate(p, n_beta, M, B) / (p.sum() + Pc)

    p = kernels.project(np.full(K, max_power_w / K), order, omega, n_gain,
                        max_power_w, equality, floor)
    best_p, best_ee = p, realized(p)
    ee_ref = max(best_ee, 0.0)

    u = 0.0
    v = B * float(channel.composite_gain.min()) / (params.snr_gap * params.noise_power_w * LN2)
    if best_ee >= v:
        v = 2.0 * best_ee
    theta, lam = 0.0, np.zeros(K)
    trace = []
    converged = False
    tol = 0.0
    for _ in range(config.max_bisection_iters):
        tol = config.bisection_tol or config.bisection_rtol * max(u, ee_ref)
        if v - u < tol:
            converged = True
            break
        eta = 0.5 * (u + v)
        p_feas, _, p, theta, lam, _, _ = kernels.multiplier_loop(
            eta, 0.0, np.zeros(K), p, order, omega, n_gain, n_beta, M, Pc, B,
            max_power_w, equality, config.step_theta, config.step_lambda,
            config.max_multiplier_iters, config.multiplier_tol, config.fixed_point_tol,
            config.max_inner_iters, floor, variant)
        ee = realized(p_feas)
        trace.append((u, v, ee))
        if ee >= eta:
            u = eta
        else:
            v = eta
        if ee > best_ee:
            best_p, best_ee = p_feas, ee
            ee_ref = max(ee_ref, ee)
    else:
        tol = config.bisection_tol or config.bisection_rtol * max(u, ee_ref)
        converged = v - u < tol

    q_mid = 0.5 * (u + v)
    residual = kernels.lb_sum_rate(best_p, n_beta, M, B) - q_mid * (best_p.sum() + Pc)
    return SolverResult(
        powers_w=best_p,
        achieved_ee=float(best_ee),
        theta=float(theta),
        lam=np.asarray(lam, dtype=float),
        converged=bool(converged),
        bisection_trace=trace,
        parametric_residual=float(residual),
        q_bisection=float(q_mid),
        bisection_tol_used=float(tol),
        backend=kernels.BACKEND,
    )
