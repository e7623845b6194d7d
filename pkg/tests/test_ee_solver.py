import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_ee.channel import GeometryConfig, build_channel
from mimo_ee.ee_solver import (SolverConfig, chi_term, fixed_point_power_update,
                               parametric_objective, solve_ee, stationarity_residual,
                               update_multipliers)
from mimo_ee.errors import InfeasibleInputError, UnattainableTargetError
from mimo_ee.link_metrics import LinkParams, PowerAllocation, lower_bound_energy_efficiency
from mimo_ee.oracle import golden_section_ee
from mimo_ee.qos import QosSpec, check_feasibility, qos_thresholds

from conftest import feasible_instances

LN2 = math.log(2.0)

# Grid-search optimum (400 points per axis for K=2, 80 for K=3, one refinement)
# on default-geometry channels, 1 W budget, 1 bit/s/Hz per user.
GRID_EE = {(2, 11): 1671482.3428149733, (3, 12): 2128544.390340866}
# Golden-section optimum, single user, seed 5, 1 W cap.
GOLDEN_EE = 489233587.58314115


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(step_theta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_inner_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(budget="sometimes")
    with pytest.raises(ValueError):
        SolverConfig(chi_variant="other")


def test_parametric_objective_examples(params):
    ch = build_channel(GeometryConfig(), 128, 3, 0)
    alloc = PowerAllocation([0.2, 0.3, 0.5])
    from mimo_ee.link_metrics import lower_bound_rates
    assert parametric_objective(0.0, alloc, ch, params) == pytest.approx(
        lower_bound_rates(alloc, ch, params).sum())
    assert parametric_objective(1e5, alloc, ch, params) > parametric_objective(2e5, alloc, ch, params)
    with pytest.raises(ValueError):
        parametric_objective(-1.0, alloc, ch, params)


def test_chi_examples():
    order = np.array([0, 1, 2])
    omega = np.array([2.0, 2.0, 2.0])
    assert chi_term(1, np.zeros(3), omega, order) == 0.0
    lam = np.array([0.3, 0.5, 0.7])
    assert chi_term(2, lam, omega, order) == pytest.approx(0.7)
    assert chi_term(0, [1.0, 1.0], [2.0, 2.0], [0, 1]) == pytest.approx(0.0)
    # the printed variant sums over earlier users instead
    assert chi_term(1, [1.0, 1.0], [2.0, 2.0], [0, 1], "printed") == pytest.approx(0.0)
    assert chi_term(0, [1.0, 1.0], [2.0, 2.0], [0, 1], "printed") == pytest.approx(1.0)


def test_fixed_point_single_user_closed_form(params):
    ch = build_channel(GeometryConfig(), 128, 1, 0)
    q = QosSpec.uniform(0.0, 1, params.noise_power_w)
    B = params.bandwidth_hz
    p = fixed_point_power_update(B / LN2, 0.0, [0.0], ch, q, params, [1.0])
    assert p[0] == pytest.approx(1.0, rel=1e-12)
    p = fixed_point_power_update(2 * B / LN2, 0.0, [0.0], ch, q, params, [1.0])
    assert p[0] == pytest.approx(0.5, rel=1e-12)


def test_fixed_point_satisfies_stationarity(params):
    rng = np.random.default_rng(0)
    for seed, ch, q in feasible_instances(3, 20, params):
        qv = float(rng.uniform(1e5, 1e7))
        lam = rng.uniform(0, 1e5, 3)
        p = fixed_point_power_update(qv, 0.0, lam, ch, q, params, np.full(3, 0.1))
        res = stationarity_residual(qv, 0.0, lam, p, ch, q, params)
        assert np.max(np.abs(res)) <= 1e-6 * (qv + 1)


def test_fixed_point_with_budget_target(params):
    (_, ch, q), = feasible_instances(3, 1, params)
    p, theta = fixed_point_power_update(2e6, 0.0, np.zeros(3), ch, q, params,
                                        np.full(3, 0.3), target_total=1.0)
    assert p.sum() == pytest.approx(1.0, rel=1e-9)
    res = stationarity_residual(2e6, theta, np.zeros(3), p, ch, q, params)
    assert np.max(np.abs(res)) <= 1e-6 * (2e6 + 1)


def test_fixed_point_powers_decrease_with_q(params):
    rng = np.random.default_rng(1)
    for s in range(100):
        K = int(rng.integers(1, 5))
        ch = build_channel(GeometryConfig(), 128, K, 10_000 + s)
        q = QosSpec.uniform(1.0, K, params.noise_power_w)
        q1 = float(10 ** rng.uniform(5, 7))
        p1 = fixed_point_power_update(q1, 0.0, np.zeros(K), ch, q, params, np.full(K, 0.1))
        p2 = fixed_point_power_update(1.5 * q1, 0.0, np.zeros(K), ch, q, params, np.full(K, 0.1))
        assert np.all(p2 < p1)


def test_fixed_point_unattainable(params):
    ch = build_channel(GeometryConfig(), 128, 2, 0)
    q = QosSpec.uniform(1.0, 2, params.noise_power_w)
    # the second user's price exceeds q by far, so its denominator goes negative
    with pytest.raises(UnattainableTargetError):
        fixed_point_power_update(1.0, 0.0, [0.0, 1e9], ch, q, params, [0.5, 0.5])


def test_update_multipliers_examples(params):
    ch = build_channel(GeometryConfig(), 128, 2, 0)
    q = QosSpec.uniform(1.0, 2, params.noise_power_w)
    p = qos_thresholds(np.array([0.4, 0.6]), ch, q)
    # both users exactly at their thresholds and the budget met
    p = np.array([0.0, 0.0])
    from mimo_ee.qos import min_required_powers
    req = min_required_powers(ch, q)
    budget = req.sum()
    th, lam = update_multipliers(0.0, np.zeros(2), req, ch, q, budget)
    assert th == 0.0 and np.all(lam == 0.0)
    th, lam = update_multipliers(0.0, np.zeros(2), np.array([0.8, 0.8]), ch, q, 1.0)
    assert th > 0
    low = req.copy()
    k = int(np.argmax(req))
    low[k] *= 0.5
    _, lam = update_multipliers(0.0, np.zeros(2), low, ch, q, 1.0)
    assert lam[k] > 0


def test_solver_matches_golden_section_single_user(params):
    ch = build_channel(GeometryConfig(), 128, 1, 5)
    q = QosSpec.uniform(0.0, 1, params.noise_power_w)
    res = solve_ee(ch, q, params, 1.0, SolverConfig(budget="inequality"))
    _, ee = golden_section_ee(ch, params, 1.0)
    assert ee == pytest.approx(GOLDEN_EE, rel=1e-9)
    assert res.achieved_ee == pytest.approx(GOLDEN_EE, rel=5e-3)


@pytest.mark.parametrize("K, seed", sorted(GRID_EE))
def test_solver_matches_frozen_grid_optimum(params, K, seed):
    ch = build_channel(GeometryConfig(), 128, K, seed)
    q = QosSpec.uniform(1.0, K, params.noise_power_w)
    res = solve_ee(ch, q, params, 1.0)
    assert res.converged
    assert abs(res.achieved_ee - GRID_EE[K, seed]) / GRID_EE[K, seed] <= 1e-2


def test_solver_result_invariants(params):
    for seed, ch, q in feasible_instances(3, 10, params):
        res = solve_ee(ch, q, params, 1.0)
        us = [t[0] for t in res.bisection_trace]
        vs = [t[1] for t in res.bisection_trace]
        assert all(a <= b for a, b in zip(us, us[1:]))
        assert all(a >= b for a, b in zip(vs, vs[1:]))
        assert all(u <= v for u, v in zip(us, vs))
        p = res.powers_w
        assert np.all(p >= SolverConfig().power_floor_w)
        assert p.sum() <= 1.0 * (1 + 1e-9)
        assert np.all(qos_thresholds(p, ch, q) - p <= 1e-6)
        denom = p.sum() + params.circuit_power_w
        assert res.converged
        assert abs(res.parametric_residual) <= 10 * res.bisection_tol_used * (denom + 1)
        assert res.achieved_ee == pytest.approx(
            lower_bound_energy_efficiency(PowerAllocation(p), ch, params), rel=1e-12)


def test_solver_deterministic(params):
    ch = build_channel(GeometryConfig(), 128, 3, 0)
    q = QosSpec.uniform(1.0, 3, params.noise_power_w)
    a = solve_ee(ch, q, params, 1.0)
    b = solve_ee(ch, q, params, 1.0)
    assert a.to_json() == b.to_json()


def test_solver_rejects_infeasible(params):
    ch = build_channel(GeometryConfig(), 128, 3, 0)
    q = QosSpec.uniform(12.0, 3, params.noise_power_w)
    with pytest.raises(InfeasibleInputError):
        solve_ee(ch, q, params, 1e-6)


def test_solver_json(params):
    ch = build_channel(GeometryConfig(), 128, 2, 11)
    res = solve_ee(ch, QosSpec.uniform(1.0, 2, params.noise_power_w), params, 1.0)
    doc = json.loads(res.to_json())
    assert set(doc) >= {"powers_w", "achieved_ee", "theta", "lambda", "converged",
                        "bisection_trace", "parametric_residual"}
    assert len(doc["bisection_trace"]) == len(res.bisection_trace)


@pytest.mark.parametrize("budget", ["equality", "inequality"])
def test_solver_beats_equal_split(params, budget):
    rng = np.random.default_rng(2)
    checked = 0
    for s in range(60):
        ch = build_channel(GeometryConfig(), 128, 3, s)
        q = QosSpec(rng.uniform(0.0, 0.5, 3), 1 / params.noise_power_w)
        even = np.full(3, 1.0 / 3)
        if np.any(qos_thresholds(even, ch, q) > even):
            continue
        res = solve_ee(ch, q, params, 1.0, SolverConfig(budget=budget))
        base = lower_bound_energy_efficiency(PowerAllocation(even), ch, params)
        assert res.achieved_ee >= base * (1 - 1e-12)
        checked += 1
    assert checked >= 20


def test_printed_chi_variant_still_feasible(params):
    for seed, ch, q in feasible_instances(3, 5, params):
        res = solve_ee(ch, q, params, 1.0, SolverConfig(chi_variant="printed"))
        p = res.powers_w
        assert p.sum() <= 1 + 1e-9
        assert np.all(qos_thresholds(p, ch, q) - p <= 1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4), st.floats(0.0, 2.0), st.floats(0.05, 5.0),
       st.sampled_from(["equality", "inequality"]))
def test_solver_constraints_property(seed, K, rate, pmax, budget):
    params = LinkParams()
    ch = build_channel(GeometryConfig(), 128, K, seed)
    q = QosSpec.uniform(rate, K, params.noise_power_w)
    if not check_feasibility(ch, q, pmax).feasible:
        return
    p = solve_ee(ch, q, params, pmax, SolverConfig(budget=budget)).powers_w
    assert p.sum() <= pmax * (1 + 1e-9)
    assert np.all(qos_thresholds(p, ch, q) - p <= 1e-6)
    if budget == "equality":
        assert p.sum() == pytest.approx(pmax, rel=1e-9)
