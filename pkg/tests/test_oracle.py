import numpy as np
import pytest

from mimo_ee.channel import GeometryConfig, build_channel
from mimo_ee.errors import NoFeasiblePointError
from mimo_ee.oracle import (MAX_EXHAUSTIVE_USERS, MAX_GRID_USERS, GridSpec,
                            exhaustive_admission, golden_section_ee, grid_search_ee)
from mimo_ee.qos import QosSpec, qos_thresholds

from conftest import feasible_instances


@pytest.mark.parametrize("seed", range(5))
def test_grid_matches_golden_section_single_user(params, seed):
    ch = build_channel(GeometryConfig(), 128, 1, seed)
    qos = QosSpec.uniform(0.0, 1, params.noise_power_w)
    _, ee_grid = grid_search_ee(ch, qos, params, 1.0, GridSpec(2000, min_power_w=1e-12),
                                budget="inequality")
    _, ee_gold = golden_section_ee(ch, params, 1.0)
    assert ee_grid <= ee_gold * (1 + 1e-12)
    assert ee_grid == pytest.approx(ee_gold, rel=1e-3)


def test_golden_section_hits_cap_when_circuit_power_dominates(params):
    from dataclasses import replace
    ch = build_channel(GeometryConfig(), 128, 1, 3)
    heavy = replace(params, circuit_power_per_antenna_w=10.0)
    p, _ = golden_section_ee(ch, heavy, 1e-3)
    assert p == pytest.approx(1e-3)


def test_grid_no_feasible_point(params):
    ch = build_channel(GeometryConfig(), 128, 2, 0)
    qos = QosSpec.uniform(1.0, 2, params.noise_power_w)
    with pytest.raises(NoFeasiblePointError):
        grid_search_ee(ch, qos, params, 1e-13, GridSpec(20, min_power_w=1e-12))
    # requirements far above the budget
    qos = QosSpec.uniform(40.0, 2, params.noise_power_w)
    with pytest.raises(NoFeasiblePointError):
        grid_search_ee(ch, qos, params, 1.0, GridSpec(20, min_power_w=1e-12))


@pytest.mark.parametrize("budget", ["equality", "inequality"])
@pytest.mark.parametrize("K", [2, 3])
def test_grid_doubling_never_decreases(params, budget, K):
    # geomspace with 2N-1 points contains every point of the N-point grid
    for seed, ch, qos in feasible_instances(K, 3, params):
        last = -np.inf
        for n in (9, 17, 33):
            _, ee = grid_search_ee(ch, qos, params, 1.0,
                                   GridSpec(n, min_power_w=1e-12, refine=False), budget=budget)
            assert ee >= last * (1 - 1e-12)
            last = ee


def test_grid_incumbent_is_feasible(params):
    for _, ch, qos in feasible_instances(3, 3, params):
        p, _ = grid_search_ee(ch, qos, params, 1.0, GridSpec(40, min_power_w=1e-12))
        assert p.sum() == pytest.approx(1.0, rel=1e-9)
        assert np.all(qos_thresholds(p, ch, qos) <= p * (1 + 1e-12))


def test_grid_rejects_too_many_users(params):
    ch = build_channel(GeometryConfig(), 128, MAX_GRID_USERS + 1, 0)
    qos = QosSpec.uniform(1.0, MAX_GRID_USERS + 1, params.noise_power_w)
    with pytest.raises(ValueError):
        grid_search_ee(ch, qos, params, 1.0)


def test_exhaustive_rejects_too_many_users(params):
    K = MAX_EXHAUSTIVE_USERS + 1
    ch = build_channel(GeometryConfig(), 128, K, 0)
    with pytest.raises(ValueError):
        exhaustive_admission(ch, QosSpec.uniform(1.0, K, params.noise_power_w), 1.0)


def test_exhaustive_trivial_cases(params):
    ch = build_channel(GeometryConfig(), 128, 5, 1)
    # no rate requirement: everyone fits even with no power
    assert exhaustive_admission(ch, QosSpec.uniform(0.0, 5, params.noise_power_w), 0.0) == 5
    assert exhaustive_admission(ch, QosSpec.uniform(1.0, 5, params.noise_power_w), 0.0) == 0
    assert exhaustive_admission(ch, QosSpec.uniform(1.0, 5, params.noise_power_w), 1e6) == 5


def test_exhaustive_monotone_in_budget(params):
    ch = build_channel(GeometryConfig(), 128, 6, 2)
    qos = QosSpec.uniform(6.0, 6, params.noise_power_w)
    counts = [exhaustive_admission(ch, qos, b) for b in np.geomspace(1e-6, 1e3, 30)]
    assert counts == sorted(counts)


def test_golden_section_rejects_multiuser(params):
    ch = build_channel(GeometryConfig(), 128, 2, 0)
    with pytest.raises(ValueError):
        golden_section_ee(ch, params, 1.0)
