import numpy as np
import pytest

from mimo_ee import _pykernels, kernels
from mimo_ee.channel import GeometryConfig, build_channel
from mimo_ee.ee_solver import SolverConfig, _problem_arrays, solve_ee
from mimo_ee.qos import QosSpec

from conftest import feasible_instances

BACKENDS = kernels.available_backends()
needs_c = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled core not built")


def _inputs(params, K, seed):
    ch = build_channel(GeometryConfig(), 128, K, seed)
    qos = QosSpec.uniform(1.0, K, params.noise_power_w)
    return _problem_arrays(ch, qos, params)


def test_backend_selection_reports_a_known_backend():
    assert kernels.BACKEND in BACKENDS
    assert kernels.fixed_point is BACKENDS[kernels.BACKEND].fixed_point


@needs_c
@pytest.mark.parametrize("variant", [0, 1])
def test_chi_values_agree(params, variant):
    C = BACKENDS["cython"]
    rng = np.random.default_rng(0)
    for K in range(1, 8):
        order, omega, _, _ = _inputs(params, K, K)
        lam = rng.uniform(0, 1e5, K)
        np.testing.assert_array_equal(C.chi_values(lam, omega, order, variant),
                                      _pykernels.chi_values(lam, omega, order, variant))


@needs_c
@pytest.mark.parametrize("equality", [True, False])
def test_project_and_rate_agree(params, equality):
    C = BACKENDS["cython"]
    rng = np.random.default_rng(1)
    for K in range(1, 8):
        order, omega, n_gain, n_beta = _inputs(params, K, 100 + K)
        p = rng.uniform(1e-6, 0.5, K)
        a = _pykernels.project(p, order, omega, n_gain, 1.0, equality, 1e-12)
        b = C.project(p, order, omega, n_gain, 1.0, equality, 1e-12)
        np.testing.assert_allclose(a, b, rtol=1e-12)
        assert C.lb_sum_rate(a, n_beta, 128, params.bandwidth_hz) == pytest.approx(
            _pykernels.lb_sum_rate(a, n_beta, 128, params.bandwidth_hz), rel=1e-12)


@needs_c
@pytest.mark.parametrize("target", [1.0, -1.0])
def test_fixed_point_agrees(params, target):
    C = BACKENDS["cython"]
    rng = np.random.default_rng(2)
    for s in range(60):
        K = int(rng.integers(1, 7))
        order, omega, _, n_beta = _inputs(params, K, 200 + s)
        q = float(10 ** rng.uniform(5, 8))
        chi = _pykernels.chi_values(rng.uniform(0, 0.1 * q, K), omega, order, 0)
        args = (q, 0.0, chi, n_beta, params.bandwidth_hz, np.full(K, 0.1), target,
                1e-10, 200, 1e-12)
        pa, ta, sa, sta = _pykernels.fixed_point(*args)
        pb, tb, sb, stb = C.fixed_point(*args)
        assert (sa, sta) == (sb, stb)
        if sta == _pykernels.CONVERGED:
            np.testing.assert_allclose(pa, pb, rtol=1e-6)
            assert ta == pytest.approx(tb, rel=1e-6, abs=1e-6 * q)


@needs_c
@pytest.mark.parametrize("budget", ["equality", "inequality"])
def test_solver_agrees_across_backends(params, budget, monkeypatch):
    cfg = SolverConfig(budget=budget)
    results = {}
    for name, mod in BACKENDS.items():
        for fn in ("chi_values", "fixed_point", "project", "multiplier_loop", "lb_sum_rate"):
            monkeypatch.setattr(kernels, fn, getattr(mod, fn))
        results[name] = [solve_ee(ch, qos, params, 1.0, cfg)
                         for K in (1, 3) for _, ch, qos in feasible_instances(K, 2, params)]
    for a, b in zip(results["python"], results["cython"]):
        assert a.achieved_ee == pytest.approx(b.achieved_ee, rel=1e-6)
        np.testing.assert_allclose(a.powers_w, b.powers_w, rtol=1e-4, atol=1e-9)
