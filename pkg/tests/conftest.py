import numpy as np
import pytest

from mimo_ee.channel import ChannelState, GeometryConfig, build_channel
from mimo_ee.link_metrics import LinkParams
from mimo_ee.qos import QosSpec, check_feasibility


@pytest.fixture
def params():
    return LinkParams()


def manual_channel(h, beta):
    return ChannelState.from_arrays(np.asarray(h, dtype=complex), beta)


def feasible_instances(K, n, params, rate=1.0, budget=1.0, start=0):
    """First ``n`` default-geometry channels whose QoS fits ``budget``."""
    out, seed = [], start
    while len(out) < n:
        ch = build_channel(GeometryConfig(), params.num_antennas, K, seed)
        qos = QosSpec.uniform(rate, K, params.noise_power_w)
        if check_feasibility(ch, qos, budget).feasible:
            out.append((seed, ch, qos))
        seed += 1
    return out


_ACCEPTANCE = pytest.StashKey()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record ``(number, title, passed, detail)`` for the end-of-run report and print it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
