"""Sequential QoS power requirements and the feasibility gate.

User k (in decode order) needs ``p_k >= (omega_k - 1) * (sum of earlier users'
powers + 1 / (snr * g_k))`` with ``omega_k = 2**R_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mimo_ee.channel import ChannelState


@dataclass(frozen=True, eq=False)
class QosSpec:
    """Minimum spectral efficiencies (bit/s/Hz) and the transmit SNR ``qos_snr``.

    ``qos_snr`` multiplies the composite gain; with ``1 / noise_power_w`` the
    term ``1 / (qos_snr * g_k)`` is the noise-to-gain ratio in watts.
    """

    min_spectral_eff: np.ndarray
    qos_snr: float

    def __post_init__(self):
        r = np.array(self.min_spectral_eff, dtype=float).reshape(-1)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("minimum spectral efficiencies must be finite and >= 0")
        if not self.qos_snr > 0:
            raise ValueError("qos_snr must be positive")
        object.__setattr__(self, "min_spectral_eff", r)

    @classmethod
    def uniform(cls, rate: float, num_users: int, noise_power_w: float,
                qos_snr: float | None = None) -> "QosSpec":
        snr = 1.0 / noise_power_w if qos_snr is None else qos_snr
        return cls(np.full(num_users, float(rate)), snr)

    @property
    def omega(self) -> np.ndarray:
        return np.exp2(self.min_spectral_eff)

    def __len__(self):
        return self.min_spectral_eff.shape[0]

    def scaled(self, factor: float) -> "QosSpec":
        return QosSpec(self.min_spectral_eff * factor, self.qos_snr)

    def subset(self, users) -> "QosSpec":
        return QosSpec(self.min_spectral_eff[list(users)], self.qos_snr)


@dataclass(frozen=True, eq=False)
class FeasibilityVerdict:
    feasible: bool
    required_powers_w: np.ndarray
    required_total_w: float
    order: np.ndarray
    max_power_w: float


def decode_order(channel: ChannelState) -> np.ndarray:
    """User indices by descending composite gain; ties keep the lower index first."""
    return np.argsort(-channel.composite_gain, kind="stable")


def noise_to_gain(channel: ChannelState, qos: QosSpec) -> np.ndarray:
    g = channel.composite_gain
    if np.any(g <= 0):
        raise ValueError("composite gains must be positive")
    return 1.0 / (qos.qos_snr * g)


def _check_dims(channel, qos, order):
    K = channel.num_users
    if len(qos) != K:
        raise ValueError(f"QoS spec has {len(qos)} users, channel has {K}")
    if order is not None and sorted(int(i) for i in order) != list(range(K)):
        raise ValueError("order must be a permutation of the user indices")


def min_required_powers(channel: ChannelState, qos: QosSpec, order=None) -> np.ndarray:
    """Smallest powers meeting every QoS constraint, returned in original user indexing."""
    order = decode_order(channel) if order is None else np.asarray(order)
    _check_dims(channel, qos, order)
    n = noise_to_gain(channel, qos)
    omega = qos.omega
    out = np.zeros(channel.num_users)
    acc = 0.0
    for k in order:
        out[k] = (omega[k] - 1.0) * (acc + n[k])
        acc += out[k]
    return out


def qos_thresholds(powers, channel: ChannelState, qos: QosSpec, order=None) -> np.ndarray:
    """Right-hand side of every QoS constraint evaluated at ``powers``."""
    order = decode_order(channel) if order is None else np.asarray(order)
    _check_dims(channel, qos, order)
    p = np.asarray(powers, dtype=float)
    n = noise_to_gain(channel, qos)
    omega = qos.omega
    out = np.empty_like(p)
    acc = 0.0
    for k in order:
        out[k] = (omega[k] - 1.0) * (acc + n[k])
        acc += p[k]
    return out


def check_feasibility(channel: ChannelState, qos: QosSpec, max_power_w: float) -> FeasibilityVerdict:
    if max_power_w < 0:
        raise ValueError("max_power_w must be nonnegative")
    order = decode_order(channel)
    req = min_required_powers(channel, qos, order)
    total = float(req.sum())
    return FeasibilityVerdict(total <= max_power_w, req, total, order, float(max_power_w))
