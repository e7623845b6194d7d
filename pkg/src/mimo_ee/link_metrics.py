"""Per-user SINR, rates and energy efficiency for MRT downlink."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mimo_ee.channel import ChannelState

LN2 = math.log(2.0)


def snr_gap_from_ber(target_ber: float) -> float:
    """Gap between Shannon capacity and coded modulation at BER ``target_ber``.

    Clamped below at 1 (no gap); ``-(2/3) ln(5 Pe)`` is positive for Pe < 0.2.
    """
    if not 0.0 < target_ber <= 0.2:
        raise ValueError("target_ber must lie in (0, 0.2]")
    return max(1.0, -(2.0 / 3.0) * math.log(5.0 * target_ber))


@dataclass(frozen=True)
class LinkParams:
    bandwidth_hz: float = 120e3
    noise_psd_w_per_hz: float = 1e-20
    circuit_power_per_antenna_w: float = 10 ** (-14.0 / 10) * 1e-3
    num_antennas: int = 128
    target_ber: float = 1e-3

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.noise_psd_w_per_hz <= 0:
            raise ValueError("bandwidth and noise PSD must be positive")
        if self.circuit_power_per_antenna_w < 0:
            raise ValueError("circuit power must be nonnegative")
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be at least 1")
        snr_gap_from_ber(self.target_ber)

    @property
    def noise_power_w(self) -> float:
        return self.noise_psd_w_per_hz * self.bandwidth_hz

    @property
    def snr_gap(self) -> float:
        return snr_gap_from_ber(self.target_ber)

    @property
    def circuit_power_w(self) -> float:
        """Total circuit power ``M * P_c,m``."""
        return self.num_antennas * self.circuit_power_per_antenna_w


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    powers_w: np.ndarray

    def __post_init__(self):
        p = np.array(self.powers_w, dtype=float).reshape(-1)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("powers must be finite and nonnegative")
        object.__setattr__(self, "powers_w", p)

    @property
    def total_w(self) -> float:
        return float(self.powers_w.sum())

    def __len__(self):
        return self.powers_w.shape[0]


def _check(alloc: PowerAllocation, channel: ChannelState, params: LinkParams | None = None):
    if len(alloc) != channel.num_users:
        raise ValueError(
            f"allocation has {len(alloc)} users, channel has {channel.num_users}"
        )
    if params is not None and params.num_antennas != channel.num_antennas:
        raise ValueError(
            f"params.num_antennas={params.num_antennas} but channel has "
            f"{channel.num_antennas} antennas"
        )


def sinr_components(alloc: PowerAllocation, channel: ChannelState, params: LinkParams):
    """Signal power and interference-plus-noise of every user on the realized channel.

    The interference of user k is the squared magnitude of the coherent sum
    ``sum_{l != k} sqrt(p_l beta_k) h_l^H h_k / ||h_l||``.
    """
    _check(alloc, channel, params)
    p = alloc.powers_w
    h = channel.small_scale
    beta = channel.large_scale
    norms = np.sqrt(np.einsum("mk,mk->k", h.conj(), h).real)
    cross = h.conj().T @ h  # cross[l, k] = h_l^H h_k
    amp = np.sqrt(p) / norms
    coherent = amp @ cross - amp * np.diag(cross)
    signal = p * beta * norms**2
    interference = beta * np.abs(coherent) ** 2
    return signal, interference + params.noise_power_w


def exact_sinr(alloc, channel, params, user_index: int) -> float:
    _check(alloc, channel, params)
    if not 0 <= user_index < channel.num_users:
        raise IndexError("user_index out of range")
    signal, denom = sinr_components(alloc, channel, params)
    return float(signal[user_index] / denom[user_index])


def asymptotic_sinrs(alloc, channel, params) -> np.ndarray:
    """Large-array SINR of all users: ``p_k beta_k M / (beta_k sum_{l!=k} p_l + sigma^2)``."""
    _check(alloc, channel, params)
    p = alloc.powers_w
    beta = channel.large_scale
    others = p.sum() - p
    return p * beta * params.num_antennas / (beta * others + params.noise_power_w)


def asymptotic_sinr(alloc, channel, params, user_index: int) -> float:
    if not 0 <= user_index < channel.num_users:
        raise IndexError("user_index out of range")
    return float(asymptotic_sinrs(alloc, channel, params)[user_index])


def user_rate(sinr, params: LinkParams):
    """``B log2(1 + sinr / mu)`` in bit/s; accepts scalars or arrays."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be nonnegative")
    r = params.bandwidth_hz * np.log2(1.0 + s / params.snr_gap)
    return float(r) if r.ndim == 0 else r


def sum_rate(alloc, channel, params) -> float:
    return float(np.sum(user_rate(asymptotic_sinrs(alloc, channel, params), params)))


def lower_bound_rates(alloc, channel, params) -> np.ndarray:
    _check(alloc, channel, params)
    p = alloc.powers_w
    if np.any(p <= 0):
        raise ValueError("lower-bound rate needs strictly positive powers")
    beta = channel.large_scale
    others = p.sum() - p
    arg = params.num_antennas * beta * p / (beta * others + params.noise_power_w)
    return params.bandwidth_hz * np.log2(arg)


def lower_bound_rate(alloc, channel, params, user_index: int) -> float:
    """Rate bound for MRT with perfect CSI; negative when its argument is below 1."""
    if not 0 <= user_index < channel.num_users:
        raise IndexError("user_index out of range")
    p = alloc.powers_w
    if p[user_index] <= 0:
        raise ValueError("lower-bound rate needs p_k > 0")
    beta = channel.large_scale[user_index]
    others = p.sum() - p[user_index]
    arg = params.num_antennas * beta * p[user_index] / (beta * others + params.noise_power_w)
    return float(params.bandwidth_hz * math.log2(arg))


def energy_efficiency(alloc, channel, params) -> float:
    """Sum rate over total consumed power (transmit plus circuit), bit/J."""
    denom = alloc.total_w + params.circuit_power_w
    if denom <= 0:
        raise ValueError("zero total power: energy efficiency undefined")
    return sum_rate(alloc, channel, params) / denom


def lower_bound_energy_efficiency(alloc, channel, params) -> float:
    """Energy efficiency with the lower-bound rates in the numerator."""
    denom = alloc.total_w + params.circuit_power_w
    if denom <= 0:
        raise ValueError("zero total power: energy efficiency undefined")
    return float(lower_bound_rates(alloc, channel, params).sum() / denom)
