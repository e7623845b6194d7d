"""Greedy user admission when the QoS requirements of all users exceed the budget."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from mimo_ee.channel import ChannelState
from mimo_ee.qos import QosSpec, decode_order, noise_to_gain


@dataclass(eq=False)
class AdmissionResult:
    admitted: np.ndarray
    powers_w: np.ndarray
    remaining_w: float
    admission_sequence: list
    max_power_w: float

    @property
    def admitted_count(self) -> int:
        return len(self.admission_sequence)

    def to_dict(self) -> dict:
        return {
            "admitted": [bool(x) for x in self.admitted],
            "powers_w": [float(x) for x in self.powers_w],
            "remaining_w": float(self.remaining_w),
            "admitted_count": self.admitted_count,
            "admission_sequence": [int(k) for k in self.admission_sequence],
            "max_power_w": float(self.max_power_w),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def remaining_power(max_power_w: float, allocated_total_w: float) -> float:
    if allocated_total_w > max_power_w:
        raise ValueError("allocated power exceeds the budget")
    return max_power_w - allocated_total_w


def admit_users(channel: ChannelState, qos: QosSpec, max_power_w: float) -> AdmissionResult:
    """Admit users strongest-first at their minimum QoS power while the budget lasts.

    A candidate whose requirement (given the users already admitted) exceeds the
    remaining power is dropped for good.
    """
    if len(qos) != channel.num_users:
        raise ValueError("QoS spec and channel disagree on the number of users")
    if max_power_w < 0:
        raise ValueError("max_power_w must be nonnegative")
    K = channel.num_users
    omega = qos.omega
    n = noise_to_gain(channel, qos)
    admitted = np.zeros(K, dtype=bool)
    powers = np.zeros(K)
    sequence = []
    allocated = 0.0
    remaining = float(max_power_w)
    for k in decode_order(channel):
        need = (omega[k] - 1.0) * (allocated + n[k])
        if need <= remaining:
            admitted[k] = True
            powers[k] = need
            sequence.append(int(k))
            allocated += need
            remaining = remaining_power(max_power_w, allocated)
    return AdmissionResult(admitted, powers, remaining, sequence, float(max_power_w))
