"""Random channel realizations for a single-cell massive MIMO downlink.

The composite channel is ``G = H D^(1/2)``: ``H`` holds i.i.d. CN(0, 1)
small-scale coefficients (one column per user) and ``D`` the large-scale gains
``beta_k = phi * rho_k / d_k**eps`` with log-normal shadowing ``rho_k``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GeometryConfig:
    min_distance_m: float = 35.0
    max_distance_m: float = 250.0
    path_loss_exponent: float = 3.8
    shadow_std_db: float = 10.0
    carrier_factor: float = 1.0

    def __post_init__(self):
        if not (self.min_distance_m > 0 and self.max_distance_m > 0):
            raise ValueError("distances must be positive")
        if self.min_distance_m > self.max_distance_m:
            raise ValueError("min_distance_m must not exceed max_distance_m")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.shadow_std_db < 0:
            raise ValueError("shadow_std_db must be nonnegative")
        if self.carrier_factor <= 0:
            raise ValueError("carrier_factor must be positive")


@dataclass(frozen=True, eq=False)
class ChannelState:
    """One fading realization.

    Attributes
    ----------
    small_scale : (M, K) complex ndarray
    large_scale : (K,) ndarray of beta_k
    distances : (K,) ndarray in meters
    composite_gain : (K,) ndarray of beta_k * ||h_k||^2
    """

    small_scale: np.ndarray
    large_scale: np.ndarray
    distances: np.ndarray
    composite_gain: np.ndarray

    @property
    def num_antennas(self) -> int:
        return self.small_scale.shape[0]

    @property
    def num_users(self) -> int:
        return self.small_scale.shape[1]

    @classmethod
    def from_arrays(cls, small_scale, large_scale, distances=None) -> "ChannelState":
        """Build a state from ``H`` and ``beta``, filling the composite gains."""
        h = np.asarray(small_scale, dtype=complex)
        if h.ndim != 2:
            raise ValueError("small_scale must be an M x K matrix")
        beta = np.asarray(large_scale, dtype=float).reshape(-1)
        if beta.shape[0] != h.shape[1]:
            raise ValueError("large_scale length must equal the number of columns")
        if np.any(beta <= 0):
            raise ValueError("large-scale gains must be positive")
        d = np.ones_like(beta) if distances is None else np.asarray(distances, float)
        gain = beta * column_energy(h)
        return cls(h, beta, d, gain)

    def to_dict(self) -> dict:
        h = self.small_scale
        return {
            "num_antennas": int(h.shape[0]),
            "num_users": int(h.shape[1]),
            "small_scale": [[[float(z.real), float(z.imag)] for z in row] for row in h],
            "large_scale": [float(b) for b in self.large_scale],
            "distances": [float(d) for d in self.distances],
            "composite_gain": [float(g) for g in self.composite_gain],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelState":
        pairs = np.asarray(doc["small_scale"], dtype=float)
        h = pairs[..., 0] + 1j * pairs[..., 1]
        state = cls.from_arrays(h, doc["large_scale"], doc.get("distances"))
        if "composite_gain" in doc:
            stored = np.asarray(doc["composite_gain"], dtype=float)
            if not np.allclose(stored, state.composite_gain, rtol=1e-12, atol=0):
                raise ValueError("composite_gain inconsistent with small/large scale")
        return state

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ChannelState":
        return cls.from_dict(json.loads(text))


def column_energy(h: np.ndarray) -> np.ndarray:
    """Squared L2 norm of every column."""
    return np.einsum("mk,mk->k", h.real, h.real) + np.einsum("mk,mk->k", h.imag, h.imag)


def derive_seed(master_seed: int, label: str) -> int:
    """Hash ``master_seed`` with a stream label into an independent 64-bit seed."""
    digest = hashlib.blake2b(f"{int(master_seed)}:{label}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def sample_geometry(geom: GeometryConfig, num_users: int, rng_seed: int) -> np.ndarray:
    """User distances drawn uniformly on ``[min_distance_m, max_distance_m]``."""
    if num_users < 1:
        raise ValueError("num_users must be at least 1")
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(geom.min_distance_m, geom.max_distance_m, size=num_users)


def large_scale_gain(distances, geom: GeometryConfig, rng_seed: int) -> np.ndarray:
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    rng = np.random.default_rng(rng_seed)
    shadow_db = rng.normal(0.0, 1.0, size=d.shape) * geom.shadow_std_db
    return geom.carrier_factor * 10.0 ** (shadow_db / 10.0) / d**geom.path_loss_exponent


def sample_small_scale(num_antennas: int, num_users: int, rng_seed: int) -> np.ndarray:
    """M x K matrix of i.i.d. CN(0, 1) entries.

    Columns are drawn user by user, so the first K columns of a larger draw
    equal a K-user draw with the same seed.
    """
    if num_antennas < 1 or num_users < 1:
        raise ValueError("dimensions must be at least 1")
    rng = np.random.default_rng(rng_seed)
    parts = rng.standard_normal((num_users, num_antennas, 2)) * np.sqrt(0.5)
    return (parts[..., 0] + 1j * parts[..., 1]).T.copy()


def build_channel(geom: GeometryConfig, M: int, K: int, rng_seed: int) -> ChannelState:
    d = sample_geometry(geom, K, derive_seed(rng_seed, "geometry"))
    beta = large_scale_gain(d, geom, derive_seed(rng_seed, "shadow"))
    h = sample_small_scale(M, K, derive_seed(rng_seed, "fading"))
    return ChannelState.from_arrays(h, beta, d)
