"""System and experiment configuration, plus the flat ``key = value`` file format.

Powers may be given in dBm (``*_dbm`` keys) or watts (``*_w`` keys); everything
is converted to SI on load. Lines starting with ``#`` and blank lines are
ignored. List values are comma separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import GeometryConfig
from .ee_solver import SolverConfig
from .errors import ConfigError
from .link_metrics import LinkParams
from .qos import QosSpec

SWEEP_VARIABLES = ("circuit_power", "num_antennas", "max_power", "num_requesting_users", "min_rate")


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w / 1e-3)


@dataclass(frozen=True)
class SystemConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    link: LinkParams = field(default_factory=LinkParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    num_users: int = 3
    max_power_w: float = 1.0
    min_spectral_eff: float = 1.0
    qos_snr: float | None = None

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if not self.max_power_w >= 0:
            raise ValueError("max_power_w must be >= 0")
        if not self.min_spectral_eff >= 0:
            raise ValueError("min_spectral_eff must be >= 0")

    @property
    def num_antennas(self) -> int:
        return self.link.num_antennas

    def qos(self, num_users: int | None = None) -> QosSpec:
        K = self.num_users if num_users is None else num_users
        return QosSpec(np.full(K, float(self.min_spectral_eff)),
                       self.qos_snr if self.qos_snr is not None else 1.0 / self.link.noise_power_w)

    def with_circuit_power(self, watts: float, mode: str = "per_antenna") -> "SystemConfig":
        per_ant = watts if mode == "per_antenna" else watts / self.link.num_antennas
        return replace(self, link=replace(self.link, circuit_power_per_antenna_w=per_ant))

    def with_num_antennas(self, M: int, circuit_mode: str = "per_antenna") -> "SystemConfig":
        # A fixed total circuit power keeps the total, not the per-antenna share.
        per_ant = self.link.circuit_power_per_antenna_w
        if circuit_mode == "total":
            per_ant = self.link.circuit_power_w / M
        return replace(self, link=replace(self.link, num_antennas=int(M),
                                          circuit_power_per_antenna_w=per_ant))


@dataclass(frozen=True)
class ExperimentConfig:
    base: SystemConfig = field(default_factory=SystemConfig)
    sweep_variable: str = "circuit_power"
    sweep_values: tuple = (1e-3,)
    num_trials: int = 200
    master_seed: int = 0
    output_path: str | None = None
    circuit_power_mode: str = "per_antenna"
    workers: int = 1

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        vals = np.asarray(self.sweep_values, dtype=float)
        if vals.size == 0:
            raise ValueError("sweep_values must be nonempty")
        d = np.diff(vals)
        if vals.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep_values must be strictly monotone")
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")
        if self.circuit_power_mode not in ("per_antenna", "total"):
            raise ValueError("circuit_power_mode must be per_antenna or total")

    def system_at(self, value) -> SystemConfig:
        base = self.base
        var = self.sweep_variable
        if var == "circuit_power":
            return base.with_circuit_power(float(value), self.circuit_power_mode)
        if var == "num_antennas":
            return base.with_num_antennas(int(value), self.circuit_power_mode)
        if var == "max_power":
            return replace(base, max_power_w=float(value))
        if var == "num_requesting_users":
            return replace(base, num_users=int(value))
        return replace(base, min_spectral_eff=float(value))


# key -> (section, attribute, parser)
_FLOAT, _INT, _STR = float, int, str
_KEYS = {
    "num_antennas": ("link", "num_antennas", _INT),
    "bandwidth_hz": ("link", "bandwidth_hz", _FLOAT),
    "noise_psd_w_per_hz": ("link", "noise_psd_w_per_hz", _FLOAT),
    "target_ber": ("link", "target_ber", _FLOAT),
    "min_distance_m": ("geometry", "min_distance_m", _FLOAT),
    "max_distance_m": ("geometry", "max_distance_m", _FLOAT),
    "path_loss_exponent": ("geometry", "path_loss_exponent", _FLOAT),
    "shadow_std_db": ("geometry", "shadow_std_db", _FLOAT),
    "carrier_factor": ("geometry", "carrier_factor", _FLOAT),
    "num_users": ("system", "num_users", _INT),
    "max_power_w": ("system", "max_power_w", _FLOAT),
    "min_spectral_eff": ("system", "min_spectral_eff", _FLOAT),
    "qos_snr": ("system", "qos_snr", _FLOAT),
    "bisection_tol": ("solver", "bisection_tol", _FLOAT),
    "bisection_rtol": ("solver", "bisection_rtol", _FLOAT),
    "fixed_point_tol": ("solver", "fixed_point_tol", _FLOAT),
    "max_bisection_iters": ("solver", "max_bisection_iters", _INT),
    "max_inner_iters": ("solver", "max_inner_iters", _INT),
    "max_multiplier_iters": ("solver", "max_multiplier_iters", _INT),
    "multiplier_tol": ("solver", "multiplier_tol", _FLOAT),
    "step_theta": ("solver", "step_theta", _FLOAT),
    "step_lambda": ("solver", "step_lambda", _FLOAT),
    "power_floor_w": ("solver", "power_floor_w", _FLOAT),
    "budget": ("solver", "budget", _STR),
    "chi_variant": ("solver", "chi_variant", _STR),
    "sweep_variable": ("experiment", "sweep_variable", _STR),
    "num_trials": ("experiment", "num_trials", _INT),
    "master_seed": ("experiment", "master_seed", _INT),
    "output_path": ("experiment", "output_path", _STR),
    "circuit_power_mode": ("experiment", "circuit_power_mode", _STR),
    "workers": ("experiment", "workers", _INT),
}
# dBm keys convert to the listed watt key
_DBM_KEYS = {
    "max_power_dbm": "max_power_w",
    "noise_psd_dbm_per_hz": "noise_psd_w_per_hz",
    "circuit_power_dbm": "circuit_power_w",
}
_SPECIAL = {"circuit_power_w", "sweep_values", "sweep_unit"}


def _parse_lines(text: str, source: str):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value'", source=source, line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", source=source, line=lineno)
        if key in entries:
            raise ConfigError("duplicate key", source=source, line=lineno, field=key)
        entries[key] = (value, lineno)
    return entries


def _convert(parser, value, source, lineno, key):
    try:
        if parser is int:
            f = float(value)
            if not f.is_integer():
                raise ValueError
            return int(f)
        return parser(value)
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {parser.__name__}",
                          source=source, line=lineno, field=key) from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse a flat config document into an ``ExperimentConfig``."""
    entries = _parse_lines(text, source)
    sections = {"link": {}, "geometry": {}, "system": {}, "solver": {}, "experiment": {}}
    lines = {}
    circuit_w = None
    for key, (value, lineno) in entries.items():
        if key in _DBM_KEYS:
            target = _DBM_KEYS[key]
            if target in entries:
                raise ConfigError(f"both {key} and {target} given", source=source,
                                  line=lineno, field=key)
            w = dbm_to_w(_convert(float, value, source, lineno, key))
            if target == "circuit_power_w":
                circuit_w = (w, lineno, key)
            else:
                sec, attr, _ = _KEYS[target]
                sections[sec][attr] = w
                lines[attr] = (lineno, key)
        elif key == "circuit_power_w":
            circuit_w = (_convert(float, value, source, lineno, key), lineno, key)
        elif key in _SPECIAL:
            continue
        elif key in _KEYS:
            sec, attr, parser = _KEYS[key]
            sections[sec][attr] = _convert(parser, value, source, lineno, key)
            lines[attr] = (lineno, key)
        else:
            raise ConfigError("unknown key", source=source, line=lineno, field=key)

    exp = sections["experiment"]
    mode = exp.get("circuit_power_mode", "per_antenna")
    unit = "w"
    if "sweep_unit" in entries:
        unit, lineno = entries["sweep_unit"]
        unit = unit.lower()
        if unit not in ("w", "dbm"):
            raise ConfigError("sweep_unit must be w or dbm", source=source, line=lineno,
                              field="sweep_unit")
    if "sweep_values" in entries:
        value, lineno = entries["sweep_values"]
        items = [s.strip() for s in value.split(",") if s.strip()]
        vals = [_convert(float, s, source, lineno, "sweep_values") for s in items]
        if unit == "dbm":
            vals = [dbm_to_w(v) for v in vals]
        exp["sweep_values"] = tuple(vals)

    try:
        geometry = GeometryConfig(**sections["geometry"])
        link = LinkParams(**sections["link"])
        if circuit_w is not None:
            w, lineno, key = circuit_w
            lines["circuit_power_per_antenna_w"] = (lineno, key)
            per_ant = w if mode == "per_antenna" else w / link.num_antennas
            link = LinkParams(**{**sections["link"], "circuit_power_per_antenna_w": per_ant})
        solver = SolverConfig(**sections["solver"])
        system = SystemConfig(geometry=geometry, link=link, solver=solver, **sections["system"])
        return ExperimentConfig(base=system, **exp)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        lineno, key = _blame(str(exc), lines)
        raise ConfigError(str(exc), source=source, line=lineno, field=key) from None


def _blame(message, lines):
    # Point at the first config line whose field name shows up in the message.
    for attr, (lineno, key) in sorted(lines.items(), key=lambda kv: kv[1][0]):
        if attr in message or key in message:
            return lineno, key
    return None, None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))
