"""Declarative run configuration: INI-style sections with unit-suffixed keys.

Every physical quantity carries its unit in the key name (``gamma_r_per_ns``,
``period_t_ns``) so a config file can never be misread in different units.
Unknown keys, malformed values and out-of-range quantities are rejected with
the offending section and key named in the error.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .excitation import NonResonant, Resonant
from .kinetics import DEFAULT_N_LEVELS, RateParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_grid_axes"]


class ConfigError(ValueError):
    """A config file could not be parsed into valid run parameters."""


#: section -> {key: (parser, default)}
_SCHEMA = {
    "rates": {
        "gamma_r_per_ns": ("nonneg_float", 1.0),
        "gamma_nr_per_ns": ("nonneg_float", 0.1),
        "gamma_sf_per_ns": ("nonneg_float", 0.01),
        "purcell": ("nonneg_float", 1.0),
    },
    "schedule": {
        "period_t_ns": ("pos_float", 10.0),
        "n_cycles": ("pos_int", 1_000_000),
        "scheme": ("scheme", "nonresonant"),
        "p_in": ("nonneg_float", 0.01),
        "polarization": ("polarization", "up"),
    },
    "levels": {
        "n_levels": ("pos_int", DEFAULT_N_LEVELS),
    },
    "observables": {
        "decay_bin_ns": ("pos_float", 0.05),
        "g2_delta_t_ns": ("pos_float", 1.0),
        "g2_max_lag_ns": ("pos_float", 100.0),
        "blinking": ("bool", True),
    },
    "run": {
        "seed": ("nonneg_int", 1),
        "out_dir": ("str", "out"),
        "workers": ("pos_int", 1),
    },
    "sweep": {
        "cycles_per_point": ("pos_int", 100_000),
        "burn_in": ("nonneg_int", 1000),
    },
}

_GRID_AXES = {
    "gamma_nr_per_ns": "gamma_nr",
    "gamma_sf_per_ns": "gamma_sf",
    "purcell": "purcell",
    "period_t_ns": "period_t",
    "p_in": "p_in",
}


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == "nonneg_float":
            v = float(raw)
            if not (v >= 0.0 and np.isfinite(v)):
                raise ValueError("must be finite and >= 0")
            return v
        if kind == "pos_float":
            v = float(raw)
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError("must be finite and > 0")
            return v
        if kind == "pos_int":
            v = int(raw)
            if v < 1:
                raise ValueError("must be >= 1")
            return v
        if kind == "nonneg_int":
            v = int(raw)
            if v < 0:
                raise ValueError("must be >= 0")
            return v
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError("expected on/off")
        if kind == "scheme":
            low = raw.strip().lower()
            if low not in ("nonresonant", "resonant"):
                raise ValueError("expected 'nonresonant' or 'resonant'")
            return low
        if kind == "polarization":
            low = raw.strip().lower()
            if low not in ("up", "dn"):
                raise ValueError("expected 'up' or 'dn'")
            return low
        if kind == "str":
            return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where} = {raw!r}: {exc}") from None
    raise AssertionError(f"unknown schema kind {kind}")


@dataclass
class RunConfig:
    """Validated run parameters with paper-baseline defaults."""

    gamma_r: float = 1.0
    gamma_nr: float = 0.1
    gamma_sf: float = 0.01
    purcell: float = 1.0
    period_t: float = 10.0
    n_cycles: int = 1_000_000
    scheme_name: str = "nonresonant"
    p_in: float = 0.01
    polarization: str = "up"
    n_levels: int = DEFAULT_N_LEVELS
    decay_bin: float = 0.05
    g2_delta_t: float = 1.0
    g2_max_lag: float = 100.0
    blinking: bool = True
    seed: int = 1
    out_dir: str = "out"
    workers: int = 1
    cycles_per_point: int = 100_000
    burn_in: int = 1000
    grid_axes: dict = field(default_factory=dict)

    def rate_params(self) -> RateParams:
        return RateParams(self.gamma_r, self.gamma_nr, self.gamma_sf, self.purcell)

    def scheme(self):
        if self.scheme_name == "resonant":
            return Resonant(self.polarization)
        return NonResonant(self.p_in)

    def echo(self) -> dict:
        """Plain mapping of every setting, for run manifests."""
        out = {
            "gamma_r_per_ns": self.gamma_r,
            "gamma_nr_per_ns": self.gamma_nr,
            "gamma_sf_per_ns": self.gamma_sf,
            "purcell": self.purcell,
            "period_t_ns": self.period_t,
            "n_cycles": self.n_cycles,
            "scheme": self.scheme_name,
            "p_in": self.p_in,
            "polarization": self.polarization,
            "n_levels": self.n_levels,
            "decay_bin_ns": self.decay_bin,
            "g2_delta_t_ns": self.g2_delta_t,
            "g2_max_lag_ns": self.g2_max_lag,
            "blinking": self.blinking,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "cycles_per_point": self.cycles_per_point,
            "burn_in": self.burn_in,
        }
        if self.grid_axes:
            out["grid_axes"] = {k: list(v) for k, v in self.grid_axes.items()}
        return out


_FIELD_BY_KEY = {
    ("rates", "gamma_r_per_ns"): "gamma_r",
    ("rates", "gamma_nr_per_ns"): "gamma_nr",
    ("rates", "gamma_sf_per_ns"): "gamma_sf",
    ("rates", "purcell"): "purcell",
    ("schedule", "period_t_ns"): "period_t",
    ("schedule", "n_cycles"): "n_cycles",
    ("schedule", "scheme"): "scheme_name",
    ("schedule", "p_in"): "p_in",
    ("schedule", "polarization"): "polarization",
    ("levels", "n_levels"): "n_levels",
    ("observables", "decay_bin_ns"): "decay_bin",
    ("observables", "g2_delta_t_ns"): "g2_delta_t",
    ("observables", "g2_max_lag_ns"): "g2_max_lag",
    ("observables", "blinking"): "blinking",
    ("run", "seed"): "seed",
    ("run", "out_dir"): "out_dir",
    ("run", "workers"): "workers",
    ("sweep", "cycles_per_point"): "cycles_per_point",
    ("sweep", "burn_in"): "burn_in",
}


def _axis_values(raw: str, log_triple: bool, where: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        numbers = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{where} = {raw!r}: {exc}") from None
    if log_triple:
        if len(numbers) != 3:
            raise ConfigError(
                f"{where}: log axis expects 'start, stop, count', got {raw!r}"
            )
        start, stop, count = numbers
        if start <= 0 or stop <= 0 or count < 2 or count != int(count):
            raise ConfigError(
                f"{where}: log axis needs positive start/stop and integer count >= 2"
            )
        return tuple(float(v) for v in np.logspace(np.log10(start), np.log10(stop), int(count)))
    if not numbers:
        raise ConfigError(f"{where}: axis has no values")
    return tuple(numbers)


def parse_grid_axes(parser: configparser.ConfigParser) -> dict:
    """Axes from a [grid] section: comma lists, or '<axis>_log = start, stop, n'."""
    axes = {}
    if not parser.has_section("grid"):
        return axes
    for key, raw in parser.items("grid"):
        base = key[:-4] if key.endswith("_log") else key
        if base not in _GRID_AXES:
            raise ConfigError(
                f"[grid] {key}: unknown axis (allowed: {', '.join(_GRID_AXES)})"
            )
        axes[_GRID_AXES[base]] = _axis_values(
            raw, key.endswith("_log"), f"[grid] {key}"
        )
    return axes


def load_config(path: str | None = None, text: str | None = None) -> RunConfig:
    """Parse and validate a config file (or literal text) into a RunConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if text is not None:
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    elif path is not None:
        try:
            with open(path) as fh:
                parser.read_string(fh.read(), source=path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None

    config = RunConfig()
    for section in parser.sections():
        if section == "grid":
            continue
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}] (allowed: "
                f"{', '.join(list(_SCHEMA) + ['grid'])})"
            )
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"[{section}] {key}: unknown key (allowed: "
                    f"{', '.join(_SCHEMA[section])})"
                )
            kind, _ = _SCHEMA[section][key]
            value = _parse_value(kind, raw, f"[{section}] {key}")
            setattr(config, _FIELD_BY_KEY[(section, key)], value)
    config.grid_axes = parse_grid_axes(parser)
    return config
