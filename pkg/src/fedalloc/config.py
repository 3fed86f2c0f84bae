"""Flat key=value configuration files.

Format: one `key = value` per line, `#` starts a comment, blank lines are
fine. Unknown keys are rejected; anything missing takes the documented
default (the reference simulation setup). dBm and Hz values enter here —
the library below this layer is SI-only.
"""

from __future__ import annotations

from .bcd import BcdParams
from .errors import ConfigError
from .model import Weights, normalize_weights
from .topology import ScenarioSpec

# (default, type); type "float_or_none" admits `none` for optional knobs
DEFAULTS: dict[str, tuple] = {
    "n_devices": (50, int),
    "bandwidth_hz": (20e6, float),
    "n0_dbm_per_hz": (-174.0, float),
    "kappa": (1e-28, float),
    "r_local": (10, int),
    "r_global": (100, int),
    "s_min": (160.0, float),
    "s_max": (640.0, float),
    "s_standard": (160.0, float),
    "d_bits": (28100.0, float),
    "samples_per_device": (500, int),
    "cycles_min": (1e4, float),
    "cycles_max": (3e4, float),
    "p_min_dbm": (0.0, float),
    "p_max_dbm": (12.0, float),
    "f_min_hz": (0.0, float),
    "f_max_hz": (2e9, float),
    "area_radius_m": (250.0, float),
    "shadow_sigma_db": (8.0, float),
    "w1": (0.5, float),
    "w2": (0.5, float),
    "rho": (1.0, float),
    "seed": (0, int),
    "eps0": (1e-4, float),
    "max_bcd_rounds": (30, int),
    "xi": (0.5, float),
    "eps_newton": (0.01, float),
    "max_newton_iters": (100, int),
    "deadline_total_s": (None, "float_or_none"),
    "replications": (20, int),
}


def _coerce(key: str, raw: str):
    _, kind = DEFAULTS[key]
    if kind == "float_or_none":
        if raw.lower() in ("none", ""):
            return None
        kind = float
    try:
        if kind is int:
            as_float = float(raw)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}")


def parse_config_text(text: str) -> dict:
    """Parse config file contents into a fully-defaulted dict."""
    values = {key: default for key, (default, _) in DEFAULTS.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return parse_config_text(text)


def scenario_from_config(values: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec(
            seed=values["seed"],
            n_devices=values["n_devices"],
            bandwidth_hz=values["bandwidth_hz"],
            n0_dbm_per_hz=values["n0_dbm_per_hz"],
            kappa=values["kappa"],
            r_local=values["r_local"],
            r_global=values["r_global"],
            s_min=values["s_min"],
            s_max=values["s_max"],
            s_standard=values["s_standard"],
            d_bits=values["d_bits"],
            samples_per_device=values["samples_per_device"],
            cycles_min=values["cycles_min"],
            cycles_max=values["cycles_max"],
            p_min_dbm=values["p_min_dbm"],
            p_max_dbm=values["p_max_dbm"],
            f_min_hz=values["f_min_hz"],
            f_max_hz=values["f_max_hz"],
            area_radius_m=values["area_radius_m"],
            shadow_sigma_db=values["shadow_sigma_db"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def weights_from_config(values: dict) -> Weights:
    try:
        return normalize_weights(values["w1"], values["w2"], values["rho"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def bcd_params_from_config(values: dict) -> BcdParams:
    return BcdParams(
        eps0=values["eps0"],
        max_rounds=values["max_bcd_rounds"],
        xi=values["xi"],
        eps_newton=values["eps_newton"],
        max_newton_iters=values["max_newton_iters"],
    )
