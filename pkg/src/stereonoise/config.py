"""Run configuration: defaults, config-file parsing, and flag resolution.

Precedence is command-line flag > config file > built-in default. The config
file is the same INI key/value document format as the dataset manifest, with
one [stereonoise] section whose keys match the long option names (hyphens
may be written as underscores).
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

from .errors import ConfigError

WORKERS_ENV_VAR = "STEREONOISE_WORKERS"

DEFAULTS = {
    "seed": 0,
    "bin_width": 0.25,
    "per_group": 200,
    "flat_total": 5000,
    "bracket": (0.0, 5.0),
    "tol": 1e-10,
    "window": (0.75, 3.00),
    "distances": (0.5, 3.0, 0.25),
    "pixels": 200,
    "frames": 300,
    "focal_length": 600.0,
    "baseline": 0.075,
    "control_range": 0.5,
    "intensity": 20000.0,
    "noise_floor_std": 0.0,
    "window_half_width": 10,
    "pattern": "speckle",
    "z_max": 4.0,
    "z_step": 0.05,
    "group_by": "distance",
}

# The six data-range windows reported side by side for fitted parameters.
STANDARD_WINDOWS = (
    (0.50, 2.00),
    (0.75, 2.00),
    (0.75, 2.25),
    (0.75, 2.50),
    (0.75, 2.75),
    (0.75, 3.00),
)


def parse_span(text: str) -> tuple[float, float]:
    """Parse "lo:hi" into a (lo, hi) pair."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"non-numeric span {text!r}") from exc
    if not lo < hi:
        raise ConfigError(f"span must satisfy lo < hi, got {text!r}")
    return lo, hi


def parse_grid(text: str) -> tuple[float, float, float]:
    """Parse "lo:hi:step" into grid bounds."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"non-numeric grid {text!r}") from exc
    if not (lo > 0 and hi >= lo and step > 0):
        raise ConfigError(f"grid must satisfy 0 < lo <= hi, step > 0: {text!r}")
    return lo, hi, step


def parse_windows(text: str) -> list[tuple[float, float]]:
    """Parse "standard" or a comma-separated list of lo:hi spans."""
    if text == "standard":
        return list(STANDARD_WINDOWS)
    return [parse_span(part) for part in text.split(",") if part]


def load_config_file(path: str | Path) -> dict:
    """Read a [stereonoise] INI section into a flat string dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file: {exc}") from exc
    if "stereonoise" not in cp:
        raise ConfigError("config file is missing the [stereonoise] section")
    return {k.replace("-", "_"): v for k, v in cp["stereonoise"].items()}


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be >= 1")
    return n


def resolve(cli_value, file_config: dict, key: str, cast=None):
    """Apply flag > config file > default precedence for one option."""
    if cli_value is not None:
        return cli_value
    if key in file_config:
        raw = file_config[key]
        try:
            return cast(raw) if cast else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value for {key}: {raw!r}") from exc
    return DEFAULTS.get(key)
