"""Run configuration: documented defaults < INI file < command-line flags."""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "SUBCOMMANDS", "OUT_ENV", "load_config_file", "validate_config"]

SUBCOMMANDS = ("derive", "validate", "dispersion", "evolve", "walk", "units")
OUT_ENV = "DIRACWALK_OUT"


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


@dataclass
class RunConfig:
    subcommand: str = "validate"
    mu: float = 0.1
    epsilon: float = 0.0
    Lambda: int = 100
    nt: int = 256
    nx: int = 256
    seed: int = 42
    init: str = "delta"  # delta | packet
    t0: int | None = None  # None: lattice centre
    x0: int | None = None
    state: int = 1
    width: float = 2.0
    k_min: float = -1.0
    k_max: float = 1.0
    k_num: int = 201
    threshold: float = 0.3
    roi_t: tuple | None = None  # half-open (lo, hi); None: whole lattice
    roi_x: tuple | None = None
    n_walkers: int = 10000
    mass_ev: float = 510998.95
    out: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "diracwalk-out"))
    tolerances: dict = field(default_factory=dict)

    def site(self) -> tuple[int, int]:
        return (self.nt // 2 if self.t0 is None else self.t0,
                self.nx // 2 if self.x0 is None else self.x0)

    def echo(self) -> dict:
        """Config as recorded in the manifest (output location excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d["t0"], d["x0"] = self.site()
        d["roi_t"] = list(self.roi_t) if self.roi_t else None
        d["roi_x"] = list(self.roi_x) if self.roi_x else None
        return d


_INT = {"Lambda", "nt", "nx", "seed", "t0", "x0", "state", "k_num", "n_walkers"}
_FLOAT = {"mu", "epsilon", "width", "k_min", "k_max", "threshold", "mass_ev"}
_ALIASES = {"lambda": "Lambda"}


def parse_window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"window must look like LO:HI, got {text!r}") from exc
    return lo, hi


def parse_tolerance(text: str) -> tuple[str, float]:
    name, sep, val = text.partition("=")
    if not sep:
        raise ConfigError(f"tolerance override must look like NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(val)
    except ValueError as exc:
        raise ConfigError(f"tolerance {name!r} is not a number") from exc


def coerce(key: str, raw):
    key = _ALIASES.get(key, key)
    try:
        if key in _INT:
            return key, int(raw)
        if key in _FLOAT:
            return key, float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    if key in ("roi_t", "roi_x"):
        return key, parse_window(raw)
    if key in ("init", "out", "subcommand"):
        return key, str(raw)
    raise ConfigError(f"unknown configuration key {key!r}")


def load_config_file(path) -> dict:
    """Flat ``key = value`` file; an optional ``[run]`` header is accepted."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    extra = [s for s in cp.sections() if s != "run"]
    if extra:
        raise ConfigError(f"{path}: unknown sections {extra}")
    out = {}
    for k, v in cp["run"].items():
        if k.startswith("tol."):
            out.setdefault("tolerances", {})[k[4:]] = float(v)
            continue
        key, val = coerce(k, v)
        out[key] = val
    return out


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
    if not 0 < cfg.mu < 1:
        raise ConfigError(f"mu must lie in (0, 1), got {cfg.mu}")
    if not 0 <= cfg.epsilon < 1:
        raise ConfigError(f"epsilon must lie in [0, 1), got {cfg.epsilon}")
    if cfg.Lambda < 0:
        raise ConfigError("lambda must be >= 0")
    for name in ("nt", "nx"):
        n = getattr(cfg, name)
        if n < 4 or n % 2:
            raise ConfigError(f"{name} must be even and >= 4, got {n}")
    t0, x0 = cfg.site()
    if not (0 <= t0 < cfg.nt and 0 <= x0 < cfg.nx):
        raise ConfigError(f"initial site ({t0}, {x0}) is outside the lattice")
    if cfg.state not in (1, 2, 3, 4):
        raise ConfigError("state must be 1..4")
    if cfg.init not in ("delta", "packet"):
        raise ConfigError("init must be 'delta' or 'packet'")
    if cfg.width <= 0:
        raise ConfigError("width must be positive")
    if cfg.k_num < 1 or cfg.k_max < cfg.k_min:
        raise ConfigError("k grid needs k_num >= 1 and k_max >= k_min")
    if cfg.threshold <= 0:
        raise ConfigError("threshold must be positive")
    if cfg.n_walkers < 1:
        raise ConfigError("n_walkers must be >= 1")
    if cfg.mass_ev <= 0:
        raise ConfigError("mass must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    for win, n in ((cfg.roi_t, cfg.nt), (cfg.roi_x, cfg.nx)):
        if win is not None and not (0 <= win[0] < win[1] <= n):
            raise ConfigError(f"window {win} outside [0, {n})")
    return cfg
