"""Run configuration: a flat INI format with CLI --key=value overrides."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field as dc_field, asdict

from ..basis import MAX_DEGREE

LIMITER_CHOICES = ("mr", "kxrcf", "fs", "tvb", "none")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str = ""
    degree: int = 2
    limiter: str = "mr"
    c_k: float = 3.0
    characteristic: str = "gradient"
    kxrcf_threshold: float = 1.0
    fs_threshold: float = 0.1
    tvb_m: float = 0.0
    positivity: bool = True
    alpha_mode: str = "global"
    cfl: float | None = None
    dt_law_c: float | None = None
    dt_law_q: float | None = None
    end_time: float | None = None
    n_frames: int = 0
    output_dir: str = ""
    workers: int = 1              # reserved; compute is serial-vectorized
    seed: int = 0                 # reserved for future use
    record_history: bool | None = None    # default: 1D yes, 2D no
    save_coefficients: bool = False
    scale_factor: float = 1.0     # multiplies the initial data (scale tests)
    corner_fix: bool = True
    paper_order_codes: bool = False
    mesh_kind: str = ""           # '', 'quad', 'tri', 'file'
    mesh_n: int = 0
    mesh_nx: int = 0
    mesh_ny: int = 0
    mesh_edge: float = 0.0
    mesh_file: str = ""

    def validate(self, dim):
        if self.limiter not in LIMITER_CHOICES:
            raise ConfigError(f"limiter must be one of {LIMITER_CHOICES}")
        if self.degree < 0 or self.degree > MAX_DEGREE[dim]:
            raise ConfigError(
                f"degree {self.degree} out of range 0..{MAX_DEGREE[dim]} in {dim}D")
        if self.c_k <= 0:
            raise ConfigError("c_k must be positive")
        if self.alpha_mode not in ("global", "local"):
            raise ConfigError("flux alpha mode must be 'global' or 'local'")
        if (self.dt_law_c is None) != (self.dt_law_q is None):
            raise ConfigError("dt law needs both dt_law_c and dt_law_q")
        if self.limiter == "tvb" and dim != 1:
            raise ConfigError("the TVB comparison limiter is 1D only")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


_BOOL_KEYS = {"positivity", "record_history", "save_coefficients",
              "corner_fix", "paper_order_codes"}
_INT_KEYS = {"degree", "n_frames", "workers", "seed", "mesh_n", "mesh_nx",
             "mesh_ny"}
_FLOAT_KEYS = {"c_k", "kxrcf_threshold", "fs_threshold", "tvb_m", "cfl",
               "dt_law_c", "dt_law_q", "end_time", "scale_factor", "mesh_edge"}


def _coerce(key, value):
    if value is None or value == "":
        return None
    if key in _BOOL_KEYS:
        v = str(value).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {value!r}")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as err:
        raise ConfigError(f"bad value for {key}: {value!r}") from err
    return str(value)


def load_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an INI file plus --key=value overrides."""
    cfg = RunConfig()
    fields = set(cfg.__dataclass_fields__)
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            prefix = "mesh_" if section == "mesh" else ""
            for key, value in parser.items(section):
                name = prefix + key if prefix and not key.startswith("mesh_") else key
                if name not in fields:
                    raise ConfigError(f"unknown config key {section}.{key}")
                val = _coerce(name, value)
                if val is not None:
                    setattr(cfg, name, val)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        key, value = item.split("=", 1)
        key = key.lstrip("-").replace("-", "_")
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        val = _coerce(key, value)
        setattr(cfg, key, val)
    if not cfg.output_dir:
        cfg.output_dir = os.environ.get("MRDG_OUTPUT_DIR", "runs")
    return cfg


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
