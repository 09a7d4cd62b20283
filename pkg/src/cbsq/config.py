"""Run configuration: key = value documents with normative defaults.

A config document is plain text, one ``key = value`` assignment per line;
``#`` starts a comment.  Unknown keys are rejected with line/column
positions.  ``parse_config(emit_config(cfg))`` round-trips exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ConfigError
from .spectral import PhysicsParams

MODES = ("linear", "simulate", "sweep", "verify-multiplier", "fit-decay")
SCHEMES = ("ifrk4", "midpoint")


@dataclass
class RunConfig:
    mode: str = "simulate"
    # lattice
    kmax: int = 32
    jmax: int = 256
    ly: float = 16.0 * math.pi
    # physics
    nu: float = 1e-3
    mu: float = 1e-3
    sigma: int = 0
    b: float = 1.5
    beta: float = 2.0 / 3.0
    # None means "derived": delta = beta + 1/3, alpha = delta - beta + 2/3
    alpha: float | None = None
    delta: float | None = None
    epsilon: float = 0.05
    # stepper
    scheme: str = "ifrk4"
    dt_max: float = 0.05
    cfl_safety: float = 0.4
    # horizon
    t_end: float = 10.0
    horizon_efolds: float = 4.0
    # io
    output_dir: str = "out"
    report_every: float = 0.1
    checkpoint_every: float = 0.0
    # misc
    seed: int = 0
    growth_factor: float = 4.0

    def __post_init__(self):
        if self.delta is None:
            self.delta = self.beta + 1.0 / 3.0
        if self.alpha is None:
            self.alpha = self.delta - self.beta + 2.0 / 3.0

    def physics(self) -> PhysicsParams:
        return PhysicsParams(nu=self.nu, mu=self.mu, sigma=self.sigma, b=self.b,
                             beta=self.beta, alpha=self.alpha, delta=self.delta)


_FIELDS = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"kmax", "jmax", "sigma", "seed"}
_STR_KEYS = {"mode", "scheme", "output_dir"}


def _parse_value(key: str, raw: str, line_no: int, col: int):
    def err(msg):
        return ConfigError(f"line {line_no}, col {col}: {msg}")

    if key in _STR_KEYS:
        val = raw.strip().strip('"')
        if key == "mode" and val not in MODES:
            raise err(f"mode must be one of {MODES}, got {val!r}")
        if key == "scheme" and val not in SCHEMES:
            raise err(f"scheme must be one of {SCHEMES}, got {val!r}")
        return val
    if key in _INT_KEYS:
        try:
            return int(raw.strip())
        except ValueError:
            raise err(f"expected integer for {key!r}, got {raw.strip()!r}") from None
    try:
        return float(raw.strip())
    except ValueError:
        raise err(f"expected number for {key!r}, got {raw.strip()!r}") from None


def parse_config(text: str, override_index_check: bool = False,
                 warn=None) -> RunConfig:
    """Parse a config document; omitted keys take the documented defaults."""
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        # allow comma-separated assignments on one line
        for chunk in body.split(","):
            if not chunk.strip():
                continue
            if "=" not in chunk:
                col = line.index(chunk.strip()) + 1
                raise ConfigError(f"line {line_no}, col {col}: expected 'key = value'")
            key_part, val_part = chunk.split("=", 1)
            key = key_part.strip()
            col = line.index(key) + 1 if key in line else 1
            if key not in _FIELDS:
                raise ConfigError(f"line {line_no}, col {col}: unknown key {key!r}")
            values[key] = _parse_value(key, val_part, line_no, col)
    # derived alpha/delta defaults resolve against the parsed beta
    cfg = RunConfig(**values)
    validate_config(cfg, override_index_check=override_index_check, warn=warn)
    return cfg


def validate_config(cfg: RunConfig, override_index_check: bool = False,
                    warn=None) -> None:
    if cfg.kmax < 1 or cfg.jmax < 1 or cfg.ly <= 0:
        raise ConfigError("lattice parameters require kmax,jmax >= 1 and ly > 0")
    if cfg.nu <= 0 or cfg.mu <= 0:
        raise ConfigError("nu and mu must be positive")
    if cfg.sigma not in (0, 1):
        raise ConfigError("sigma must be 0 or 1")
    if cfg.dt_max <= 0 or not 0 < cfg.cfl_safety <= 1:
        raise ConfigError("dt_max must be > 0 and cfl_safety in (0, 1]")
    if cfg.report_every <= 0:
        raise ConfigError("report_every must be positive")
    bad = cfg.physics().index_violations()
    if bad:
        if override_index_check:
            if warn is not None:
                for msg in bad:
                    warn(f"index condition overridden: {msg}")
        else:
            raise ConfigError("index conditions violated: " + "; ".join(bad))


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, str):
            lines.append(f"{f.name} = {val}")
        elif isinstance(val, float):
            lines.append(f"{f.name} = {val!r}")
        else:
            lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
