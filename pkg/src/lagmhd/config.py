"""Scenario configuration files (TOML).

Sections and keys, with defaults::

    [params]    lambda = 1, mu = 1, nu = 1, gamma = 5/3
    [grid]      L (required), N (required)
    [initial]   kind (required) and the InitialFamily fields
    [stepping]  dt_max = 1e-2, cfl = 0.5, t_end = 1, output_every = 10
    [output]    dir = "out", snapshots = true
    [verify]    energy_tol = 1e-3, definitional_tol = 1e-10, residuals = true,
                reconstructions = true, monitors = true, mask_rel = 1e-8

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .fluxes import DEFAULT_MASK_REL
from .model import Grid, InitialFamily, Params
from .stepper import StepConfig


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    snapshots: bool = True


@dataclass(frozen=True)
class VerifyConfig:
    energy_tol: float = 1e-3
    definitional_tol: float = 1e-10
    residuals: bool = True
    reconstructions: bool = True
    monitors: bool = True
    mask_rel: float = DEFAULT_MASK_REL

    def __post_init__(self):
        for name in ("energy_tol", "definitional_tol", "mask_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class RunConfig:
    name: str
    params: Params
    grid: Grid
    initial: InitialFamily
    stepping: StepConfig
    output: OutputConfig = field(default_factory=OutputConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def as_dict(self) -> dict:
        """Fully resolved configuration, defaults included, keyed like the TOML file."""
        out = {"name": self.name}
        for section, (cls, names) in _SECTIONS.items():
            obj = getattr(self, section)
            out[section] = {key: _plain(getattr(obj, attr)) for key, attr in names.items()}
        return out


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


def _identity(cls):
    return {f.name: f.name for f in fields(cls)}


# TOML key -> dataclass attribute, per section
_SECTIONS = {
    "params": (Params, {"lambda": "lam", "mu": "mu", "nu": "nu", "gamma": "gamma"}),
    "grid": (Grid, {"L": "half_width", "N": "n_nodes"}),
    "initial": (InitialFamily, _identity(InitialFamily)),
    "stepping": (StepConfig, {"dt_max": "dt_max", "cfl": "cfl_fraction", "t_end": "t_end",
                              "output_every": "output_every",
                              "rho_floor_policy": "rho_floor_policy"}),
    "output": (OutputConfig, _identity(OutputConfig)),
    "verify": (VerifyConfig, _identity(VerifyConfig)),
}
_REQUIRED = {"grid": ("L", "N"), "initial": ("kind",)}


def _unknown_key_message(section: str, key: str) -> str:
    if section == "params" and key.lower() in ("kappa", "heat_conductivity"):
        return (f"[params] {key!r} is not supported: this model has zero heat conductivity, "
                f"so the pressure equation carries no conduction term")
    allowed = ", ".join(_SECTIONS[section][1])
    return f"unknown key {key!r} in [{section}]; allowed keys: {allowed}"


def _build(section: str, table: dict):
    cls, names = _SECTIONS[section]
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    for key in table:
        if key not in names:
            raise ConfigError(_unknown_key_message(section, key))
    for key in _REQUIRED.get(section, ()):
        if key not in table:
            raise ConfigError(f"[{section}] is missing required key {key!r}")
    kwargs = {names[key]: value for key, value in table.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def parse_config(text: str, name: str = "scenario") -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{name}: TOML parse error: {exc}") from exc
    unknown = [s for s in data if s not in _SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]; allowed: {', '.join(_SECTIONS)}")
    for section in ("grid", "initial"):
        if section not in data:
            raise ConfigError(f"missing required section [{section}]")
    built = {section: _build(section, data.get(section, {})) for section in _SECTIONS}
    return RunConfig(name=name, **built)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, name=path.stem)


def scenario_dir() -> Path:
    """Directory holding the shipped scenario files."""
    return Path(__file__).with_name("scenarios")


def shipped_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(scenario_dir().glob("*.toml"))}


def resolve_scenario(arg: str) -> Path:
    """A path to a TOML file, or the name of a shipped scenario."""
    path = Path(arg)
    if path.exists():
        return path
    shipped = shipped_scenarios()
    if arg in shipped:
        return shipped[arg]
    raise ConfigError(f"no config file {arg!r} and no shipped scenario of that name "
                      f"(shipped: {', '.join(shipped)})")

