"""Run configuration read from a TOML file.

Every section maps to a dataclass whose field names match the parameter
names of the module it drives. Unknown sections or keys are errors.
``reference()`` renders all defaults as a TOML document.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass(frozen=True)
class GridSection:
    lo: float = -20.0
    hi: float = 20.0
    n: int = 512
    ndim: int = 1
    # "euclidean", "minkowski", or an explicit list of +1/-1
    metric: object = "euclidean"
    backend: str = "spectral"


@dataclass(frozen=True)
class EvolutionSection:
    preset: str = "free-gaussian"  # free-gaussian | plane-wave
    sigma: float = 1.0
    center: float = 0.0
    wavenumber: float = 0.0
    ds: float = 1e-3
    n_steps: int = 2000
    scheme: str = "split-step"
    snapshot_stride: int = 500
    hbar: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class PotentialSection:
    kind: str = "zero"  # zero | harmonic | expression
    omega: float = 1.0
    expression: str = ""


@dataclass(frozen=True)
class TrajectoriesSection:
    n_traj: int = 1000
    seed: int = 0
    integrator: str = "rk4"
    record_stride: int = 1


@dataclass(frozen=True)
class OscillationSection:
    m1: float = 0.130855
    m2: float = 0.131141
    theta: float = 0.5922  # rad, tan^2 = 0.452
    L: float = 180.0  # km
    E_nu: float = 0.004  # GeV
    beta: float = 1.0
    axis: str = "L"  # sweep L [km] or E [GeV]
    start: float = 1.0
    stop: float = 500.0
    num: int = 200


@dataclass(frozen=True)
class MassesSection:
    dm2_21: float = 7.5e-5
    dm2_32: float = 2.32e-3
    tan2_theta12: float = 0.452
    model: str = "standard"


@dataclass(frozen=True)
class CosmoSection:
    m_nu: float = 0.185461
    lss_scale: float = 90.0
    number_density: float = 110e6
    mass_multiplier: float = 19.0
    band_lo: float = 0.8
    band_hi: float = 1.25


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    trajectories: TrajectoriesSection = field(default_factory=TrajectoriesSection)
    oscillation: OscillationSection = field(default_factory=OscillationSection)
    masses: MassesSection = field(default_factory=MassesSection)
    cosmo: CosmoSection = field(default_factory=CosmoSection)


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _coerce(section: str, key: str, default, value):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str) and key != "metric":
        ok = isinstance(value, str)
    else:
        ok = isinstance(value, (str, list))
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    return value


def from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for name, body in data.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        current = getattr(cfg, name)
        known = {f.name for f in fields(current)}
        updates = {}
        for key, value in body.items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}' in [{name}]")
            updates[key] = _coerce(name, key, getattr(current, key), value)
        cfg = replace(cfg, **{name: replace(current, **updates)})
    return cfg


def load(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def reference(cfg: RunConfig | None = None) -> str:
    """TOML text listing every section and key with its value."""
    cfg = cfg or RunConfig()
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        section = getattr(cfg, name)
        out.extend(f"{f.name} = {_toml_value(getattr(section, f.name))}" for f in fields(section))
        out.append("")
    return "\n".join(out)
