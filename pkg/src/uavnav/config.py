"""Filter configuration and its TOML representation.

A config file has up to four tables::

    [Q0]            # process noise intensities
    sigma_g2 = 1e-8
    [P0]            # initial error covariance (diagonal)
    sigma_dthI2 = [3.05e-4, 3.05e-4, 7.6e-3]
    [R0]            # measurement noise
    sigma_pG2 = 0.01
    [filter]
    variant = "RIEKF"

Unknown tables or keys raise :class:`ConfigError`.  Values may be scalars or
3-element arrays (per axis).
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .propagation import ProcessNoise
from .state import N_ERR, Variant

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEG = math.pi / 180.0

# Reference field strength used to express the magnetometer noise of the
# configuration (mgauss) on the unit-normalized measurement.
MAG_FIELD_MGAUSS = 500.0

PREDICTORS = ("none", "channel", "ls", "lstm")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _v3(x, y, z):
    return field(default_factory=lambda: [x, y, z])


@dataclass
class Q0:
    sigma_a2: float | list = 1e-3**2
    sigma_g2: float | list = 1e-4**2
    sigma_ba2: float | list = 1e-4**2
    sigma_bg2: float | list = 2e-5**2
    sigma_bm2: float | list = 2e-2**2  # accepted for table parity; no magnetometer-bias state
    sigma_tha2: float | list = 0.0175**2
    sigma_vw2: float | list = 0.01**2


@dataclass
class P0:
    sigma_dthI2: float | list = _v3((1 / 57.3) ** 2, (1 / 57.3) ** 2, (5 / 57.3) ** 2)
    sigma_dv2: float | list = 0.1**2
    sigma_dp2: float | list = 0.2**2
    sigma_dbg2: float | list = 4.8478e-5**2
    sigma_dba2: float | list = 0.05**2
    sigma_bm2: float | list = 2e-2**2  # ignored, see Q0
    sigma_dtha2: float | list = 0.035**2
    sigma_dvw2: float | list = 0.1**2


@dataclass
class R0:
    sigma_vG2: float | list = 0.01**2
    sigma_pG2: float | list = 0.1**2
    sigma_vTAS2: float = 0.1**2
    sigma_Hbaro2: float = 0.1**2
    sigma_m2: float = 0.1**2  # mgauss^2


@dataclass
class FilterOptions:
    variant: str = "RIEKF"
    # Probability for chi-square innovation gating; 0 disables gating.
    gate_probability: float = 0.999
    predictor: str = "channel"
    sigma_alpha: float = 1.0 * DEG
    sigma_beta: float = 2.7 * DEG
    sigma_roll: float = 2.7 * DEG
    use_gnss: bool = True
    use_baro: bool = True
    use_mag: bool = True
    use_tas: bool = True
    use_airflow: bool = True
    baro_ref_altitude: float = 0.0
    min_airspeed: float = 2.0
    lstm_weights: str = ""
    aero_coefficients: str = ""


@dataclass
class FilterConfig:
    Q0: Q0 = field(default_factory=Q0)
    P0: P0 = field(default_factory=P0)
    R0: R0 = field(default_factory=R0)
    filter: FilterOptions = field(default_factory=FilterOptions)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for section in (self.Q0, self.P0, self.R0):
            for f in fields(section):
                val = np.asarray(getattr(section, f.name), dtype=float)
                if val.shape not in ((), (3,)):
                    raise ConfigError(f"{f.name} must be a scalar or 3-vector")
                if not np.all(np.isfinite(val)) or np.any(val < 0):
                    raise ConfigError(f"{f.name} must be finite and non-negative")
        opts = self.filter
        try:
            Variant.parse(opts.variant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if opts.predictor not in PREDICTORS:
            raise ConfigError(f"predictor must be one of {PREDICTORS}, got {opts.predictor!r}")
        if not 0.0 <= opts.gate_probability < 1.0:
            raise ConfigError("gate_probability must lie in [0, 1)")
        for name in ("sigma_alpha", "sigma_beta", "sigma_roll"):
            if not getattr(opts, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def variant(self) -> Variant:
        return Variant.parse(self.filter.variant)

    def process_noise(self) -> ProcessNoise:
        q = self.Q0
        return ProcessNoise(
            sigma_g2=q.sigma_g2,
            sigma_a2=q.sigma_a2,
            sigma_bg2=q.sigma_bg2,
            sigma_ba2=q.sigma_ba2,
            sigma_tha2=q.sigma_tha2,
            sigma_vw2=q.sigma_vw2,
        )

    def initial_covariance(self) -> np.ndarray:
        p = self.P0
        blocks = [
            p.sigma_dthI2,
            p.sigma_dv2,
            p.sigma_dp2,
            p.sigma_dbg2,
            p.sigma_dba2,
            p.sigma_dtha2,
            p.sigma_dvw2,
        ]
        diag = np.concatenate([np.broadcast_to(np.asarray(b, dtype=float), (3,)) for b in blocks])
        assert diag.size == N_ERR
        return np.diag(diag)

    def mag_variance(self) -> float:
        """Magnetometer variance on the unit-normalized field vector."""
        return float(self.R0.sigma_m2) / MAG_FIELD_MGAUSS**2

    def gate_threshold(self, dim: int) -> float:
        if self.filter.gate_probability <= 0.0:
            return math.inf
        return _chi2_threshold(self.filter.gate_probability, dim)

    def with_options(self, **changes) -> FilterConfig:
        return replace(self, filter=replace(self.filter, **changes))

    def with_noise(self, section: str, **changes) -> FilterConfig:
        return replace(self, **{section: replace(getattr(self, section), **changes)})

    def to_dict(self) -> dict:
        return asdict(self)


_CHI2_CACHE: dict = {}


def _chi2_threshold(prob, dim):
    key = (prob, dim)
    if key not in _CHI2_CACHE:
        from scipy.stats import chi2

        _CHI2_CACHE[key] = float(chi2.ppf(prob, dim))
    return _CHI2_CACHE[key]


_SECTIONS = {"Q0": Q0, "P0": P0, "R0": R0, "filter": FilterOptions}


def config_from_dict(data: dict) -> FilterConfig:
    """Build a :class:`FilterConfig`, rejecting unknown tables and keys."""
    kwargs = {}
    for name, table in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config table [{name}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        cls = _SECTIONS[name]
        known = {f.name: f for f in fields(cls)}
        for key in table:
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key}")
        defaults = cls()
        for key, val in table.items():
            ref = getattr(defaults, key)
            if isinstance(ref, bool) and not isinstance(val, bool):
                raise ConfigError(f"{name}.{key} must be a boolean")
            if isinstance(ref, str) and not isinstance(val, str):
                raise ConfigError(f"{name}.{key} must be a string")
        kwargs[name] = cls(**table)
    return FilterConfig(**kwargs)


def load_config(path) -> FilterConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def _toml_value(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, str):
        return '"' + val.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(val, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(float(v)) for v in val) + "]"
    return repr(float(val))


def dump_config(cfg: FilterConfig) -> str:
    """TOML text that :func:`load_config` reads back to an equal config."""
    lines = []
    for name, table in cfg.to_dict().items():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {_toml_value(val)}" for key, val in table.items())
        lines.append("")
    return "\n".join(lines)
