"""Constitutive laws and closed-form pressure/velocity relations of the
radial fractional-flow model.

All quantities are SI internally.  Config files use the field units listed
in the README mapping table (bar, days, m3/day) and are converted on load.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np
import yaml

BAR = 1.0e5  # Pa
DAY = 86400.0  # s


class ConfigError(ValueError):
    """Raised when a scenario or solver configuration violates an invariant."""


class DomainError(ValueError):
    """Raised when an argument lies outside its physical domain."""


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """Deterministic constants of the injection scenario (SI units)."""

    rho_g: float = 479.0              # CO2 density [kg/m3]
    rho_w: float = 1045.0             # brine density [kg/m3]
    mu_n: float = 3.950e-5            # CO2 viscosity [Pa s]
    mu_w: float = 2.535e-4            # brine viscosity [Pa s]
    K_A: float = 2.0e-14              # aquifer permeability [m2]
    phi0: float = 0.15                # porosity [-]
    Sr_w: float = 0.2                 # brine residual saturation [-]
    Sr_n: float = 0.05                # CO2 residual saturation [-]
    Q: float = 1600.0 / DAY           # volumetric injection rate [m3/s]
    r_min: float = 1.0                # inner domain radius [m]
    r_max: float = 500.0              # outer domain radius [m]
    T_end: float = 100.0 * DAY        # simulation time [s]
    S_left: float = 0.8               # left-boundary effective saturation [-]
    p_max: float = 320.0 * BAR        # injection pressure [Pa]
    p_min: float = 300.0 * BAR        # right-boundary pressure [Pa]
    lambda_mean: float = 1.0e4        # mean mobility [1/(Pa s)]
    n_cells: int = 250

    def __post_init__(self):
        positive = {
            "rho_g": self.rho_g, "rho_w": self.rho_w, "mu_n": self.mu_n,
            "mu_w": self.mu_w, "K_A": self.K_A, "phi0": self.phi0,
            "Q": self.Q, "r_min": self.r_min, "r_max": self.r_max,
            "T_end": self.T_end, "S_left": self.S_left,
            "p_max": self.p_max, "p_min": self.p_min,
            "lambda_mean": self.lambda_mean,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if self.Sr_w < 0.0 or self.Sr_n < 0.0 or self.Sr_w + self.Sr_n >= 1.0:
            raise ConfigError(
                f"residual saturations must satisfy 0 <= Sr_w + Sr_n < 1, "
                f"got Sr_w={self.Sr_w}, Sr_n={self.Sr_n}"
            )
        if self.p_max <= self.p_min:
            raise ConfigError("p_max must exceed p_min")
        if self.r_max <= self.r_min:
            raise ConfigError("r_max must exceed r_min")
        if self.n_cells < 1:
            raise ConfigError("n_cells must be at least 1")

    # Config-file keys (README documents the mapping to the parameter table)
    # together with the unit conversion applied on load.
    _FILE_KEYS = {
        "co2_density": ("rho_g", 1.0),
        "brine_density": ("rho_w", 1.0),
        "co2_viscosity": ("mu_n", 1.0),
        "brine_viscosity": ("mu_w", 1.0),
        "aquifer_permeability": ("K_A", 1.0),
        "porosity": ("phi0", 1.0),
        "brine_residual_saturation": ("Sr_w", 1.0),
        "co2_residual_saturation": ("Sr_n", 1.0),
        "injection_rate": ("Q", 1.0 / DAY),          # m3/day -> m3/s
        "inner_radius": ("r_min", 1.0),
        "domain_radius": ("r_max", 1.0),
        "simulation_time": ("T_end", DAY),           # days -> s
        "left_boundary_saturation": ("S_left", 1.0),
        "injection_pressure": ("p_max", BAR),        # bar -> Pa
        "right_boundary_pressure": ("p_min", BAR),   # bar -> Pa
        "mean_mobility": ("lambda_mean", 1.0),
        "n_cells": ("n_cells", None),                # integer, no scaling
    }

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        """Load a scenario from a YAML file with table-unit keys."""
        raw = yaml.safe_load(Path(path).read_text())
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"scenario file {path} must contain a mapping")
        return cls.from_dict(raw, source=str(path))

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<dict>") -> "ScenarioConfig":
        kwargs = {}
        for key, value in raw.items():
            if key not in cls._FILE_KEYS:
                raise ConfigError(f"unknown scenario key {key!r} in {source}")
            field, scale = cls._FILE_KEYS[key]
            kwargs[field] = int(value) if scale is None else float(value) * scale
        return cls(**kwargs)

    def to_file_dict(self) -> dict:
        """Inverse of :meth:`from_dict` (values back in table units)."""
        out = {}
        for key, (field, scale) in self._FILE_KEYS.items():
            value = getattr(self, field)
            out[key] = value if scale is None else value / scale
        return out


@dataclasses.dataclass(frozen=True)
class UncertainInput:
    """One stochastic sample: injection-rate perturbation, relative
    permeability exponent and porosity."""

    omega1: float
    omega2: float
    omega3: float

    def __post_init__(self):
        # omega1 = -1 (zero injection) is the admissible degenerate limit.
        if not self.omega1 >= -1.0:
            raise ConfigError(f"omega1 must be at least -1, got {self.omega1}")
        if not self.omega2 > 0.0:
            raise ConfigError(f"omega2 must be positive, got {self.omega2}")
        if not 0.0 < self.omega3 < 1.0:
            raise ConfigError(f"omega3 must lie in (0, 1), got {self.omega3}")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega1, self.omega2, self.omega3])

    @classmethod
    def nominal(cls, cfg: ScenarioConfig) -> "UncertainInput":
        """Deterministic base case: unperturbed rate, quadratic relative
        permeabilities, table porosity."""
        return cls(0.0, 2.0, cfg.phi0)


def effective_saturation(S, Sr):
    """Rescale a phase saturation by its residual, clamped to [0, 1]."""
    Sr = np.asarray(Sr, dtype=float)
    if np.any(Sr >= 1.0) or np.any(Sr < 0.0):
        raise ConfigError(f"residual saturation must lie in [0, 1), got {Sr}")
    return np.clip((np.asarray(S, dtype=float) - Sr) / (1.0 - Sr), 0.0, 1.0)


def rel_perm(S_hat, omega2):
    """Relative permeabilities (kr_n, kr_w) of the gas/brine pair.

    ``S_hat`` is the effective gas saturation; both curves use the same
    uncertain exponent.  Inputs are clamped to [0, 1] to guard against
    reconstruction overshoot.
    """
    omega2 = np.asarray(omega2, dtype=float)
    if np.any(omega2 <= 0.0):
        raise ConfigError(f"omega2 must be positive, got {omega2}")
    s = np.clip(np.asarray(S_hat, dtype=float), 0.0, 1.0)
    return s ** omega2, (1.0 - s) ** omega2


def fractional_flow(S_hat, omega2, cfg: ScenarioConfig):
    """Gas fractional flow f_g = lambda_n / (lambda_n + lambda_w)."""
    kr_n, kr_w = rel_perm(S_hat, omega2)
    mob_n = kr_n / cfg.mu_n
    mob_w = kr_w / cfg.mu_w
    total = mob_n + mob_w
    # Both mobilities vanish only for degenerate inputs; return the upwind limit.
    out = np.where(total > 0.0, mob_n / np.where(total > 0.0, total, 1.0), 0.0)
    return out if out.ndim else float(out)


def flux_derivative(S_hat, omega2, cfg: ScenarioConfig):
    """d f_g / d S_hat, used for the local wave speeds and the CFL bound."""
    omega2 = np.asarray(omega2, dtype=float)
    s = np.clip(np.asarray(S_hat, dtype=float), 0.0, 1.0)
    mob_n = s ** omega2 / cfg.mu_n
    mob_w = (1.0 - s) ** omega2 / cfg.mu_w
    # s**(omega2-1) is singular at 0 for omega2 < 1; the valid sample range
    # keeps omega2 >= 1 where the one-sided limits are finite.
    with np.errstate(divide="ignore", invalid="ignore"):
        dmob_n = omega2 * s ** (omega2 - 1.0) / cfg.mu_n
        dmob_w = -omega2 * (1.0 - s) ** (omega2 - 1.0) / cfg.mu_w
    dmob_n = np.where(np.isfinite(dmob_n), dmob_n, 0.0)
    dmob_w = np.where(np.isfinite(dmob_w), dmob_w, 0.0)
    total = mob_n + mob_w
    out = (dmob_n * mob_w - mob_n * dmob_w) / total ** 2
    return out if out.ndim else float(out)


def max_flux_derivative(omega2: float, cfg: ScenarioConfig, n: int = 2001) -> float:
    """Max of |f_g'| over S_hat in [0, 1], by dense sampling."""
    s = np.linspace(0.0, 1.0, n)
    return float(np.max(np.abs(flux_derivative(s, omega2, cfg))))


def compute_cp(cfg: ScenarioConfig) -> float:
    """Dimensionless pressure constant fixing p(r_max) = p_min at omega1 = 0."""
    if cfg.r_max <= 1.0:
        raise DomainError(f"r_max must exceed 1 m for the log profile, got {cfg.r_max}")
    return (cfg.p_max - cfg.p_min) * cfg.K_A * cfg.lambda_mean / (cfg.Q * math.log(cfg.r_max))


def injection_velocity(omega1: float, cfg: ScenarioConfig) -> float:
    """Transport coefficient u = cp * Q * (1 + omega1)."""
    return compute_cp(cfg) * cfg.Q * (1.0 + omega1)


def pressure_profile(r, omega1: float, cfg: ScenarioConfig):
    """Radial pressure p(r) = p_max - u/(lambda K_A) * ln r, r in [1, r_max]."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 1.0) or np.any(r > cfg.r_max):
        raise DomainError(f"radius outside [1, {cfg.r_max}]")
    u = injection_velocity(omega1, cfg)
    p = cfg.p_max - u / (cfg.lambda_mean * cfg.K_A) * np.log(r)
    return p if p.ndim else float(p)
