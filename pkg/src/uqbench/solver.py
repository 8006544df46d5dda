"""Semi-discrete central-upwind finite-volume solver for the radial
saturation transport equation, with second-order Runge-Kutta stepping.

``simulate`` is the deterministic "model run": a pure function mapping one
uncertain input to the 250-cell saturation profile at final time.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import _kernels
from .physics import (
    ConfigError,
    ScenarioConfig,
    UncertainInput,
    injection_velocity,
    max_flux_derivative,
)


class CFLError(ValueError):
    """Time step violates the CFL bound; carries the largest stable step."""

    def __init__(self, dt: float, suggested: float):
        super().__init__(f"dt={dt:g} violates the CFL condition; use dt <= {suggested:g}")
        self.suggested_dt = suggested


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Numerical settings of the transport solver."""

    cfl: float = 0.45
    limiter_theta: float = 1.3
    t_end: float | None = None        # defaults to the scenario T_end
    interior_source: bool = False     # sensitivity switch, see README

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.5:
            raise ConfigError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if not 1.0 <= self.limiter_theta <= 2.0:
            raise ConfigError(f"limiter_theta must lie in [1, 2], got {self.limiter_theta}")


@dataclasses.dataclass(frozen=True)
class Grid:
    """Uniform radial mesh on [r_min, r_max]."""

    n_cells: int
    r_faces: np.ndarray
    r_centers: np.ndarray
    dr: float

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, n_cells: int | None = None) -> "Grid":
        n = cfg.n_cells if n_cells is None else n_cells
        faces = np.linspace(cfg.r_min, cfg.r_max, n + 1)
        dr = (cfg.r_max - cfg.r_min) / n
        centers = 0.5 * (faces[:-1] + faces[1:])
        return cls(n, faces, centers, dr)


@dataclasses.dataclass(frozen=True)
class SaturationField:
    """Cell-averaged effective gas saturations at one time."""

    values: np.ndarray
    time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.size and (v.min() < -1e-6 or v.max() > 1.0 + 1e-6):
            raise ValueError(
                f"saturation outside [0, 1]: range [{v.min()}, {v.max()}]"
            )


def reconstruct(values: np.ndarray, theta: float,
                ghost_left: float | None = None,
                ghost_right: float | None = None):
    """Generalized-minmod interface states (S_minus, S_plus) at all faces.

    Boundary faces use the ghost values (defaults: zero-gradient); interior
    faces are independent of the ghost policy except for the first/last
    cell slopes.
    """
    values = np.ascontiguousarray(values, dtype=float)
    n = values.shape[0]
    gl = values[0] if ghost_left is None else float(ghost_left)
    gr = values[-1] if ghost_right is None else float(ghost_right)
    s_minus = np.empty(n + 1)
    s_plus = np.empty(n + 1)
    _kernels.reconstruct_faces(values, float(theta), gl, gr, s_minus, s_plus)
    return s_minus, s_plus


def numerical_flux(S_minus, S_plus, omega2: float, cfg: ScenarioConfig):
    """Central-upwind flux for interface states; scalar or elementwise."""
    sm = np.asarray(S_minus, dtype=float)
    sp = np.asarray(S_plus, dtype=float)
    if sm.ndim == 0:
        return _kernels.central_upwind_flux(float(sm), float(sp), float(omega2),
                                            cfg.mu_n, cfg.mu_w)
    out = np.empty(sm.shape)
    flat_m, flat_p, flat_o = sm.ravel(), np.broadcast_to(sp, sm.shape).ravel(), out.ravel()
    for i in range(flat_m.size):
        flat_o[i] = _kernels.central_upwind_flux(flat_m[i], flat_p[i],
                                                 float(omega2), cfg.mu_n, cfg.mu_w)
    return out


def stable_dt(omega: UncertainInput, cfg: ScenarioConfig, solver_cfg: SolverConfig,
              grid: Grid) -> float:
    """Largest time step allowed by the CFL condition (inf for zero rate)."""
    u = injection_velocity(omega.omega1, cfg)
    if u == 0.0:
        return math.inf
    speed = u * max_flux_derivative(omega.omega2, cfg) / (omega.omega3 * grid.r_centers[0])
    return solver_cfg.cfl * grid.dr / speed


def _source(cfg: ScenarioConfig, solver_cfg: SolverConfig) -> float:
    return cfg.Q if solver_cfg.interior_source else 0.0


def step_rk2(field: SaturationField, dt: float, omega: UncertainInput,
             cfg: ScenarioConfig, solver_cfg: SolverConfig,
             grid: Grid | None = None, return_ledger: bool = False):
    """One Heun step; raises :class:`CFLError` when dt is too large.

    With ``return_ledger`` the boundary-flux integrals (mass in, mass out)
    of the step are returned alongside the new field; the conservation
    ledger is exact only without the interior source term.
    """
    if grid is None:
        grid = Grid.from_config(cfg)
    limit = stable_dt(omega, cfg, solver_cfg, grid)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(dt, limit)
    u = injection_velocity(omega.omega1, cfg)
    values, mass_in, mass_out = _kernels.heun_step_row(
        np.ascontiguousarray(field.values, dtype=float), float(dt), u,
        float(omega.omega2), float(omega.omega3), grid.r_centers, grid.dr,
        solver_cfg.limiter_theta, cfg.S_left, cfg.mu_n, cfg.mu_w,
        _source(cfg, solver_cfg))
    new = SaturationField(values, field.time + dt)
    if return_ledger:
        return new, mass_in, mass_out
    return new


def time_steps(omega: UncertainInput, cfg: ScenarioConfig, solver_cfg: SolverConfig,
               grid: Grid, t_end: float | None = None):
    """Step count and size landing exactly on t_end."""
    T = solver_cfg.t_end if solver_cfg.t_end is not None else cfg.T_end
    if t_end is not None:
        T = t_end
    limit = stable_dt(omega, cfg, solver_cfg, grid)
    if not math.isfinite(limit):
        return 0, T
    n_steps = max(1, math.ceil(T / limit))
    return n_steps, T / n_steps


def simulate(omega: UncertainInput, cfg: ScenarioConfig,
             solver_cfg: SolverConfig | None = None,
             grid: Grid | None = None,
             initial: np.ndarray | None = None) -> SaturationField:
    """Run the transport problem to final time; deterministic in all inputs.

    The default initial state is zero gas saturation (aquifer filled with
    brine); ``initial`` overrides it for convergence studies.
    """
    if solver_cfg is None:
        solver_cfg = SolverConfig()
    if grid is None:
        grid = Grid.from_config(cfg)
    S0 = np.zeros(grid.n_cells) if initial is None else \
        np.ascontiguousarray(initial, dtype=float).copy()
    if S0.shape != (grid.n_cells,):
        raise ValueError(f"initial state must have length {grid.n_cells}")
    n_steps, dt = time_steps(omega, cfg, solver_cfg, grid)
    T = solver_cfg.t_end if solver_cfg.t_end is not None else cfg.T_end
    if n_steps == 0:
        return SaturationField(S0, T)
    u = injection_velocity(omega.omega1, cfg)
    values = _kernels.run_fixed(
        S0, n_steps, dt, u, float(omega.omega2), float(omega.omega3),
        grid.r_centers, grid.dr, solver_cfg.limiter_theta, cfg.S_left,
        cfg.mu_n, cfg.mu_w, _source(cfg, solver_cfg))
    return SaturationField(values, T)
