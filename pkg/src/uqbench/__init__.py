"""Benchmark suite comparing data-driven UQ methods on a radial
CO2-injection two-phase flow model."""

__version__ = "0.1.0"

from .physics import ScenarioConfig, UncertainInput  # noqa: F401
from .solver import Grid, SaturationField, SolverConfig, simulate  # noqa: F401
