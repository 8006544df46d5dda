"""Monte-Carlo reference statistics over the sample set."""

from __future__ import annotations

import dataclasses

import numpy as np

from .model import SolverModel
from .physics import UncertainInput
from .stochastic import SampleSet


@dataclasses.dataclass(frozen=True)
class MomentField:
    """Per-cell mean and standard deviation of the saturation."""

    mean: np.ndarray
    std: np.ndarray
    n_samples: int
    t: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.shape != std.shape:
            raise ValueError("mean and std must have the same shape")
        if np.any(std < 0.0):
            raise ValueError("std must be nonnegative")
        if np.any(mean < -1e-9) or np.any(mean > 1.0 + 1e-9):
            raise ValueError("mean saturation outside [0, 1]")


def moments_from_runs(runs: np.ndarray, t: float) -> MomentField:
    """Sample mean and unbiased (n-1) standard deviation per cell; a single
    run has zero std by convention."""
    runs = np.atleast_2d(runs)
    n = runs.shape[0]
    mean = runs.mean(axis=0)
    std = np.zeros_like(mean) if n == 1 else runs.std(axis=0, ddof=1)
    return MomentField(mean=mean, std=std, n_samples=n, t=t)


def run_reference(sample_set: SampleSet, model: SolverModel) -> MomentField:
    """Run the solver over the whole set; every run lands in the model's
    cache for surrogate reuse."""
    runs = model.run_many(sample_set.samples)
    return moments_from_runs(runs, model.cfg.T_end)


def single_factor_reference(sample_set: SampleSet, dim: int,
                            model: SolverModel) -> MomentField:
    """Reference with only dimension ``dim`` random; the other coordinates
    are frozen at their nominal values."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    nominal = UncertainInput.nominal(model.cfg).as_array()
    omegas = np.tile(nominal, (len(sample_set), 1))
    omegas[:, dim - 1] = sample_set.samples[:, dim - 1]
    runs = model.run_many(omegas)
    return moments_from_runs(runs, model.cfg.T_end)
