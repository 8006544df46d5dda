"""The shared "model run" abstraction: a cached, instrumented wrapper
around the deterministic solver, with an optional process pool.

``run_count`` counts actual solver executions (cache misses), which is the
cost measure of the benchmark; the pool width comes from UQBENCH_WORKERS.
"""

from __future__ import annotations

import concurrent.futures
import json
import os

import numpy as np

from .cache import RunCache
from .physics import ScenarioConfig, UncertainInput
from .solver import Grid, SolverConfig, simulate


def default_workers() -> int:
    env = os.environ.get("UQBENCH_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _config_signature(cfg: ScenarioConfig, solver_cfg: SolverConfig, n_cells: int) -> str:
    payload = {
        "scenario": {k: repr(v) for k, v in vars(cfg).items()},
        "solver": {k: repr(v) for k, v in vars(solver_cfg).items()},
        "n_cells": n_cells,
    }
    return json.dumps(payload, sort_keys=True)


def _run_chunk(args):
    cfg, solver_cfg, n_cells, omegas = args
    grid = Grid.from_config(cfg, n_cells)
    out = np.empty((len(omegas), n_cells))
    for i, om in enumerate(omegas):
        out[i] = simulate(UncertainInput(*om), cfg, solver_cfg, grid=grid).values
    return out


class ModelRunError(RuntimeError):
    """Solver failure annotated with the offending sample."""

    def __init__(self, omega, cause: BaseException):
        super().__init__(f"solver failed at omega={tuple(omega)}: {cause}")
        self.omega = tuple(float(x) for x in omega)


class SolverModel:
    """Callable omega -> saturation vector, with run cache and counter."""

    def __init__(self, cfg: ScenarioConfig, solver_cfg: SolverConfig | None = None,
                 n_cells: int | None = None, cache: RunCache | None = None,
                 workers: int | None = None):
        self.cfg = cfg
        self.solver_cfg = solver_cfg if solver_cfg is not None else SolverConfig()
        self.grid = Grid.from_config(cfg, n_cells)
        self.cache = cache if cache is not None else RunCache()
        self.workers = default_workers() if workers is None else max(1, workers)
        self.signature = _config_signature(cfg, self.solver_cfg, self.grid.n_cells)
        self.run_count = 0

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    def key(self, omega) -> str:
        om = omega.as_array() if isinstance(omega, UncertainInput) else omega
        return RunCache.key_for(om, self.signature)

    def __call__(self, omega) -> np.ndarray:
        om = omega if isinstance(omega, UncertainInput) else UncertainInput(*omega)
        key = self.key(om)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        try:
            values = simulate(om, self.cfg, self.solver_cfg, grid=self.grid).values
        except Exception as exc:
            raise ModelRunError(om.as_array(), exc) from exc
        self.run_count += 1
        self.cache.put(key, values)
        return values

    def run_many(self, omegas) -> np.ndarray:
        """Evaluate a batch of samples, dispatching cache misses to the pool."""
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        out = np.empty((omegas.shape[0], self.n_cells))
        miss_idx = []
        for i, om in enumerate(omegas):
            cached = self.cache.get(self.key(om))
            if cached is not None:
                out[i] = cached
            else:
                miss_idx.append(i)
        if not miss_idx:
            return out
        misses = omegas[miss_idx]
        if self.workers == 1 or len(miss_idx) < 2 * self.workers:
            for i, om in zip(miss_idx, misses):
                out[i] = self(om)
            return out
        chunks = np.array_split(np.arange(len(miss_idx)), self.workers)
        jobs = [(self.cfg, self.solver_cfg, self.n_cells, misses[c]) for c in chunks if len(c)]
        try:
            with concurrent.futures.ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_run_chunk, jobs))
        except Exception:
            # pool failures (pickling, interpreter limits) fall back to serial
            for i, om in zip(miss_idx, misses):
                out[i] = self(om)
            return out
        pos = 0
        for chunk, values in zip([c for c in chunks if len(c)], results):
            for local, value in zip(chunk, values):
                i = miss_idx[local]
                out[i] = value
                self.cache.put(self.key(omegas[i]), value)
                self.run_count += 1
            pos += len(chunk)
        return out
