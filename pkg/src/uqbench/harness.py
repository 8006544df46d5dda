"""Benchmark orchestration: error metrics, the method/cost sweep of the
comparison study, and the CSV artifacts.

convergence.csv carries one row per (method, variant, cost) with the
discrete L2, relative L2 and max-norm errors of mean and standard
deviation; wall times go to timings.txt so that re-runs from a warm cache
reproduce the CSVs byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import time
from pathlib import Path

import numpy as np
import yaml

from . import apc, hsg, sparsegrid, vkoga
from .cache import RunCache
from .model import SolverModel
from .physics import ScenarioConfig
from .reference import MomentField, run_reference
from .solver import Grid, SolverConfig
from .stochastic import DistributionSpec, SampleSet, generate_samples, load_samples


@dataclasses.dataclass(frozen=True)
class ErrorReport:
    """One point of the error-versus-cost comparison."""

    method: str
    variant: str
    cost: int
    error_mean: float
    error_std: float
    error_mean_rel: float
    error_std_rel: float
    error_mean_max: float
    error_std_max: float
    wall_time: float
    config_hash: str

    def __post_init__(self):
        if self.cost < 1:
            raise ValueError("cost must be at least 1")
        if self.error_mean < 0 or self.error_std < 0:
            raise ValueError("errors must be nonnegative")


def error_norm(candidate: MomentField, reference: MomentField,
               dr: float = 1.0) -> tuple[float, float]:
    """Discrete L2 distance sqrt(dr * sum (a-b)^2) of mean and std fields."""
    if candidate.mean.shape != reference.mean.shape:
        raise ValueError(
            f"grid mismatch: {candidate.mean.shape} vs {reference.mean.shape}")
    e_mean = float(np.sqrt(dr * np.sum((candidate.mean - reference.mean) ** 2)))
    e_std = float(np.sqrt(dr * np.sum((candidate.std - reference.std) ** 2)))
    return e_mean, e_std


def _all_norms(candidate: MomentField, reference: MomentField, dr: float) -> dict:
    e_mean, e_std = error_norm(candidate, reference, dr)
    norm_mean = float(np.sqrt(dr * np.sum(reference.mean ** 2)))
    norm_std = float(np.sqrt(dr * np.sum(reference.std ** 2)))
    return {
        "error_mean": e_mean,
        "error_std": e_std,
        "error_mean_rel": e_mean / norm_mean if norm_mean else np.inf,
        "error_std_rel": e_std / norm_std if norm_std else np.inf,
        "error_mean_max": float(np.abs(candidate.mean - reference.mean).max()),
        "error_std_max": float(np.abs(candidate.std - reference.std).max()),
    }


class CountingModel:
    """View of a SolverModel that records the distinct samples requested,
    attributing their cost to one surrogate build."""

    def __init__(self, model: SolverModel):
        self.model = model
        self.keys: set[str] = set()

    def __call__(self, omega):
        self.keys.add(self.model.key(omega))
        return self.model(omega)

    def run_many(self, omegas):
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        for om in omegas:
            self.keys.add(self.model.key(om))
        return self.model.run_many(omegas)

    @property
    def cost(self) -> int:
        return len(self.keys)


@dataclasses.dataclass
class BenchmarkPlan:
    """Parsed plan file: scenario, numerics, samples source and the
    method/cost grid."""

    scenario: ScenarioConfig
    solver: SolverConfig
    n_cells: int
    samples: dict
    methods: list
    cache_dir: Path
    output_dir: Path

    @classmethod
    def from_file(cls, path) -> "BenchmarkPlan":
        path = Path(path)
        raw = yaml.safe_load(path.read_text()) or {}
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=Path(".")) -> "BenchmarkPlan":
        scenario = ScenarioConfig.from_dict(raw.get("scenario", {}) or {})
        solver_raw = dict(raw.get("solver", {}) or {})
        n_cells = int(solver_raw.pop("n_cells", scenario.n_cells))
        solver = SolverConfig(**solver_raw)
        samples = raw.get("samples", {"generate": {"n": 2000, "seed": 2017}})
        methods = raw.get("methods", [])
        cache_dir = Path(raw.get("cache_dir", base_dir / "runcache"))
        output_dir = Path(raw.get("output_dir", base_dir / "out"))
        return cls(scenario=scenario, solver=solver, n_cells=n_cells,
                   samples=samples, methods=methods, cache_dir=cache_dir,
                   output_dir=output_dir)

    def load_sample_set(self) -> SampleSet:
        if "path" in self.samples:
            return load_samples(self.samples["path"])
        gen = self.samples.get("generate", {})
        spec = (DistributionSpec.from_dict(gen["spec"]) if "spec" in gen
                else DistributionSpec.default())
        return generate_samples(spec, int(gen.get("n", 2000)),
                                int(gen.get("seed", 2017)))


def _write_moments_csv(path: Path, grid: Grid, field: MomentField,
                       extra: dict | None = None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["r_center", "mean", "std"] + list(extra or {})
        writer.writerow(header)
        for j in range(grid.n_cells):
            row = [repr(float(grid.r_centers[j])), repr(float(field.mean[j])),
                   repr(float(field.std[j]))]
            for values in (extra or {}).values():
                row.append(repr(float(values[j])))
            writer.writerow(row)


def _write_convergence_csv(path: Path, reports: list[ErrorReport]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "variant", "cost", "error_mean", "error_std",
                         "error_mean_rel", "error_std_rel", "error_mean_max",
                         "error_std_max", "config_hash"])
        for r in reports:
            writer.writerow([r.method, r.variant, str(r.cost),
                             repr(r.error_mean), repr(r.error_std),
                             repr(r.error_mean_rel), repr(r.error_std_rel),
                             repr(r.error_mean_max), repr(r.error_std_max),
                             r.config_hash])


def _hsg_cached_state(entry_nr, entry_no, quad_order, plan, sample_set, grid,
                      cache: RunCache, model_signature: str):
    """HSG states are expensive; persist the coefficient tensor next to the
    run cache, keyed by the full configuration."""
    sig = "|".join([
        "hsg", str(entry_nr), str(entry_no), str(quad_order),
        hashlib.sha256(sample_set.samples.tobytes()).hexdigest(),
        model_signature,
    ])
    key = RunCache.key_for([0.0, 0.0, 0.0], sig)
    basis = hsg.make_basis(entry_nr, entry_no, sample_set)
    cached = cache.get(key)
    if cached is not None:
        coeffs = cached.reshape(8 ** entry_nr, -1, grid.n_cells)
        T = plan.solver.t_end if plan.solver.t_end is not None else plan.scenario.T_end
        return hsg.HsgState(basis=basis, coeffs=coeffs, time=T)
    state = hsg.hsg_simulate(entry_nr, entry_no, plan.scenario, plan.solver,
                             basis=basis, grid=grid, quad_order=quad_order)
    cache.put(key, state.coeffs.reshape(state.coeffs.shape[0], -1))
    return state


def run_benchmark(plan: BenchmarkPlan) -> list[ErrorReport]:
    """Execute the plan end to end; returns the reports and writes
    convergence.csv, per-method moment CSVs and timings.txt."""
    plan.output_dir.mkdir(parents=True, exist_ok=True)
    cache = RunCache(plan.cache_dir)
    model = SolverModel(plan.scenario, plan.solver, plan.n_cells, cache=cache)
    grid = model.grid
    sample_set = plan.load_sample_set()
    t_end = plan.solver.t_end if plan.solver.t_end is not None else plan.scenario.T_end

    config_hash = hashlib.sha256(
        (model.signature + sample_set.provenance).encode()).hexdigest()[:12]

    timings = []
    t0 = time.perf_counter()
    reference = run_reference(sample_set, model)
    timings.append(("reference", len(sample_set), time.perf_counter() - t0))
    _write_moments_csv(plan.output_dir / "moments_reference.csv", grid, reference)

    reports: list[ErrorReport] = []

    def record(method, variant, cost, moments, wall, extra=None):
        norms = _all_norms(moments, reference, grid.dr)
        report = ErrorReport(method=method, variant=variant, cost=cost,
                             wall_time=wall, config_hash=config_hash, **norms)
        reports.append(report)
        timings.append((f"{method}-{variant}-{cost}", cost, wall))
        name = f"moments_{method}_{variant}_{cost}.csv"
        _write_moments_csv(plan.output_dir / name, grid, moments, extra)

    for entry in plan.methods:
        method = entry["method"]
        if method == "apc":
            variant = entry["variant"]
            fitter = apc.fit_pcm_surrogate if variant == "pcm" else apc.fit_ft_surrogate
            for order in entry["orders"]:
                counter = CountingModel(model)
                t0 = time.perf_counter()
                surrogate = fitter(sample_set, int(order), counter)
                moments = apc.pce_moments(surrogate, sample_set, t=t_end)
                wall = time.perf_counter() - t0
                analytic = apc.analytic_moments(surrogate, t=t_end)
                record("apc", variant, counter.cost, moments, wall,
                       extra={"mean_analytic": analytic.mean,
                              "std_analytic": analytic.std})
        elif method == "asg":
            variant = entry["variant"]
            for budget in entry["budgets"]:
                counter = CountingModel(model)
                t0 = time.perf_counter()
                surrogate, history = sparsegrid.adaptive_loop(
                    counter, sample_set, int(budget), variant,
                    degree_cap=int(entry.get("degree_cap", 1)))
                moments = sparsegrid.sg_moments(surrogate, sample_set, t=t_end)
                wall = time.perf_counter() - t0
                record("asg", variant, counter.cost, moments, wall)
        elif method == "vkoga":
            resolution = int(entry.get("resolution", 50))
            convention = entry.get("convention", "scale")
            candidates = vkoga.build_candidates(sample_set, resolution)
            for delta in entry["deltas"]:
                spec = vkoga.KernelSpec(delta=float(delta), convention=convention)
                counter = CountingModel(model)
                t0 = time.perf_counter()
                models = vkoga.greedy_models(candidates, spec, entry["ns"], counter)
                build_wall = time.perf_counter() - t0
                for n, gm in sorted(models.items()):
                    t0 = time.perf_counter()
                    moments = vkoga.kernel_moments(gm, sample_set, t=t_end)
                    wall = time.perf_counter() - t0
                    record("vkoga", f"delta{delta}", gm.n_centers, moments,
                           wall + build_wall / len(models))
        elif method == "hsg":
            for conf in entry["configs"]:
                # YAML 1.1 reads an unquoted "no" key as boolean False
                conf = {("no" if k is False else k): v for k, v in conf.items()}
                nr = int(conf["nr"])
                no = int(conf.get("order", conf.get("no")))
                quad_order = int(conf.get("quad_order", no + 2))
                t0 = time.perf_counter()
                state = _hsg_cached_state(nr, no, quad_order, plan, sample_set,
                                          grid, cache, model.signature)
                moments = hsg.reconstruct_moments(state, sample_set, t=t_end)
                wall = time.perf_counter() - t0
                record("hsg", f"No{no}", 8 ** nr, moments, wall)
        else:
            raise ValueError(f"unknown method {method!r} in plan")

    _write_convergence_csv(plan.output_dir / "convergence.csv", reports)
    with open(plan.output_dir / "timings.txt", "w") as fh:
        for label, cost, wall in timings:
            fh.write(f"{label}\tcost={cost}\twall={wall:.3f}s\n")
        fh.write(f"new_solver_runs\t{model.run_count}\n")
    return reports
