"""Command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 numeric failure.
UQBENCH_WORKERS bounds the solver work pool.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import apc, hsg, sparsegrid, vkoga
from .cache import RunCache
from .harness import BenchmarkPlan, run_benchmark, _write_moments_csv
from .model import ModelRunError, SolverModel
from .physics import ConfigError, DomainError, ScenarioConfig, UncertainInput
from .reference import run_reference, single_factor_reference
from .solver import CFLError, Grid, SolverConfig, simulate
from .stochastic import (
    DistributionSpec,
    SampleError,
    generate_samples,
    load_samples,
    raw_moments,
)

USAGE_ERRORS = (ConfigError, SampleError, FileNotFoundError, KeyError, ValueError)
NUMERIC_ERRORS = (CFLError, DomainError, ModelRunError, apc.MomentMatrixError,
                  hsg.BasisResolutionError, vkoga.DegenerateHullError,
                  vkoga.PowerSaturationError, np.linalg.LinAlgError,
                  FloatingPointError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _scenario(args) -> ScenarioConfig:
    if getattr(args, "scenario", None):
        return ScenarioConfig.from_file(args.scenario)
    return ScenarioConfig()


def _solver_cfg(args) -> SolverConfig:
    kwargs = {}
    if getattr(args, "t_end", None) is not None:
        kwargs["t_end"] = args.t_end * 86400.0
    if getattr(args, "cfl", None) is not None:
        kwargs["cfl"] = args.cfl
    return SolverConfig(**kwargs)


def _model(args, cfg) -> SolverModel:
    cache = RunCache(args.cache) if getattr(args, "cache", None) else RunCache()
    return SolverModel(cfg, _solver_cfg(args), getattr(args, "cells", None),
                       cache=cache)


def _write_field_csv(path, grid, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r_center", "saturation"])
        for r, s in zip(grid.r_centers, values):
            writer.writerow([repr(float(r)), repr(float(s))])


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    omega = UncertainInput(args.omega1, args.omega2, args.omega3)
    grid = Grid.from_config(cfg, args.cells)
    field = simulate(omega, cfg, _solver_cfg(args), grid=grid)
    _write_field_csv(args.out, grid, field.values)
    print(f"wrote {args.out} ({grid.n_cells} cells, t={field.time / 86400:g} d)")
    return 0


def cmd_samples_generate(args) -> int:
    spec = (DistributionSpec.from_file(args.spec) if args.spec
            else DistributionSpec.default())
    sample_set = generate_samples(spec, args.n, args.seed)
    sample_set.save(args.out)
    print(f"wrote {args.out} ({len(sample_set)} samples, seed {args.seed})")
    return 0


def cmd_samples_inspect(args) -> int:
    sample_set = load_samples(args.file)
    print(f"{args.file}: {len(sample_set)} samples ({sample_set.provenance})")
    names = ("omega1", "omega2", "omega3")
    for dim in (1, 2, 3):
        col = sample_set.samples[:, dim - 1]
        m = raw_moments(sample_set, dim, 2)
        std = np.sqrt(max(m[2] - m[1] ** 2, 0.0))
        print(f"  {names[dim - 1]}: min={col.min():.6g} max={col.max():.6g} "
              f"mean={m[1]:.6g} std={std:.6g}")
    return 0


def cmd_reference(args) -> int:
    cfg = _scenario(args)
    sample_set = load_samples(args.samples)
    model = _model(args, cfg)
    if args.single_factor:
        field = single_factor_reference(sample_set, args.single_factor, model)
    else:
        field = run_reference(sample_set, model)
    _write_moments_csv(Path(args.out), model.grid, field)
    print(f"wrote {args.out} ({field.n_samples} samples, "
          f"{model.run_count} new solver runs)")
    return 0


def cmd_surrogate_apc(args) -> int:
    cfg = _scenario(args)
    sample_set = load_samples(args.samples)
    model = _model(args, cfg)
    fitter = apc.fit_pcm_surrogate if args.variant == "pcm" else apc.fit_ft_surrogate
    surrogate = fitter(sample_set, args.order, model)
    moments = apc.pce_moments(surrogate, sample_set, t=model.cfg.T_end)
    analytic = apc.analytic_moments(surrogate, t=model.cfg.T_end)
    surrogate.save(f"{args.out_prefix}.npz")
    _write_moments_csv(Path(f"{args.out_prefix}_moments.csv"), model.grid, moments,
                       extra={"mean_analytic": analytic.mean,
                              "std_analytic": analytic.std})
    print(f"apc-{args.variant} order {args.order}: {surrogate.n_runs} model runs, "
          f"wrote {args.out_prefix}.npz and {args.out_prefix}_moments.csv")
    return 0


def cmd_surrogate_asg(args) -> int:
    cfg = _scenario(args)
    sample_set = load_samples(args.samples)
    model = _model(args, cfg)
    surrogate, history = sparsegrid.adaptive_loop(model, sample_set, args.budget,
                                                  args.variant,
                                                  degree_cap=args.degree_cap)
    moments = sparsegrid.sg_moments(surrogate, sample_set, t=model.cfg.T_end)
    surrogate.save(f"{args.out_prefix}.npz")
    _write_moments_csv(Path(f"{args.out_prefix}_moments.csv"), model.grid, moments)
    with open(f"{args.out_prefix}_iterations.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "grid_size"])
        for k, size in enumerate(history):
            writer.writerow([k, size])
    print(f"asg-{args.variant} budget {args.budget}: grid {len(surrogate.points)}, "
          f"wrote {args.out_prefix}.npz")
    return 0


def cmd_surrogate_vkoga(args) -> int:
    cfg = _scenario(args)
    sample_set = load_samples(args.samples)
    model = _model(args, cfg)
    ns = [int(x) for x in args.n_checkpoints.split(",")]
    candidates = vkoga.build_candidates(sample_set, args.resolution)
    spec = vkoga.KernelSpec(delta=args.delta, convention=args.convention)
    models = vkoga.greedy_models(candidates, spec, ns, model)
    for n, gm in sorted(models.items()):
        gm.save(f"{args.out_prefix}_n{n}.npz")
        moments = vkoga.kernel_moments(gm, sample_set, t=model.cfg.T_end)
        _write_moments_csv(Path(f"{args.out_prefix}_n{n}_moments.csv"),
                           model.grid, moments)
    print(f"vkoga delta={args.delta}: {len(candidates)} candidates, "
          f"checkpoints {sorted(models)}")
    return 0


def cmd_surrogate_hsg(args) -> int:
    cfg = _scenario(args)
    sample_set = load_samples(args.samples)
    grid = Grid.from_config(cfg, args.cells)
    state = hsg.hsg_simulate(args.nr, args.no, cfg, _solver_cfg(args),
                             sample_set=sample_set, grid=grid,
                             quad_order=args.quad_order)
    moments = hsg.reconstruct_moments(state, sample_set)
    state.save(f"{args.out_prefix}.npz")
    _write_moments_csv(Path(f"{args.out_prefix}_moments.csv"), grid, moments)
    print(f"hsg Nr={args.nr} No={args.no}: {8 ** args.nr} elements, "
          f"wrote {args.out_prefix}.npz")
    return 0


def cmd_benchmark(args) -> int:
    plan = BenchmarkPlan.from_file(args.plan)
    reports = run_benchmark(plan)
    print(f"benchmark complete: {len(reports)} reports in {plan.output_dir}")
    return 0


def cmd_report(args) -> int:
    from .report import render_report
    written = render_report(args.in_dir, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uqbench",
                     description="Data-driven UQ benchmark for radial CO2 injection")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, cache=True):
        p.add_argument("--scenario", help="scenario YAML file")
        p.add_argument("--cells", type=int, default=None, help="grid cells")
        p.add_argument("--t-end", dest="t_end", type=float, default=None,
                       help="simulation time in days")
        if cache:
            p.add_argument("--cache", help="run-cache directory")

    p = sub.add_parser("simulate", help="one deterministic model run")
    p.add_argument("--omega1", type=float, required=True)
    p.add_argument("--omega2", type=float, required=True)
    p.add_argument("--omega3", type=float, required=True)
    p.add_argument("--out", required=True)
    add_common(p, cache=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("samples", help="sample-set utilities")
    ssub = p.add_subparsers(dest="samples_command", required=True)
    pg = ssub.add_parser("generate")
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--seed", type=int, default=2017)
    pg.add_argument("--out", required=True)
    pg.add_argument("--spec", help="distribution spec YAML")
    pg.set_defaults(func=cmd_samples_generate)
    pi = ssub.add_parser("inspect")
    pi.add_argument("file")
    pi.set_defaults(func=cmd_samples_inspect)

    p = sub.add_parser("reference", help="Monte-Carlo reference moments")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--single-factor", type=int, choices=(1, 2, 3), default=None)
    add_common(p)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("surrogate", help="build one surrogate")
    msub = p.add_subparsers(dest="surrogate_method", required=True)

    pa = msub.add_parser("apc")
    pa.add_argument("--variant", choices=("pcm", "ft"), required=True)
    pa.add_argument("--order", type=int, required=True)
    pa.add_argument("--samples", required=True)
    pa.add_argument("--out-prefix", default="apc")
    add_common(pa)
    pa.set_defaults(func=cmd_surrogate_apc)

    ps = msub.add_parser("asg")
    ps.add_argument("--variant", choices=("boundary", "modified"), required=True)
    ps.add_argument("--budget", type=int, required=True)
    ps.add_argument("--samples", required=True)
    ps.add_argument("--degree-cap", dest="degree_cap", type=int, default=1)
    ps.add_argument("--out-prefix", default="asg")
    add_common(ps)
    ps.set_defaults(func=cmd_surrogate_asg)

    pv = msub.add_parser("vkoga")
    pv.add_argument("--delta", type=float, required=True)
    pv.add_argument("--n-checkpoints", default="1,4,16,64,252,1000")
    pv.add_argument("--samples", required=True)
    pv.add_argument("--resolution", type=int, default=50)
    pv.add_argument("--convention", choices=("scale", "radius"), default="scale")
    pv.add_argument("--out-prefix", default="vkoga")
    add_common(pv)
    pv.set_defaults(func=cmd_surrogate_vkoga)

    ph = msub.add_parser("hsg")
    ph.add_argument("--nr", type=int, required=True)
    ph.add_argument("--no", type=int, required=True)
    ph.add_argument("--samples", required=True)
    ph.add_argument("--quad-order", dest="quad_order", type=int, default=None)
    ph.add_argument("--out-prefix", default="hsg")
    add_common(ph, cache=False)
    ph.set_defaults(func=cmd_surrogate_hsg)

    p = sub.add_parser("benchmark", help="run a full comparison plan")
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="render figures from benchmark CSVs")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
