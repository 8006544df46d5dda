"""Render the benchmark CSVs into figures: moment profiles and log-log
convergence curves, written next to the delimited output.

Outputs are deterministic for fixed inputs: the SVG hash salt is pinned
and creation dates are stripped.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "uqbench"

_SAVE_KW = {"metadata": {"Date": None}, "format": "svg"}


def read_csv_columns(path) -> dict[str, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns: dict[str, list] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def _floats(values) -> list[float]:
    return [float(v) for v in values]


def render_profiles(moment_files: list[tuple[str, Path]], out_path: Path) -> Path:
    """Two-panel figure: mean (left) and standard deviation (right) versus
    radius, one labeled curve per CSV."""
    fig, (ax_mean, ax_std) = plt.subplots(1, 2, figsize=(10, 4))
    for label, path in moment_files:
        cols = read_csv_columns(path)
        r = _floats(cols["r_center"])
        ax_mean.plot(r, _floats(cols["mean"]), label=label)
        ax_std.plot(r, _floats(cols["std"]), label=label)
    ax_mean.set_xlabel("radius [m]")
    ax_mean.set_ylabel("mean saturation")
    ax_std.set_xlabel("radius [m]")
    ax_std.set_ylabel("std of saturation")
    ax_mean.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path


def render_convergence(convergence_csv: Path, out_path: Path) -> Path:
    """Log-log error versus cost, one series per (method, variant), with
    mean-error and std-error panels."""
    cols = read_csv_columns(convergence_csv)
    series: dict[tuple, list] = {}
    for k in range(len(cols["method"])):
        cost = float(cols["cost"][k])
        e_mean = float(cols["error_mean"][k])
        e_std = float(cols["error_std"][k])
        if cost <= 0 or e_mean <= 0:
            warnings.warn(f"skipping nonpositive row {k} of {convergence_csv}")
            continue
        key = (cols["method"][k], cols["variant"][k])
        series.setdefault(key, []).append((cost, e_mean, e_std))

    fig, (ax_mean, ax_std) = plt.subplots(1, 2, figsize=(10, 4))
    for (method, variant), rows in sorted(series.items()):
        rows.sort()
        costs = [r[0] for r in rows]
        label = f"{method}-{variant}"
        ax_mean.loglog(costs, [r[1] for r in rows], marker="o", label=label)
        std_rows = [(c, e) for c, _, e in rows if e > 0]
        if std_rows:
            ax_std.loglog([c for c, _ in std_rows], [e for _, e in std_rows],
                          marker="o", label=label)
    for ax, what in ((ax_mean, "mean"), (ax_std, "std")):
        ax.set_xlabel("model runs / stochastic elements")
        ax.set_ylabel(f"absolute error of {what}")
        ax.grid(True, which="both", alpha=0.3)
    ax_mean.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path


def render_report(in_dir, out_dir) -> list[Path]:
    """Figure renderings for everything recognizable in a benchmark output
    directory."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    conv = in_dir / "convergence.csv"
    if conv.exists():
        written.append(render_convergence(conv, out_dir / "convergence.svg"))
    moment_files = sorted(in_dir.glob("moments_*.csv"))
    if moment_files:
        labeled = [(p.stem.replace("moments_", ""), p) for p in moment_files]
        written.append(render_profiles(labeled, out_dir / "profiles.svg"))
    if not written:
        raise FileNotFoundError(f"no benchmark CSVs found in {in_dir}")
    return written
