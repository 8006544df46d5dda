"""Figure builders for the benchmark CSV schemas.

Reads only the documented delimited formats:
  samples:     omega1,omega2,omega3
  moments:     r_center,mean,std[,extra...]
  convergence: method,variant,cost,error_mean,error_std,...

Rendering is deterministic for fixed inputs: the SVG hash salt is pinned
and creation dates stripped.
"""

import csv
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "uqbench-plots"

SAVE_KW = {"metadata": {"Date": None}, "format": "svg"}


def read_columns(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                cols[name].append(cell)
    return cols


def _require(cols, names, path):
    for name in names:
        if name not in cols:
            raise ValueError(f"{path}: missing column {name!r}")


def floats(cells):
    return [float(c) for c in cells]


def histogram_figure(samples_csv, out_path, bins=40):
    """Three-panel marginal histograms of the input parameters."""
    cols = read_columns(samples_csv)
    _require(cols, ("omega1", "omega2", "omega3"), samples_csv)
    labels = [("omega1", "injection rate perturbation [-]"),
              ("omega2", "relative permeability degree [-]"),
              ("omega3", "reservoir porosity [-]")]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    for ax, (name, label) in zip(axes, labels):
        ax.hist(floats(cols[name]), bins=bins, color="#4878a8",
                edgecolor="white", linewidth=0.3)
        ax.set_xlabel(label)
        ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def profiles_figure(moment_files, out_path):
    """Mean (left) and standard deviation (right) of saturation vs radius,
    one labeled curve per moments CSV."""
    fig, (ax_mean, ax_std) = plt.subplots(1, 2, figsize=(10, 4))
    for label, path in moment_files:
        cols = read_columns(path)
        _require(cols, ("r_center", "mean", "std"), path)
        r = floats(cols["r_center"])
        style = {"linewidth": 1.8, "color": "black"} if label == "reference" \
            else {"linewidth": 1.0}
        ax_mean.plot(r, floats(cols["mean"]), label=label, **style)
        ax_std.plot(r, floats(cols["std"]), label=label, **style)
    ax_mean.set_xlabel("radius [m]")
    ax_mean.set_ylabel("mean CO2 saturation [-]")
    ax_std.set_xlabel("radius [m]")
    ax_std.set_ylabel("std of CO2 saturation [-]")
    ax_mean.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def convergence_figure(convergence_csv, out_path):
    """Log-log absolute error of mean and std versus cost, one series per
    (method, variant); nonpositive rows are skipped with a warning."""
    cols = read_columns(convergence_csv)
    _require(cols, ("method", "variant", "cost", "error_mean", "error_std"),
             convergence_csv)
    series = {}
    for k in range(len(cols["method"])):
        cost = float(cols["cost"][k])
        e_mean = float(cols["error_mean"][k])
        e_std = float(cols["error_std"][k])
        if cost <= 0 or e_mean <= 0:
            warnings.warn(f"skipping nonpositive row {k}")
            continue
        key = (cols["method"][k], cols["variant"][k])
        series.setdefault(key, []).append((cost, e_mean, e_std))

    fig, (ax_mean, ax_std) = plt.subplots(1, 2, figsize=(10, 4))
    for (method, variant), rows in sorted(series.items()):
        rows.sort()
        label = f"{method}-{variant}"
        ax_mean.loglog([r[0] for r in rows], [r[1] for r in rows],
                       marker="o", markersize=3.5, label=label)
        positive = [(c, e) for c, _, e in rows if e > 0]
        if positive:
            ax_std.loglog([c for c, _ in positive], [e for _, e in positive],
                          marker="o", markersize=3.5, label=label)
    for ax, what in ((ax_mean, "mean"), (ax_std, "standard deviation")):
        ax.set_xlabel("number of model runs / stochastic elements")
        ax.set_ylabel(f"absolute error of {what}")
        ax.grid(True, which="both", alpha=0.3)
    ax_mean.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KW)
    plt.close(fig)
    return Path(out_path)
