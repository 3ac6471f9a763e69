"""Figure rendering for run metrics, sweeps and 2D fields.

Every function takes tabular data (dicts of column arrays, as produced by
the CSV writers) and saves a raster image next to the delimited output.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no data rows")
    out = {}
    for key in rows[0]:
        vals = [r[key] for r in rows]
        try:
            out[key] = np.array([float(v) for v in vals])
        except ValueError:
            out[key] = np.array(vals)
    return out


def _finish(fig, out_path) -> Path:
    out_path = Path(out_path)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_metrics(cols: dict, out_path, title: str = "") -> Path:
    """Per-step relative velocity errors of the circuit and linear runs."""
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax.plot(cols["step"], cols["max_rel_u"], label="circuit max", color="tab:red")
    ax.plot(cols["step"], cols["max_rel_u_lin"], label="linear max",
            color="tab:blue", ls="--")
    ax.plot(cols["step"], cols["mean_rel_u"], label="circuit mean",
            color="tab:red", alpha=0.4)
    ax.plot(cols["step"], cols["mean_rel_u_lin"], label="linear mean",
            color="tab:blue", alpha=0.4, ls="--")
    ax.set_xlabel("step")
    ax.set_ylabel("relative velocity error")
    ax.legend(fontsize=8)
    ax2.semilogy(cols["step"], cols["f_mse"], label="circuit", color="tab:red")
    ax2.semilogy(cols["step"], cols["f_mse_lin"], label="linear",
                 color="tab:blue", ls="--")
    ax2.set_xlabel("step")
    ax2.set_ylabel("population MSE")
    ax2.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    return _finish(fig, out_path)


def plot_decay(cols: dict, out_path) -> Path:
    """Maximum-velocity decay curves of the three lockstep runs."""
    fig, (ax, ax2) = plt.subplots(2, 1, figsize=(5.5, 5.5), sharex=True,
                                  height_ratios=[2, 1])
    for key, style in (("decay_ref", {"color": "k"}),
                       ("decay_lin", {"color": "tab:blue", "ls": "--"}),
                       ("decay_vqc", {"color": "tab:red", "ls": "-."})):
        ax.plot(cols["step"], cols[key], label=key.split("_")[1], **style)
    ax.set_ylabel("u_max / u_0")
    ax.legend()
    ax2.plot(cols["step"], cols["abs_err_vqc"], color="tab:red", label="circuit")
    ax2.plot(cols["step"], cols["abs_err_lin"], color="tab:blue", ls="--",
             label="linear")
    ax2.set_xlabel("step")
    ax2.set_ylabel("|decay error|")
    ax2.legend(fontsize=8)
    return _finish(fig, out_path)


def plot_history(cols: dict, out_path) -> Path:
    """Training history: loss components and validation error."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.semilogy(cols["epoch"], cols["loss"], label="loss", color="k")
    ax.semilogy(cols["epoch"], cols["amp_mse"], label="amplitude MSE",
                color="tab:blue", alpha=0.7)
    nz = cols["phase_mse"] > 0
    if nz.any():
        ax.semilogy(cols["epoch"][nz], cols["phase_mse"][nz],
                    label="phase penalty", color="tab:green", alpha=0.7)
    val = cols["val_error"]
    good = np.isfinite(val)
    if good.any():
        ax2 = ax.twinx()
        ax2.plot(cols["epoch"][good], val[good], "o-", color="tab:red",
                 label="validation error", ms=3)
        ax2.set_ylabel("validation max relative error", color="tab:red")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training objective")
    ax.legend(fontsize=8, loc="upper right")
    return _finish(fig, out_path)


def plot_sweep(cols: dict, out_path, x: str = "u", fit=None) -> Path:
    """MSE-style sweep on a log axis with the optional exponential fit."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    xs = cols[x]
    for key, style in (("pred_mse", {"color": "tab:red", "marker": "o"}),
                       ("base_mse", {"color": "tab:blue", "marker": "s"})):
        if key in cols:
            ax.semilogy(xs, cols[key], label=key, ls="none", **style)
    if fit is not None:
        grid = np.linspace(xs.min(), xs.max(), 200)
        ax.semilogy(grid, fit.predict(grid), color="navy",
                    label=f"c e^(au+bu^2), R2={fit.r2:.3f}")
    if "eta" in cols:
        ax2 = ax.twinx()
        ax2.plot(xs, cols["eta"], color="tab:green", marker="^", ls=":",
                 label="eta")
        ax2.set_ylabel("prediction/baseline MSE ratio", color="tab:green")
    ax.set_xlabel(x)
    ax.set_ylabel("MSE")
    ax.legend(fontsize=8, loc="upper left")
    return _finish(fig, out_path)


def plot_nonunitarity(cols: dict, out_path, x: str = "u") -> Path:
    """Largest singular value and non-unitarity metric against u or tau."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.plot(cols[x], cols["sigma_max"], "o-", color="tab:orange")
    ax.set_xlabel(x)
    ax.set_ylabel("largest singular value", color="tab:orange")
    ax2 = ax.twinx()
    ax2.semilogy(cols[x], cols["metric"], "s--", color="tab:blue")
    ax2.set_ylabel("non-unitarity metric", color="tab:blue")
    return _finish(fig, out_path)


def plot_field(cols_or_array, out_path, title: str = "", cmap: str = "RdBu_r") -> Path:
    """Heatmap of a scalar lattice field (x, y, value CSV or 2D array)."""
    if isinstance(cols_or_array, dict):
        x = cols_or_array["x"].astype(int)
        y = cols_or_array["y"].astype(int)
        field = np.zeros((x.max() + 1, y.max() + 1))
        field[x, y] = cols_or_array["value"]
    else:
        field = np.asarray(cols_or_array)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    lim = np.abs(field).max() or 1.0
    if field.min() >= 0:
        im = ax.imshow(field.T, origin="lower", cmap="viridis")
    else:
        im = ax.imshow(field.T, origin="lower", cmap=cmap, vmin=-lim, vmax=lim)
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    return _finish(fig, out_path)


def plot_tradeoff(cols: dict, out_path) -> Path:
    """Success probability against validation error over training time."""
    fig, ax = plt.subplots(figsize=(5, 3.8))
    sc = ax.scatter(cols["success"], cols["val_error"],
                    c=cols["epoch"], cmap="viridis", s=18)
    fig.colorbar(sc, ax=ax, label="epoch")
    ax.set_xlabel("success probability")
    ax.set_ylabel("validation max relative error")
    return _finish(fig, out_path)


def plot_scaling(out_path, n_range=(1e2, 1e9)) -> Path:
    """Refinement-limit curve with the advantage bands marked."""
    from .analysis import scaling_beta1

    n = np.geomspace(max(n_range[0], 10.0), n_range[1], 400)
    b1 = np.array([scaling_beta1(v) for v in n])
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.loglog(n, b1, color="k")
    for level, color in ((0.5, "tab:green"), (0.1, "gold"), (0.01, "tab:red")):
        ax.axhline(level, color=color, lw=1, ls="--", label=f"beta1 = {level}")
    ax.set_xlabel("base lattice sites")
    ax.set_ylabel("smallest advantageous refinement factor")
    ax.legend(fontsize=8)
    return _finish(fig, out_path)


def save_scalar_field_csv(path, field: np.ndarray) -> Path:
    nx, ny = field.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for i in range(nx):
            for j in range(ny):
                writer.writerow([i, j, repr(float(field[i, j]))])
    return Path(path)
