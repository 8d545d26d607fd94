"""Run outputs: delimited time series, conservation reports, and figures.

CSV content is byte-reproducible: floats are written with shortest
round-trip repr and nothing time- or host-dependent is embedded.
Figures are rendered straight to files with the Agg canvas so no
display backend is touched.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np
from matplotlib.figure import Figure

__all__ = [
    "write_homogeneous_csv",
    "write_slab_csv",
    "write_state_dump",
    "write_conservation_report",
    "render_homogeneous_figures",
    "render_slab_figures",
    "macro_csv_from_dump",
]

_MACRO_COLUMNS = ["rho", "u1", "u2", "u3", "T", "energy"]


def _cell(value) -> str:
    return repr(float(value))


def write_homogeneous_csv(path, series):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + _MACRO_COLUMNS)
        for t, macro in zip(series.times, series.macros):
            writer.writerow([_cell(t)] + [_cell(v) for v in macro])


def write_slab_csv(path, series, dx):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x"] + _MACRO_COLUMNS)
        m_cells = series.macros.shape[1]
        for t, frame in zip(series.times, series.macros):
            for m in range(m_cells):
                x = (m + 0.5) * dx
                writer.writerow([_cell(t), _cell(x)] + [_cell(v) for v in frame[m]])


def write_state_dump(path, series, dx=None):
    """Raw moment dump: one row per (time, [spatial cell,] velocity cell)."""
    slab = series.states.ndim == 4
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if slab:
            writer.writerow(["t", "x", "alpha", "n0", "n1", "n2", "n3", "n4"])
            for t, frame in zip(series.times, series.states):
                for m in range(frame.shape[0]):
                    x = (m + 0.5) * (dx if dx is not None else 1.0 / frame.shape[0])
                    for alpha in range(frame.shape[1]):
                        writer.writerow([_cell(t), _cell(x), alpha]
                                        + [_cell(v) for v in frame[m, alpha]])
        else:
            writer.writerow(["t", "alpha", "n0", "n1", "n2", "n3", "n4"])
            for t, frame in zip(series.times, series.states):
                for alpha in range(frame.shape[0]):
                    writer.writerow([_cell(t), alpha] + [_cell(v) for v in frame[alpha]])


def write_conservation_report(path, report):
    payload = {
        "invariants": ["mass", "momentum_x", "momentum_y", "momentum_z", "energy"],
        "initial_sums": [float(v) for v in report.initial_sums],
        "max_normalized_drift": [float(v) for v in report.max_drift],
        "worst_drift": float(report.worst()),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def macro_csv_from_dump(dump_path, out_path):
    """Post-process a raw moment dump into macroscopic field rows."""
    with open(dump_path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_x = "x" in header
        groups: dict = {}
        for row in reader:
            key = (row[0], row[1]) if has_x else (row[0],)
            moments = np.array([float(v) for v in row[-5:]])
            groups.setdefault(key, []).append(moments)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow((["t", "x"] if has_x else ["t"]) + _MACRO_COLUMNS)
        for key in groups:
            values = np.array(groups[key])
            sums = values.sum(axis=0)
            rho = sums[0]
            if rho > 0:
                u = sums[1:4] / rho
                temp = (sums[4] - rho * float(np.dot(u, u))) / (3.0 * rho)
                macro = [rho, u[0], u[1], u[2], temp, sums[4]]
            else:
                macro = [rho, np.nan, np.nan, np.nan, np.nan, sums[4]]
            writer.writerow(list(key) + [_cell(v) for v in macro])


def _save(fig: Figure, path: str):
    fig.savefig(path, dpi=140, bbox_inches="tight")


def render_homogeneous_figures(series, outdir, prefix) -> list:
    """Macro-field history and conservation drift; returns written paths."""
    paths = []
    t = series.times
    macros = series.macros

    fig = Figure(figsize=(9, 6))
    axes = fig.subplots(2, 2)
    panels = [("density", 0), ("velocity u1", 1), ("temperature", 4), ("energy", 5)]
    for ax, (label, col) in zip(axes.ravel(), panels):
        ax.plot(t, macros[:, col], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    fig.suptitle("homogeneous run: macroscopic fields")
    path = os.path.join(outdir, f"{prefix}_macro.png")
    _save(fig, path)
    paths.append(path)

    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    sums = series.states.reshape(series.states.shape[0], -1, 5).sum(axis=1)
    drift = np.abs(sums - sums[0]) / (1.0 + np.abs(sums[0]))
    labels = ["mass", "mom x", "mom y", "mom z", "energy"]
    for j in range(5):
        ax.semilogy(t, np.maximum(drift[:, j], 1e-18), label=labels[j], lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("normalized drift")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.suptitle("invariant drift")
    path = os.path.join(outdir, f"{prefix}_conservation.png")
    _save(fig, path)
    paths.append(path)
    return paths


def render_slab_figures(series, dx, outdir, prefix) -> list:
    paths = []
    x = (np.arange(series.macros.shape[1]) + 0.5) * dx

    fig = Figure(figsize=(9, 3.2))
    axes = fig.subplots(1, 3)
    for ax, (label, col) in zip(axes, [("density", 0), ("velocity u1", 1), ("temperature", 4)]):
        ax.plot(x, series.macros[0, :, col], lw=1.0, label="initial")
        ax.plot(x, series.macros[-1, :, col], lw=1.2, label="final")
        ax.set_xlabel("x")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.suptitle("slab run: profiles")
    path = os.path.join(outdir, f"{prefix}_profiles.png")
    _save(fig, path)
    paths.append(path)

    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    im = ax.imshow(series.macros[:, :, 0], aspect="auto", origin="lower",
                   extent=(x[0], x[-1], series.times[0], series.times[-1]))
    fig.colorbar(im, ax=ax, label="density")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.suptitle("slab run: density history")
    path = os.path.join(outdir, f"{prefix}_density_xt.png")
    _save(fig, path)
    paths.append(path)
    return paths
