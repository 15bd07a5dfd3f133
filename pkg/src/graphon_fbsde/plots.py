"""Deterministic SVG figures rendered from the package's CSV outputs."""
from __future__ import annotations

import os
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .artifacts import SCHEMA_PREFIX, read_csv  # noqa: E402
from .errors import CsvParseError  # noqa: E402

plt.rcParams["svg.hashsalt"] = "graphon_fbsde"
plt.rcParams["svg.fonttype"] = "path"


class EmptyDataWarning(UserWarning):
    pass


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_history(csv_path, svg_path):
    tab = read_csv(csv_path, "graphon_fbsde.train_history/v1",
                   ("iteration", "train_loss", "val_loss", "val_rel_error"))
    fig, ax = plt.subplots(figsize=(6, 4))
    data = {}
    if len(tab) == 0:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    else:
        it = tab.column("iteration")
        data = {"iteration": it, "train_loss": tab.column("train_loss"),
                "val_loss": tab.column("val_loss")}
        ax.semilogy(it, data["train_loss"], label="train loss")
        ax.semilogy(it, data["val_loss"], label="validation loss")
        ax.legend()
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    _save(fig, svg_path)
    return data


def plot_y_paths(csv_path, svg_path):
    """Y paths against time, coloured by label."""
    tab = read_csv(csv_path, "graphon_fbsde.trajectory/v1", ("particle", "label", "t", "Y"))
    fig, ax = plt.subplots(figsize=(6, 4))
    data = {"labels": np.empty(0), "t": np.empty(0), "Y": np.empty((0, 0))}
    if len(tab) == 0:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    else:
        pid = tab.column("particle").astype(int)
        ids = np.unique(pid)
        t = tab.column("t")[pid == ids[0]]
        Y = np.vstack([tab.column("Y")[pid == i] for i in ids])
        labels = np.array([tab.column("label")[pid == i][0] for i in ids])
        cmap = plt.get_cmap("viridis")
        for lab, y in zip(labels, Y):
            ax.plot(t, y, color=cmap(lab), lw=0.8)
        data = {"labels": labels, "t": t, "Y": Y}
    ax.set_xlabel("t")
    ax.set_ylabel("Y")
    _save(fig, svg_path)
    return data


def plot_utilities(csv_path, svg_path):
    tab = read_csv(csv_path, "graphon_fbsde.utilities/v1", ("label", "Y0", "utility"))
    fig, ax = plt.subplots(figsize=(6, 4))
    data = {}
    if len(tab) == 0:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    else:
        data = {"label": tab.column("label"), "utility": tab.column("utility")}
        ax.plot(data["label"], data["utility"], ".-")
    ax.set_xlabel("label u")
    ax.set_ylabel("utility")
    _save(fig, svg_path)
    return data


def plot_wealth(csv_path, svg_path):
    """Group mean wealth and benchmarked wealth with 95% bands."""
    cols = ("t", "mean_X", "se_X", "mean_benchmarked_X", "se_benchmarked_X")
    tab = read_csv(csv_path, "graphon_fbsde.metrics/v1", cols)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    groups = tab.column("group", numeric=False)
    data = {}
    if len(tab) == 0:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    for name in dict.fromkeys(groups):
        mask = np.array([g == name for g in groups])
        t = tab.column("t")[mask]
        for ax, m, s in ((a1, "mean_X", "se_X"), (a2, "mean_benchmarked_X", "se_benchmarked_X")):
            mu, se = tab.column(m)[mask], tab.column(s)[mask]
            ax.plot(t, mu, label=name)
            ax.fill_between(t, mu - 1.96 * se, mu + 1.96 * se, alpha=0.25)
        data[name] = tab.column("mean_X")[mask]
    a1.set_title("E[X_t]")
    a2.set_title("benchmarked wealth")
    for ax in (a1, a2):
        ax.set_xlabel("t")
        if data:
            ax.legend()
    _save(fig, svg_path)
    return data


def plot_confidence_band(csv_paths, svg_path, column="val_loss"):
    """Mean and 95% band of one history column across several runs."""
    curves = []
    it = None
    for p in csv_paths:
        tab = read_csv(p, "graphon_fbsde.train_history/v1", ("iteration", column))
        if len(tab) == 0:
            continue
        if it is None:
            it = tab.column("iteration")
        elif not np.array_equal(it, tab.column("iteration")):
            raise CsvParseError("runs have different evaluation iterations", p)
        curves.append(tab.column(column))
    fig, ax = plt.subplots(figsize=(6, 4))
    data = {}
    if curves:
        C = np.vstack(curves)
        mean = C.mean(axis=0)
        half = 1.96 * C.std(axis=0, ddof=1) / np.sqrt(len(C)) if len(C) > 1 else np.zeros_like(mean)
        ax.plot(it, mean, label=f"mean of {len(C)} runs")
        ax.fill_between(it, mean - half, mean + half, alpha=0.3, label="95% band")
        ax.set_yscale("log" if np.all(mean - half > 0) else "linear")
        ax.legend()
        data = {"iteration": it, "mean": mean, "half_width": half}
    else:
        warnings.warn("no runs with data", EmptyDataWarning, stacklevel=2)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column)
    _save(fig, svg_path)
    return data


def plot_exploitability(csv_path, svg_path):
    tab = read_csv(csv_path, "graphon_fbsde.exploitability/v1")
    rows = [r for r in tab.rows if r[0] != "average"]
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        u = np.array([float(r[0]) for r in rows])
        gap = np.array([float(r[3]) if r[3] else np.nan for r in rows])
        order = np.argsort(u)
        ax.plot(u[order], gap[order], ".")
    else:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("label u")
    ax.set_ylabel("V_br - V_eq")
    _save(fig, svg_path)
    return {}


def plot_sweep(csv_path, svg_path):
    tab = read_csv(csv_path, "graphon_fbsde.sweep_summary/v1", ("M", "mean_val_rel_error"))
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(tab):
        ax.loglog(tab.column("M"), tab.column("mean_val_rel_error"), "o-")
    else:
        warnings.warn(f"{csv_path}: no rows", EmptyDataWarning, stacklevel=2)
    ax.set_xlabel("M")
    ax.set_ylabel("validation relative error (%)")
    _save(fig, svg_path)
    return {}


RENDERERS = {
    "graphon_fbsde.train_history/v1": plot_history,
    "graphon_fbsde.trajectory/v1": plot_y_paths,
    "graphon_fbsde.utilities/v1": plot_utilities,
    "graphon_fbsde.metrics/v1": plot_wealth,
    "graphon_fbsde.exploitability/v1": plot_exploitability,
    "graphon_fbsde.sweep_summary/v1": plot_sweep,
}


def _schema_of(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith(SCHEMA_PREFIX):
        raise CsvParseError("first line must be a schema comment", path, 1)
    return first[len(SCHEMA_PREFIX):].strip()


def emit_plots(csv_paths, out_dir):
    """Render every CSV with a known schema; returns the SVG paths written."""
    written = []
    os.makedirs(out_dir, exist_ok=True)
    for p in sorted(csv_paths):
        fn = RENDERERS.get(_schema_of(p))
        if fn is None:
            continue
        svg = os.path.join(out_dir, os.path.splitext(os.path.basename(p))[0] + ".svg")
        fn(p, svg)
        written.append(svg)
    return written
