"""Static SVG plots rendered from the emitted CSV files.

Plots read the CSVs back rather than touching solver internals, so rendering
can never alter numerical outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import read_csv_columns


def render_plots(trajectory_csv, scalars_csv, prefix) -> dict:
    """Render norm, ODE-state and input plots next to the CSVs."""
    sc = read_csv_columns(scalars_csv)
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sc["t"], sc["norm_w_inf"], label="|w|_inf")
    ax.plot(sc["t"], sc["norm_X_inf"], label="|X|_inf")
    ax.set_xlabel("t")
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.legend()
    ax.set_title("state norms")
    paths["norms"] = prefix + "-norms.svg"
    fig.savefig(paths["norms"])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    n = 1
    while f"X_{n + 1}" in sc:
        n += 1
    for k in range(1, n + 1):
        ax.plot(sc["t"], sc[f"X_{k}"], label=f"X_{k}")
    if "X_ref" in sc:
        ax.plot(sc["t"], sc["X_ref"], "k--", label="X_ref")
    ax.set_xlabel("t")
    ax.legend()
    ax.set_title("boundary ODE state")
    paths["ode"] = prefix + "-ode.svg"
    fig.savefig(paths["ode"])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sc["t"], sc["U"])
    ax.set_xlabel("t")
    ax.set_ylabel("U")
    ax.set_title("applied input")
    paths["input"] = prefix + "-input.svg"
    fig.savefig(paths["input"])
    plt.close(fig)

    tr = read_csv_columns(trajectory_csv)
    ts = np.unique(tr["t"])
    if ts.size >= 2:
        fig, ax = plt.subplots(figsize=(6, 4))
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            t_pick = ts[int(frac * (ts.size - 1))]
            m = tr["t"] == t_pick
            ax.plot(tr["x"][m], tr["v"][m], label=f"v, t={t_pick:.2f}")
        ax.set_xlabel("x")
        ax.legend(fontsize=7)
        ax.set_title("leftward state profiles")
        paths["profiles"] = prefix + "-profiles.svg"
        fig.savefig(paths["profiles"])
        plt.close(fig)

    return paths
