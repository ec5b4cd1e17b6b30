"""CSV emission with bit-stable formatting (%.12e, fixed column order)."""

from __future__ import annotations

import csv
import os

import numpy as np

from .simulator import Trajectory

_FMT = "%.12e"


def _f(x) -> str:
    return _FMT % float(x)


def write_trajectory_csv(path, traj: Trajectory):
    """Long-format distributed state: one row per (snapshot time, node)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u", "v"])
        for j, t in enumerate(traj.times):
            for i, x in enumerate(traj.x):
                w.writerow([_f(t), _f(x), _f(traj.u[j, i]), _f(traj.v[j, i])])


def write_scalars_csv(path, traj: Trajectory, x_ref=None, x_hat_err=None):
    """Per-snapshot scalars: ODE state, input, norms, optional extras.

    ``x_ref`` is a callable evaluated at snapshot times; ``x_hat_err`` an
    array aligned with snapshots (NaN where no estimate was computed).
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    n = traj.X.shape[1]
    header = ["t"] + [f"X_{k + 1}" for k in range(n)] + [
        "U", "norm_w_inf", "norm_X_inf"
    ]
    if x_ref is not None:
        header.append("X_ref")
    if x_hat_err is not None:
        header.append("x_hat_err")
    w_inf = traj.w_inf()
    X_inf = traj.X_inf()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j, t in enumerate(traj.times):
            row = [_f(t)] + [_f(traj.X[j, k]) for k in range(n)]
            row += [_f(traj.U[j]), _f(w_inf[j]), _f(X_inf[j])]
            if x_ref is not None:
                row.append(_f(x_ref(t)))
            if x_hat_err is not None:
                row.append(_f(x_hat_err[j]))
            w.writerow(row)


def read_csv_columns(path) -> dict:
    """Read a CSV written by this module back into float column arrays."""
    with open(path, "r", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        cols = {h: [] for h in header}
        for row in r:
            for h, val in zip(header, row):
                cols[h].append(float(val))
    return {h: np.asarray(v) for h, v in cols.items()}


def read_replay_csv(path):
    """Replay stream for observer-only runs: columns t, Y, U."""
    cols = read_csv_columns(path)
    for need in ("t", "Y", "U"):
        if need not in cols:
            raise ValueError(f"replay CSV misses column {need!r}")
    return cols["t"], cols["Y"], cols["U"]
