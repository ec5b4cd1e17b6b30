"""Bundled benchmark reproduction: three presets with pass/fail checks.

Runs the open-loop escape, the stabilization loop and the tracking loop on
the ``paper-sec5`` preset at N = 100 and checks each against its acceptance
window.  The tracking reference is the artifact's default (the source study
plots tracking without stating its reference signal).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import load_config
from .presets import default_reference
from .scenario import run_scenario

OPEN_LOOP_WINDOW = (3.1, 4.1)
STABILIZATION_BOUND = 0.05
TRACKING_BOUND = 0.1


def preset_config_text(name: str) -> str:
    """Shipped scenario configurations, addressable by preset name."""
    if name == "paper-sec5-openloop":
        return (
            'scenario = "open-loop"\n'
            'model.preset = "paper-sec5"\n'
            "grid.N = 100\n"
            "sim.t_end = 6.0\n"
            "input.U_const = 1.0\n"
            'output.prefix = "openloop"\n'
        )
    if name == "paper-sec5-stabilization":
        return (
            'scenario = "state-feedback"\n'
            'objective = "stabilization"\n'
            'model.preset = "paper-sec5"\n'
            "grid.N = 100\n"
            "sim.t_end = 20.0\n"
            'controller.type = "quasilinear"\n'
            "controller.theta = 0.5\n"
            "controller.delta = 1.0\n"
            'output.prefix = "stabilization"\n'
        )
    if name == "paper-sec5-tracking":
        return (
            'scenario = "state-feedback"\n'
            'objective = "tracking"\n'
            'model.preset = "paper-sec5"\n'
            "grid.N = 100\n"
            "sim.t_end = 20.0\n"
            'controller.type = "quasilinear"\n'
            "controller.theta = 0.5\n"
            "controller.delta = 1.0\n"
            'output.prefix = "tracking"\n'
        )
    if name == "zero":
        return (
            'scenario = "open-loop"\n'
            'model.preset = "zero"\n'
            "grid.N = 50\n"
            "sim.t_end = 5.0\n"
            "input.U_const = 0.0\n"
            'output.prefix = "zero"\n'
        )
    raise KeyError(f"unknown scenario preset {name!r}")


@dataclass
class PresetReport:
    name: str
    passed: bool
    detail: str


def reproduce_paper(out_dir: str = "reproduction", plots: bool = True) -> list:
    """Run the three benchmark presets and evaluate their windows."""
    os.makedirs(out_dir, exist_ok=True)
    reports = []

    cfg = load_config(preset_config_text("paper-sec5-openloop"))
    cfg.plots = plots
    res = run_scenario(cfg, out_dir=out_dir)
    bl = res.trajectory.blowup
    ok = bl is not None and OPEN_LOOP_WINDOW[0] <= bl.time <= OPEN_LOOP_WINDOW[1]
    detail = (
        f"escape at t={bl.time:.3f} ({bl.trigger}), window {OPEN_LOOP_WINDOW}"
        if bl is not None
        else "no escape detected"
    )
    reports.append(PresetReport("open-loop", ok, detail))

    cfg = load_config(preset_config_text("paper-sec5-stabilization"))
    cfg.plots = plots
    res = run_scenario(cfg, out_dir=out_dir)
    traj = res.trajectory
    if traj.blowup is not None:
        reports.append(PresetReport("stabilization", False, "escaped"))
    else:
        final = max(traj.w_inf()[-1], traj.X_inf()[-1])
        peak = max(traj.w_inf().max(), traj.X_inf().max())
        ok = final <= STABILIZATION_BOUND and final <= 0.05 * peak
        reports.append(
            PresetReport(
                "stabilization", ok,
                f"final norm {final:.2e} (bound {STABILIZATION_BOUND}, "
                f"5% of peak {0.05 * peak:.2e})",
            )
        )

    cfg = load_config(preset_config_text("paper-sec5-tracking"))
    cfg.plots = plots
    res = run_scenario(cfg, out_dir=out_dir)
    traj = res.trajectory
    if traj.blowup is not None:
        reports.append(PresetReport("tracking", False, "escaped"))
    else:
        m = traj.times >= 10.0
        err = float(
            np.max(np.abs(traj.X[m, 0] - default_reference(traj.times[m])))
        )
        ok = err <= TRACKING_BOUND
        reports.append(
            PresetReport(
                "tracking", ok,
                f"max |X - X_ref| for t >= 10: {err:.3f} (bound {TRACKING_BOUND})",
            )
        )
    return reports


def format_report(reports) -> str:
    lines = ["preset            status  detail", "-" * 64]
    for r in reports:
        lines.append(
            f"{r.name:<17s} {'PASS' if r.passed else 'FAIL':<7s} {r.detail}"
        )
    return "\n".join(lines)
