"""Shared fixtures and oracle helpers for the test suite."""

import numpy as np
import pytest

import hypctrl as hc


@pytest.fixture(scope="session")
def benchmark():
    return hc.get_preset("paper-sec5")


@pytest.fixture(scope="session")
def benchmark_small():
    # Compatibly scaled-down benchmark data (u0(0) = X0 + v0(0) preserved).
    return hc.get_preset("paper-sec5", init_scale=0.2)


@pytest.fixture(scope="session")
def zero_preset():
    return hc.get_preset("zero")


@pytest.fixture(scope="session")
def advection():
    return hc.get_preset("advection")


def compatible_input(model, state, grid):
    """Linear input extension matching value and discrete slope at (1, t).

    Keeps the actuated corner C1 so a forward run continues the state
    smoothly (the admissible-input regime for state-dependent speeds).
    """
    v1 = float(state.v[-1])
    lam1 = float(model.lambda_v(1.0, state.u[-1], state.v[-1]))
    vx1 = (state.v[-1] - state.v[-2]) / grid.dx
    slope = lam1 * vx1 + float(model.f_v(1.0, state.u[-1], state.v[-1]))
    t0 = state.t
    return lambda t: v1 + slope * (t - t0)


def closed_loop_residual(traj):
    """Sup over plan windows of |v(0, s) - U*(s)| from dense traces."""
    tr = traj.traces
    worst = 0.0
    for rec in traj.control_records:
        plan, tgt = rec.plan, rec.target
        lo, hi = tgt.foot_times[0], tgt.foot_times[-1]
        m = (tr["t"] >= lo) & (tr["t"] <= hi)
        if not m.any():
            continue
        u_star = np.array([plan.U(s) for s in tr["t"][m]])
        worst = max(worst, float(np.max(np.abs(tr["v0"][m] - u_star))))
    return worst


def warm_started_loop(preset, N, theta=0.5, delta=1.0, t_warm=3.0, t_meas=1.5):
    """Closed loop re-started from a settled state; returns the measured leg."""
    g = hc.Grid.uniform(N)
    ctrl = hc.QuasilinearController(preset.model, g, theta=theta, delta=delta)
    warm = hc.run_closed_loop(
        preset.model, preset.init, ctrl, t_warm, g, hc.SimOptions()
    )
    assert warm.blowup is None
    state = warm.final_state()
    traj = hc.run_closed_loop(
        preset.model, state, ctrl, state.t + t_meas, g,
        hc.SimOptions(record_traces=True),
    )
    assert traj.blowup is None
    return traj


def truth_curve_data(model, grid, traj, t):
    """Truth state sampled on the measurement characteristic through (1, t)."""
    curve = hc.measurement_transit(model, grid, t)
    N = grid.N
    uc = np.array(
        [traj.field_at("u", i, max(curve.s[i], 0.0)) for i in range(N + 1)]
    )
    vc = np.array(
        [traj.field_at("v", i, max(curve.s[i], 0.0)) for i in range(N + 1)]
    )
    Xc = np.array(
        [np.interp(max(curve.s[0], 0.0), traj.times, traj.X[:, k])
         for k in range(traj.X.shape[1])]
    )
    return curve, uc, vc, Xc
