import numpy as np
import pytest

import hypctrl as hc
from hypctrl.control_quasilinear import (
    QuasilinearController,
    design_virtual_input,
    solve_target_system,
)
from hypctrl.control_semilinear import SemilinearController
from hypctrl.errors import ControlError

from conftest import closed_loop_residual, warm_started_loop


def static_target_model():
    """No ODE drift, constant law 0.5: analytic ramp-constant intersection."""
    ones = lambda x, u, v: np.ones_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    zeros = lambda x, u, v: np.zeros_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    model = hc.SystemModel(
        lambda_u=ones, lambda_v=ones, f_u=zeros, f_v=zeros,
        f0=lambda X, v0, t: np.zeros(1),
        g0=lambda X, v0, t: 0.0,
        K=lambda X, t: 0.5,
        kind=hc.Kind.QUASILINEAR, n=1, name="static-target",
    )
    return hc.numeric_partials(model)


def test_plan_zero_error_switches_immediately(zero_preset):
    model = hc.numeric_partials(zero_preset.model)
    g = hc.Grid.uniform(30)
    st = hc.PlantState(0.0, np.zeros(31), np.zeros(31), np.zeros(1))
    pred = hc.predict_determinate(model, st, g, with_derivatives=True)
    plan = design_virtual_input(model, pred, theta=0.5, delta=1.0)
    assert plan.e_k == 0.0
    assert plan.switch_time == pytest.approx(pred.tau0)
    assert plan.U(pred.tau0 + 0.3) == pytest.approx(0.0, abs=1e-14)


def test_plan_static_ramp_constant_intersection():
    model = static_target_model()
    g = hc.Grid.uniform(40)
    st = hc.PlantState(0.0, np.zeros(41), np.zeros(41), np.zeros(1))
    pred = hc.predict_determinate(model, st, g, with_derivatives=True)
    plan = design_virtual_input(model, pred, theta=0.5, delta=1.0)
    tau0 = pred.tau0
    # anchor 0, ramp slope +1 toward the constant 0.5: switch at tau0 + 0.5.
    assert plan.switch_time == pytest.approx(tau0 + 0.5, abs=1e-9)
    for dt_q in (0.1, 0.3, 0.45, 0.6, 0.9):
        assert plan.U(tau0 + dt_q) == pytest.approx(min(dt_q, 0.5), abs=1e-9)
    assert plan.dU(tau0 + 0.2) == pytest.approx(1.0)
    assert plan.dU(tau0 + 0.7) == pytest.approx(0.0, abs=1e-9)


def test_plan_benchmark_first_interval(benchmark):
    g = hc.Grid.uniform(100)
    st = hc.initial_state(benchmark.model, benchmark.init, g)
    pred = hc.predict_determinate(benchmark.model, st, g, with_derivatives=True)
    plan = design_virtual_input(benchmark.model, pred, theta=0.5, delta=1.0)
    assert plan.switched
    assert plan.switch_time < plan.horizon
    # ramp branch slope is exactly +-delta
    taus = np.linspace(pred.tau0, plan.switch_time - 1e-6, 20)
    for tau in taus:
        assert plan.dU(tau) == pytest.approx(plan.sign * 1.0)
    # the virtual input stays bounded and continuous at the switch
    left = plan.U(plan.switch_time - 1e-9)
    right = plan.U(plan.switch_time + 1e-9)
    assert left == pytest.approx(right, abs=1e-6)


def test_plan_no_intersection_stays_on_ramp():
    # Constant law far above the anchor with a slow ramp: no switch inside
    # the window; the plan remains a pure ramp (a later interval switches).
    model = static_target_model()
    import dataclasses

    model = dataclasses.replace(model, K=lambda X, t: 40.0)
    model = hc.numeric_partials(dataclasses.replace(model, partials=hc.Partials()))
    g = hc.Grid.uniform(30)
    st = hc.PlantState(0.0, np.zeros(31), np.zeros(31), np.zeros(1))
    pred = hc.predict_determinate(model, st, g, with_derivatives=True)
    plan = design_virtual_input(model, pred, theta=0.5, delta=1.0)
    assert not plan.switched
    assert plan.switch_time == plan.horizon
    assert plan.dU(plan.horizon - 1e-6) == pytest.approx(1.0)


def test_target_zero_solution(zero_preset):
    model = hc.numeric_partials(zero_preset.model)
    g = hc.Grid.uniform(30)
    st = hc.PlantState(0.0, np.zeros(31), np.zeros(31), np.zeros(1))
    pred = hc.predict_determinate(model, st, g, with_derivatives=True)
    plan = design_virtual_input(model, pred, theta=0.5, delta=1.0)
    target = solve_target_system(model, g, pred, plan, 0.0, 0.5)
    assert np.max(np.abs(target.U_emitted)) == 0.0
    assert np.max(np.abs(target.u_final)) == 0.0
    assert np.max(np.abs(target.sigma_final - 1.0)) == 0.0


def test_target_boundary_rows(benchmark):
    # v rows carry the virtual input and its rate; the foot time advances
    # at the dilation rate with sigma(1) = 1.
    g = hc.Grid.uniform(50)
    st = hc.initial_state(benchmark.model, benchmark.init, g)
    pred = hc.predict_determinate(benchmark.model, st, g, with_derivatives=True)
    plan = design_virtual_input(benchmark.model, pred, theta=0.5, delta=1.0)
    target = solve_target_system(
        benchmark.model, g, pred, plan, 0.0, 0.5, keep_history=True
    )
    for row in target.history[:: max(1, len(target.history) // 6)]:
        assert row["v"][0] == pytest.approx(plan.U(row["T0"]), abs=1e-12)
        assert row["sigma"][-1] == pytest.approx(1.0, abs=1e-12)
        # compatibility of the rightward state at the foot
        g0 = float(
            benchmark.model.g0(row["X"], plan.U(row["T0"]), row["T0"])
        )
        assert row["u"][0] == pytest.approx(g0, abs=1e-12)
    # emitted input continues the current actuated value
    assert target.U_emitted[0] == pytest.approx(float(st.v[-1]), abs=2.0 / g.N)


def test_semilinear_reduction_matches_algorithm_one():
    # State-independent speeds: the interval controller's segment matches
    # the per-step semilinear law along the same trajectory.
    pre = hc.get_preset("paper-sec5-semilinear", init_scale=0.2)
    N = 80
    g = hc.Grid.uniform(N)
    qctrl = QuasilinearController(pre.model, g, theta=0.5, delta=1.0)
    sctrl = SemilinearController(pre.model, g)
    # start from a closed-loop-consistent state so no activation front forms
    warm = hc.run_closed_loop(
        pre.model, pre.init, qctrl, 2.5, g, hc.SimOptions()
    )
    st = warm.final_state()
    seg, rec = qctrl.control_interval(st, return_details=True)
    traj = hc.simulate(
        pre.model, st, seg, st.t + 0.5, g, hc.SimOptions(snapshot_dt=None)
    )
    diffs = []
    for j in range(0, traj.times.size, 8):
        state_j = hc.PlantState(
            float(traj.times[j]), traj.u[j].copy(), traj.v[j].copy(),
            traj.X[j].copy(),
        )
        diffs.append(abs(sctrl.control(state_j) - seg.eval(state_j.t)))
    assert max(diffs) <= 4.0 / N


def test_zero_state_interval(zero_preset):
    model = hc.numeric_partials(zero_preset.model)
    g = hc.Grid.uniform(25)
    ctrl = QuasilinearController(model, g, theta=0.5, delta=1.0)
    st = hc.PlantState(0.0, np.zeros(26), np.zeros(26), np.zeros(1))
    seg = ctrl.control_interval(st)
    assert seg.a == 0.0 and seg.b == pytest.approx(0.5)
    assert np.max(np.abs(seg.values)) <= 1e-14


def test_interval_continuity_and_slope(benchmark):
    g = hc.Grid.uniform(60)
    ctrl = QuasilinearController(benchmark.model, g, theta=0.5, delta=1.0)
    traj = hc.run_closed_loop(
        benchmark.model, benchmark.init, ctrl, 3.0, g,
        hc.SimOptions(record_traces=True),
    )
    assert traj.blowup is None
    segs = [rec.segment for rec in traj.control_records]
    for prev, nxt in zip(segs, segs[1:]):
        assert abs(nxt.eval(nxt.a) - prev.eval(prev.b)) <= 4.0 / g.N
    for seg in segs:
        slopes = np.abs(np.diff(seg.values)) / np.diff(seg.times)
        assert np.all(np.isfinite(slopes))
        assert np.max(slopes) <= 12.0  # bounded rate at desk scale


def test_switch_times_shrink_in_closed_loop(benchmark):
    g = hc.Grid.uniform(60)
    ctrl = QuasilinearController(benchmark.model, g, theta=0.5, delta=1.0)
    traj = hc.run_closed_loop(
        benchmark.model, benchmark.init, ctrl, 6.0, g, hc.SimOptions()
    )
    plans = [rec.plan for rec in traj.control_records]
    assert all(p.switched for p in plans)
    ramp_spans = [p.switch_time - p.tau_k for p in plans]
    assert max(ramp_spans[-3:]) <= 0.05  # late intervals switch immediately
    assert ramp_spans[0] > 0.1           # the first one genuinely ramps


def test_invalid_parameters(benchmark):
    with pytest.raises(ControlError):
        QuasilinearController(benchmark.model, hc.Grid.uniform(10), theta=0.0)
    with pytest.raises(ControlError):
        QuasilinearController(benchmark.model, hc.Grid.uniform(10), delta=-1.0)


def test_warm_loop_residual_first_order(benchmark):
    res = {}
    for N in (50, 100):
        traj = warm_started_loop(benchmark, N)
        res[N] = closed_loop_residual(traj)
        assert res[N] <= 2.0 / N
    assert res[100] <= 0.7 * res[50]
