import numpy as np
import pytest

import hypctrl as hc
from hypctrl.control_semilinear import SemilinearController, integrate_curve_ode
from hypctrl.errors import ControlError


@pytest.fixture(scope="module")
def frozen_benchmark():
    return hc.get_preset("paper-sec5-semilinear")


def decoupled_integrator():
    """Unit speeds, no sources, boundary feed-through: g0 = v0, f0 = v0."""
    ones = lambda x, u, v: np.ones_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    zeros = lambda x, u, v: np.zeros_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    model = hc.SystemModel(
        lambda_u=ones, lambda_v=ones, f_u=zeros, f_v=zeros,
        f0=lambda X, v0, t: np.array([v0]),
        g0=lambda X, v0, t: v0,
        K=lambda X, t: -float(X[0]),
        kind=hc.Kind.SEMILINEAR, n=1, name="decoupled-integrator",
    )
    return hc.numeric_partials(model)


def test_zero_state_gives_zero_input(frozen_benchmark):
    g = hc.Grid.uniform(40)
    ctrl = SemilinearController(frozen_benchmark.model, g)
    st = hc.PlantState(0.0, np.zeros(41), np.zeros(41), np.zeros(1))
    assert ctrl.control(st) == pytest.approx(0.0, abs=1e-14)


def test_requires_semilinear_model(benchmark):
    with pytest.raises(ControlError):
        SemilinearController(benchmark.model, hc.Grid.uniform(10))


def test_decoupled_integrator_closed_form():
    # Prediction of the integrator driven by the known boundary trace:
    # U(t) = -(X(t) + int_0^1 v) with unit transit.
    model = decoupled_integrator()
    N = 100
    g = hc.Grid.uniform(N)
    init = hc.InitialData(
        u0=lambda x: 0.0 * np.asarray(x),
        v0=lambda x: 0.2 + 0.1 * np.cos(np.asarray(x)),
        X0=np.array([0.3]),
    )
    st = hc.initial_state(model, init, g)
    ctrl = SemilinearController(model, g)
    got = ctrl.control(st)
    expected = -(0.3 + 0.2 + 0.1 * np.sin(1.0))  # X0 + int v0
    assert got == pytest.approx(expected, abs=2.0 / N)


def test_curve_ode_forward_backward_inverse(frozen_benchmark):
    g = hc.Grid.uniform(80)
    st = hc.initial_state(frozen_benchmark.model, frozen_benchmark.init, g)
    pred = hc.predict_determinate(
        frozen_benchmark.model, st, g, with_derivatives=False
    )
    u_star = 0.7
    trace = integrate_curve_ode(
        frozen_benchmark.model, g, pred.u_on_curve, u_star, forward=True
    )
    back = integrate_curve_ode(
        frozen_benchmark.model, g, pred.u_on_curve, float(trace[-1]),
        forward=False,
    )
    assert back[0] == pytest.approx(u_star, abs=1e-7)
    assert np.max(np.abs(back - trace)) <= 1e-7


def test_stateless_determinism(frozen_benchmark):
    g = hc.Grid.uniform(40)
    ctrl = SemilinearController(frozen_benchmark.model, g)
    st = hc.initial_state(frozen_benchmark.model, frozen_benchmark.init, g)
    assert ctrl.control(st) == ctrl.control(st.copy())


@pytest.fixture(scope="module")
def fixed_point_runs(frozen_benchmark):
    out = {}
    for N in (40, 80):
        g = hc.Grid.uniform(N)
        ctrl = SemilinearController(frozen_benchmark.model, g)
        traj = hc.run_closed_loop(
            frozen_benchmark.model, frozen_benchmark.init, ctrl, 4.0, g,
            hc.SimOptions(record_traces=True),
        )
        assert traj.blowup is None
        out[N] = (g, traj)
    return out


def test_closed_loop_fixed_point(frozen_benchmark, fixed_point_runs):
    # After one transit the boundary trace realizes the ODE law:
    # v(0, s) = K(X(s), s) to first order, constant halving with N.  The
    # law jumps at activation; the window starts past the smeared front
    # (the scheme resolves admissible discontinuities only to O(sqrt(dx))).
    resid = {}
    for N, (g, traj) in fixed_point_runs.items():
        tau0 = hc.frozen_transit(
            frozen_benchmark.model, g, 0.0, hc.Family.V
        ).s[0]
        tr = traj.traces
        m = tr["t"] >= tau0 + 0.6
        Xs = np.interp(tr["t"][m], traj.times, traj.X[:, 0])
        k_vals = -Xs * np.abs(Xs) - Xs
        resid[N] = float(np.max(np.abs(tr["v0"][m] - k_vals)))
        assert resid[N] <= 6.0 / N
    assert resid[80] <= 0.75 * resid[40]


def test_closed_loop_decay(frozen_benchmark, fixed_point_runs):
    g, traj = fixed_point_runs[80]
    w = traj.w_inf()
    X = traj.X_inf()
    assert X[-1] <= 0.12 * X.max()
    assert w[-1] <= 0.55 * w.max()
