import numpy as np
import pytest

import hypctrl as hc
from hypctrl.characteristics import reciprocal_speed_cells
from hypctrl.errors import PredictionError
from hypctrl.predictor import initial_derivatives, predict_interval

from conftest import compatible_input, truth_curve_data


def test_zero_state_prediction(benchmark):
    g = hc.Grid.uniform(50)
    st = hc.PlantState(0.2, np.zeros(51), np.zeros(51), np.zeros(1))
    p = hc.predict_determinate(benchmark.model, st, g)
    # At the origin the leftward speed is 1, so the curve is t + (1 - x).
    assert np.max(np.abs(p.curve.s - (0.2 + 1.0 - g.x))) <= 1e-12
    assert np.max(np.abs(p.u_on_curve)) == 0.0
    assert np.max(np.abs(p.v_on_curve)) == 0.0
    assert np.max(np.abs(p.X_values)) == 0.0
    assert p.anchor_v == 0.0


def test_semilinear_characteristic_shift(advection):
    # Unit speeds, no sources, zero inflow: u on the curve is the initial
    # profile shifted by the elapsed transit, cut off by the inflow.
    errs = {}
    for N in (50, 100, 200):
        g = hc.Grid.uniform(N)
        u0 = lambda x: np.sin(np.pi * np.asarray(x)) ** 2
        init = hc.InitialData(
            u0=u0, v0=lambda x: 0.3 + 0.0 * np.asarray(x), X0=np.zeros(1)
        )
        st = hc.initial_state(advection.model, init, g)
        p = hc.predict_determinate(advection.model, st, g)
        exact = np.where(g.x >= 0.5, u0(2.0 * g.x - 1.0), 0.0)
        errs[N] = np.max(np.abs(p.u_on_curve - exact))
        assert errs[N] <= 10.0 / N
    assert errs[200] < errs[100] < errs[50]


@pytest.mark.parametrize("N", [50, 100])
def test_prediction_matches_forward_simulation(benchmark_small, N):
    g = hc.Grid.uniform(N)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    p = hc.predict_determinate(benchmark_small.model, st, g)
    u_in = compatible_input(benchmark_small.model, st, g)
    traj = hc.simulate(
        benchmark_small.model, benchmark_small.init, u_in, p.tau0 + 0.05, g,
        hc.SimOptions(snapshot_dt=None),
    )
    u_on = np.array(
        [traj.field_at("u", i, p.curve.s[i]) for i in range(N + 1)]
    )
    assert np.max(np.abs(u_on - p.u_on_curve)) <= 0.5 / N
    X_sim = np.interp(p.tau0, traj.times, traj.X[:, 0])
    assert abs(X_sim - p.X_at(p.tau0)[0]) <= 0.5 / N


def test_input_invariance_on_curve(benchmark_small):
    # Two futures under different admissible inputs agree with the
    # prediction (and each other) on the curve to first order.
    N = 100
    g = hc.Grid.uniform(N)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    p = hc.predict_determinate(benchmark_small.model, st, g)
    base = compatible_input(benchmark_small.model, st, g)
    futures = []
    for curvature in (0.0, 0.4):
        u_in = lambda t, c=curvature: base(t) + c * t * t
        traj = hc.simulate(
            benchmark_small.model, benchmark_small.init, u_in, p.tau0 + 0.05,
            g, hc.SimOptions(snapshot_dt=None),
        )
        u_on = np.array(
            [traj.field_at("u", i, p.curve.s[i]) for i in range(N + 1)]
        )
        X_end = np.interp(p.tau0, traj.times, traj.X[:, 0])
        futures.append((u_on, X_end))
    assert np.max(np.abs(futures[0][0] - futures[1][0])) <= 0.5 / N
    assert abs(futures[0][1] - futures[1][1]) <= 0.5 / N
    for u_on, X_end in futures:
        assert np.max(np.abs(u_on - p.u_on_curve)) <= 0.5 / N
        assert abs(X_end - p.X_at(p.tau0)[0]) <= 0.5 / N


def test_prediction_is_pure(benchmark_small):
    g = hc.Grid.uniform(40)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    p1 = hc.predict_determinate(benchmark_small.model, st, g)
    p2 = hc.predict_determinate(benchmark_small.model, st.copy(), g)
    assert np.array_equal(p1.curve.s, p2.curve.s)
    assert np.array_equal(p1.u_on_curve, p2.u_on_curve)
    assert np.array_equal(p1.X_values, p2.X_values)


def test_curve_self_consistency(benchmark):
    # The stored curve satisfies the transit integral evaluated at the
    # recorded curve states under the artifact's own quadrature.
    g = hc.Grid.uniform(80)
    st = hc.initial_state(benchmark.model, benchmark.init, g)
    p = hc.predict_determinate(benchmark.model, st, g)
    cells = reciprocal_speed_cells(
        benchmark.model.lambda_v, g, p.u_on_curve, p.v_on_curve, "lambda_v"
    )
    csum = np.concatenate(([0.0], np.cumsum(cells)))
    recomputed = st.t + csum[-1] - csum
    recomputed[-1] = st.t
    assert np.max(np.abs(recomputed - p.curve.s)) <= 1e-8 * (
        1.0 + np.max(np.abs(p.curve.s))
    )
    # The raw marched crossing times agree with the quadrature to scheme order.
    assert np.max(np.abs(p.march_times - p.curve.s)) <= 5.0 / g.N**2 + 1e-6


def test_initial_derivatives_match_equations(benchmark_small):
    g = hc.Grid.uniform(60)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    p, q = initial_derivatives(benchmark_small.model, g, st.u, st.v)
    # v0 is linear with slope 0.1 at scale 0.2 and u0 constant.
    lam_v = benchmark_small.model.lambda_v(g.x, st.u, st.v)
    f_v = benchmark_small.model.f_v(g.x, st.u, st.v)
    assert np.allclose(q, lam_v * 0.1 + f_v, atol=1e-12)
    f_u = benchmark_small.model.f_u(g.x, st.u, st.v)
    assert np.allclose(p, f_u, atol=1e-12)


def test_prediction_error_on_escaping_state(benchmark):
    g = hc.Grid.uniform(40)
    huge = hc.PlantState(
        0.0,
        np.full(41, 900.0),
        np.linspace(-900.0, 900.0, 41),
        np.array([500.0]),
    )
    with pytest.raises(PredictionError):
        hc.predict_determinate(benchmark.model, huge, g)


# --- re-prediction over the measured region ---------------------------------


def test_predict_interval_zero_data(benchmark):
    g = hc.Grid.uniform(40)
    curve = hc.measurement_transit(benchmark.model, g, 2.0)
    est = predict_interval(
        benchmark.model, curve, np.zeros(41), np.zeros(41), np.zeros(1), g
    )
    assert est.t == pytest.approx(2.0)
    assert np.max(np.abs(est.u)) == 0.0
    assert np.max(np.abs(est.v)) == 0.0
    assert np.max(np.abs(est.X)) == 0.0


@pytest.mark.parametrize("N", [50, 100])
def test_predict_interval_exact_curve_data(benchmark_small, N):
    g = hc.Grid.uniform(N)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    u_in = compatible_input(benchmark_small.model, st, g)
    traj = hc.simulate(
        benchmark_small.model, benchmark_small.init, u_in, 3.0, g,
        hc.SimOptions(snapshot_dt=None),
    )
    t_now = 2.5
    curve, uc, vc, Xc = truth_curve_data(benchmark_small.model, g, traj, t_now)
    est = predict_interval(benchmark_small.model, curve, uc, vc, Xc, g)
    jj = int(np.argmin(np.abs(traj.times - t_now)))
    err = max(
        float(np.max(np.abs(est.u - traj.u[jj]))),
        float(np.max(np.abs(est.v - traj.v[jj]))),
        float(abs(est.X[0] - traj.X[jj, 0])),
    )
    assert err <= 2.0 / N


def test_predict_interval_advection_shift(advection):
    # Zero inflow coupling and unit speeds: the estimate transports the
    # curve data along characteristics.
    N = 100
    g = hc.Grid.uniform(N)
    init = hc.InitialData(
        u0=lambda x: 0.0 * np.asarray(x),
        v0=lambda x: 0.2 + 0.1 * np.sin(2.0 * np.asarray(x)),
        X0=np.zeros(1),
    )
    traj = hc.simulate(
        advection.model, init, lambda t: 0.2 + 0.1 * np.sin(2.0 * (1.0 + t)),
        3.0, g, hc.SimOptions(snapshot_dt=None),
    )
    t_now = 2.5
    curve, uc, vc, Xc = truth_curve_data(advection.model, g, traj, t_now)
    est = predict_interval(advection.model, curve, uc, vc, Xc, g)
    # v(x, t) = v(1, t - (1 - x)) closed form
    exact = 0.2 + 0.1 * np.sin(2.0 * (1.0 + t_now - (1.0 - g.x)))
    assert np.max(np.abs(est.v - exact)) <= 3.0 / N


def test_exclude_right_node_is_isolated(benchmark_small):
    # Leaving the actuated node out changes nothing at the other nodes.
    N = 60
    g = hc.Grid.uniform(N)
    st = hc.initial_state(benchmark_small.model, benchmark_small.init, g)
    u_in = compatible_input(benchmark_small.model, st, g)
    traj = hc.simulate(
        benchmark_small.model, benchmark_small.init, u_in, 3.0, g,
        hc.SimOptions(snapshot_dt=None),
    )
    curve, uc, vc, Xc = truth_curve_data(benchmark_small.model, g, traj, 2.6)
    inc = predict_interval(
        benchmark_small.model, curve, uc, vc, Xc, g, include_right_node=True
    )
    exc = predict_interval(
        benchmark_small.model, curve, uc, vc, Xc, g, include_right_node=False
    )
    assert np.array_equal(inc.u[:N], exc.u[:N])
    assert np.array_equal(inc.v[:N], exc.v[:N])
    assert np.array_equal(inc.X, exc.X)
    assert exc.u[N] == uc[N]  # measurement value retained at the corner
