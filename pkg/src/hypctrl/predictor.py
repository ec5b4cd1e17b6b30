"""Determinate-set solvers: forward prediction and observer re-prediction.

``predict_determinate`` integrates a copy of the plant dynamics from the
current state over the set of points the state already determines.  The
active spatial interval shrinks with solver time: its right edge moves along
the leftward characteristic through (1, t), so the leftward field needs no
boundary data there.  States (and, for quasilinear plants, their time
derivatives) are recorded as the edge sweeps each node, yielding the state on
the bounding characteristic curve together with the boundary-ODE trajectory
up to the curve's foot.  The result is independent of any future input by
construction: no input value is ever consumed.

``predict_interval`` is the mirrored construction used by the observer's
second stage: plant dynamics integrated forward from data on a rightward
(measurement) characteristic over the expanding region between that curve
and the current time.

Both reuse the simulator's staged upwind kernels; the moving edge is handled
by slaving the edge-adjacent leftward-field node to an interpolation between
its interior neighbour and the edge value (cut-cell treatment, keeps the CFL
bound grid-uniform).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .characteristics import CharCurve, Family, curve_from_states
from .derivative_coeffs import bracket_u, bracket_v, curve_rate_v
from .errors import PredictionError
from .model import Grid, SystemModel
from .simulator import GRADIENT_LIMIT, STATE_NORM_LIMIT, PlantState

_TIME_EPS = 1e-12


@dataclass
class Prediction:
    """Solution of the plant over the forward determinate set of one state.

    Curve arrays are indexed by grid node; ``curve.s[i]`` is the time the
    bounding leftward characteristic passes node i, and ``u_on_curve[i]`` the
    predicted u there.  ``v0_times/v0_values`` sample the outflow trace
    v(0, s) and ``X_times/X_values`` the boundary-ODE state, both up to the
    curve's foot time tau0.  Quasilinear predictions carry the derivative
    fields on the curve and the curve's time-dilation rate.
    """

    t: float
    grid: Grid
    curve: CharCurve
    u_on_curve: np.ndarray
    v_on_curve: np.ndarray
    X_times: np.ndarray
    X_values: np.ndarray
    v0_times: np.ndarray
    v0_values: np.ndarray
    p_on_curve: Optional[np.ndarray] = None
    q_on_curve: Optional[np.ndarray] = None
    curve_rate: Optional[np.ndarray] = None
    march_times: Optional[np.ndarray] = None

    @property
    def tau0(self) -> float:
        """Foot time of the bounding curve, tau_v(t; 0)."""
        return float(self.curve.s[0])

    @property
    def anchor_v(self) -> float:
        """Predicted v(0, tau0), the earliest input-reachable boundary value."""
        return float(self.v0_values[-1])

    def X_at(self, s) -> np.ndarray:
        return np.array(
            [np.interp(s, self.X_times, self.X_values[:, j])
             for j in range(self.X_values.shape[1])]
        )

    def v0_at(self, s) -> float:
        return float(np.interp(s, self.v0_times, self.v0_values))


def _check_fields(u, v, p=None, q=None):
    for arr in (u, v):
        if not np.all(np.isfinite(arr)):
            raise PredictionError("non-finite state inside the determinate set")
        if np.max(np.abs(arr)) > STATE_NORM_LIMIT:
            raise PredictionError("state escaped inside the determinate set")
    for arr in (p, q):
        if arr is None:
            continue
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > GRADIENT_LIMIT:
            raise PredictionError(
                "derivative state escaped inside the determinate set"
            )


def initial_derivatives(model: SystemModel, grid: Grid, u, v):
    """Time derivatives (p, q) evaluated from the equations themselves.

    Spatial slopes use one-sided differences matching each family's upwind
    side (backward for u, forward for v; flipped at the respective inflow
    node).
    """
    dx = grid.dx
    x = grid.x
    ux = np.empty_like(u)
    ux[1:] = (u[1:] - u[:-1]) / dx
    ux[0] = (u[1] - u[0]) / dx
    vx = np.empty_like(v)
    vx[:-1] = (v[1:] - v[:-1]) / dx
    vx[-1] = (v[-1] - v[-2]) / dx
    lam_u = np.asarray(model.lambda_u(x, u, v), float) * np.ones_like(x)
    lam_v = np.asarray(model.lambda_v(x, u, v), float) * np.ones_like(x)
    fu = np.asarray(model.f_u(x, u, v), float) * np.ones_like(x)
    fv = np.asarray(model.f_v(x, u, v), float) * np.ones_like(x)
    p = -lam_u * ux + fu
    q = lam_v * vx + fv
    return p, q


def _edge_u(u, x, i_e, xb, dx):
    """Linear extension of the rightward field to the edge position."""
    if i_e >= 1:
        return float(u[i_e] + (u[i_e] - u[i_e - 1]) * (xb - x[i_e]) / dx)
    return float(u[0])


def predict_determinate(
    model: SystemModel,
    state: PlantState,
    grid: Grid,
    cfl: float = 0.8,
    with_derivatives: Optional[bool] = None,
) -> Prediction:
    """Solve the plant copy over the forward determinate set of ``state``.

    Raises PredictionError if the solution (or, quasilinearly, a derivative
    field) escapes inside the set, the numerical symptom of leaving the
    small-data regime.
    """
    if with_derivatives is None:
        with_derivatives = not model.semilinear
    x = grid.x
    dx = grid.dx
    N = grid.N
    t0 = state.t

    u = state.u.copy()
    v = state.v.copy()
    X = state.X.copy()
    if with_derivatives:
        p, q = initial_derivatives(model, grid, u, v)
    else:
        p = q = None

    xb = 1.0
    vb = float(v[N])
    qb = float(q[N]) if with_derivatives else 0.0
    i_e = N
    s = t0

    rec_tau = np.full(N + 1, np.nan)
    rec_u = np.full(N + 1, np.nan)
    rec_v = np.full(N + 1, np.nan)
    rec_p = np.full(N + 1, np.nan) if with_derivatives else None
    rec_q = np.full(N + 1, np.nan) if with_derivatives else None
    rec_tau[N] = s
    rec_u[N] = u[N]
    rec_v[N] = vb
    if with_derivatives:
        rec_p[N] = p[N]
        rec_q[N] = qb

    X_times = [s]
    X_vals = [X.copy()]
    v0_times = [s]
    v0_vals = [float(v[0])]

    def rhs(u, v, p, q, X, xb, vb, qb, s, i_e):
        sl = slice(0, i_e + 1)
        xa, ua, va = x[sl], u[sl], v[sl]
        lam_u = np.asarray(model.lambda_u(xa, ua, va), float) * np.ones_like(xa)
        lam_v = np.asarray(model.lambda_v(xa, ua, va), float) * np.ones_like(xa)
        fu = np.asarray(model.f_u(xa, ua, va), float) * np.ones_like(xa)
        fv = np.asarray(model.f_v(xa, ua, va), float) * np.ones_like(xa)
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        du[1:i_e + 1] = -lam_u[1:] * (ua[1:] - ua[:-1]) / dx + fu[1:]
        dv[0:i_e] = lam_v[:-1] * (va[1:] - va[:-1]) / dx + fv[:-1]
        ub = _edge_u(u, x, i_e, xb, dx)
        lam_vb = float(model.lambda_v(xb, ub, vb))
        dxb = -lam_vb
        dvb = float(model.f_v(xb, ub, vb))
        dX = np.asarray(model.f0(X, float(v[0]), s), float)
        if p is None:
            return du, dv, None, None, dX, dxb, dvb, 0.0, lam_u, lam_v
        dp = np.zeros_like(p)
        dq = np.zeros_like(q)
        dp[1:i_e + 1] = (
            -lam_u[1:] * (p[1:i_e + 1] - p[0:i_e]) / dx
            + bracket_u(model, xa, ua, va, p[sl], q[sl])[1:]
        )
        dq[0:i_e] = (
            lam_v[:-1] * (q[1:i_e + 1] - q[0:i_e]) / dx
            + bracket_v(model, xa, ua, va, p[sl], q[sl])[:-1]
        )
        pb = _edge_u(p, x, i_e, xb, dx)
        dqb = float(bracket_v(model, np.array([xb]), np.array([ub]),
                              np.array([vb]), np.array([pb]), np.array([qb]))[0])
        return du, dv, dp, dq, dX, dxb, dvb, dqb, lam_u, lam_v

    def fix(u, v, p, q, X, xb, vb, qb, s_stage, i_e):
        # Slave the edge-adjacent leftward-field node, then re-impose the
        # inflow rows that depend on it.
        if i_e >= 1:
            denom = xb - x[i_e - 1]
            w = dx / denom if denom > dx * 1e-9 else 1.0
            v[i_e] = v[i_e - 1] + w * (vb - v[i_e - 1])
            if q is not None:
                q[i_e] = q[i_e - 1] + w * (qb - q[i_e - 1])
        else:
            v[0] = vb
            if q is not None:
                q[0] = qb
        u[0] = float(model.g0(X, float(v[0]), s_stage))
        if p is not None:
            pr = model.partials
            Xdot = np.asarray(model.f0(X, float(v[0]), s_stage), float)
            p[0] = (
                float(np.dot(np.atleast_1d(pr.dg0_dX(X, float(v[0]), s_stage)), Xdot))
                + float(pr.dg0_dv(X, float(v[0]), s_stage)) * q[0]
                + float(pr.dg0_dt(X, float(v[0]), s_stage))
            )

    max_steps = 200 * (N + 1) * max(1, int(1.0 / cfl))
    steps = 0
    while xb > _TIME_EPS:
        steps += 1
        if steps > max_steps:
            raise PredictionError("determinate-set march failed to terminate")
        r1 = rhs(u, v, p, q, X, xb, vb, qb, s, i_e)
        du1, dv1, dp1, dq1, dX1, dxb1, dvb1, dqb1, lam_u, lam_v = r1
        ms = max(float(np.max(lam_u)), float(np.max(lam_v)), -dxb1)
        dt = cfl * dx / ms
        # Land the edge exactly on x = 0 at the end of the march.
        if xb + dt * dxb1 < 0.0:
            dt = xb / (-dxb1)

        u1 = u + dt * du1
        v1 = v + dt * dv1
        X1 = X + dt * dX1
        xb1 = xb + dt * dxb1
        vb1 = vb + dt * dvb1
        p1 = p + dt * dp1 if p is not None else None
        q1 = q + dt * dq1 if q is not None else None
        qb1 = qb + dt * dqb1
        fix(u1, v1, p1, q1, X1, max(xb1, 0.0), vb1, qb1, s + dt, i_e)

        r2 = rhs(u1, v1, p1, q1, X1, max(xb1, 0.0), vb1, qb1, s + dt, i_e)
        du2, dv2, dp2, dq2, dX2, dxb2, dvb2, dqb2, _, _ = r2
        u_new = u + 0.5 * dt * (du1 + du2)
        v_new = v + 0.5 * dt * (dv1 + dv2)
        X_new = X + 0.5 * dt * (dX1 + dX2)
        xb_new = xb + 0.5 * dt * (dxb1 + dxb2)
        vb_new = vb + 0.5 * dt * (dvb1 + dvb2)
        qb_new = qb + 0.5 * dt * (dqb1 + dqb2)
        p_new = p + 0.5 * dt * (dp1 + dp2) if p is not None else None
        q_new = q + 0.5 * dt * (dq1 + dq2) if q is not None else None
        xb_new = max(xb_new, 0.0)
        fix(u_new, v_new, p_new, q_new, X_new, xb_new, vb_new, qb_new, s + dt, i_e)

        _check_fields(u_new[: i_e + 1], v_new[: i_e + 1],
                      None if p_new is None else p_new[: i_e + 1],
                      None if q_new is None else q_new[: i_e + 1])

        # Record curve values at every node the edge crossed this step.
        new_i_e = int(np.searchsorted(x, xb_new, side="right") - 1)
        new_i_e = min(new_i_e, i_e)
        for j in range(i_e, new_i_e, -1):
            if x[j] <= _TIME_EPS:
                continue
            frac = (xb - x[j]) / (xb - xb_new) if xb > xb_new else 1.0
            frac = min(max(frac, 0.0), 1.0)
            rec_tau[j] = s + frac * dt
            rec_u[j] = u[j] + frac * (u_new[j] - u[j])
            rec_v[j] = vb + frac * (vb_new - vb)
            if with_derivatives:
                rec_p[j] = p[j] + frac * (p_new[j] - p[j])
                rec_q[j] = qb + frac * (qb_new - qb)

        u, v, X, p, q = u_new, v_new, X_new, p_new, q_new
        xb, vb, qb = xb_new, vb_new, qb_new
        i_e = new_i_e if xb > _TIME_EPS else 0
        s = s + dt
        X_times.append(s)
        X_vals.append(X.copy())
        v0_times.append(s)
        v0_vals.append(float(v[0]))

    # Landing: the edge value is the boundary trace at the foot time.
    rec_tau[0] = s
    rec_v[0] = vb
    v0_vals[-1] = vb
    rec_u[0] = float(model.g0(X, vb, s))
    if with_derivatives:
        rec_p[0] = p[0]
        rec_q[0] = qb

    curve = curve_from_states(grid, model, t0, rec_u, rec_v, Family.V)
    rate = None
    if with_derivatives:
        rate = curve_rate_v(model, grid, rec_u, rec_v, rec_p, rec_q)
    return Prediction(
        t=t0,
        grid=grid,
        curve=curve,
        u_on_curve=rec_u,
        v_on_curve=rec_v,
        X_times=np.asarray(X_times),
        X_values=np.asarray(X_vals),
        v0_times=np.asarray(v0_times),
        v0_values=np.asarray(v0_vals),
        p_on_curve=rec_p,
        q_on_curve=rec_q,
        curve_rate=rate,
        march_times=rec_tau.copy(),
    )


def predict_interval(
    model: SystemModel,
    curve: CharCurve,
    u_on_curve: np.ndarray,
    v_on_curve: np.ndarray,
    X_at_foot: np.ndarray,
    grid: Grid,
    cfl: float = 0.8,
    include_right_node: bool = True,
) -> PlantState:
    """Integrate the plant forward from data on a rightward characteristic.

    The active domain expands as solver time passes each node's curve time;
    newly active nodes are initialized with the curve data.  Inflow for u at
    x = 0 comes from the boundary coupling driven by the co-integrated ODE
    state (initialized with ``X_at_foot`` at the curve's foot time).  With
    ``include_right_node=False`` the last node is never marched: its u value
    is taken from the curve data (the measurement) and its v value
    extrapolated, which leaves every other node untouched.
    """
    if not (curve.family is Family.U and curve.increasing):
        raise ValueError("predict_interval needs an increasing u-family curve")
    x = grid.x
    dx = grid.dx
    N = grid.N
    t_now = float(curve.s[-1])
    last = N if include_right_node else N - 1

    u = np.zeros(N + 1)
    v = np.zeros(N + 1)
    u[0] = u_on_curve[0]
    v[0] = v_on_curve[0]
    X = np.atleast_1d(np.asarray(X_at_foot, float)).copy()
    s = float(curve.s[0])
    i_f = 0

    def curve_point(s_stage):
        ss = min(max(s_stage, float(curve.s[0])), t_now)
        xc = float(np.interp(ss, curve.s, curve.x))
        vc = float(np.interp(xc, x, v_on_curve))
        return xc, vc

    def rhs(u, v, X, s, i_f):
        sl = slice(0, i_f + 1)
        xa, ua, va = x[sl], u[sl], v[sl]
        lam_u = np.asarray(model.lambda_u(xa, ua, va), float) * np.ones_like(xa)
        lam_v = np.asarray(model.lambda_v(xa, ua, va), float) * np.ones_like(xa)
        fu = np.asarray(model.f_u(xa, ua, va), float) * np.ones_like(xa)
        fv = np.asarray(model.f_v(xa, ua, va), float) * np.ones_like(xa)
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        du[1:i_f + 1] = -lam_u[1:] * (ua[1:] - ua[:-1]) / dx + fu[1:]
        dv[0:i_f] = lam_v[:-1] * (va[1:] - va[:-1]) / dx + fv[:-1]
        dX = np.asarray(model.f0(X, float(v[0]), s), float)
        return du, dv, dX, lam_u, lam_v

    def fix(u, v, X, s_stage, i_f):
        xc, vc = curve_point(s_stage)
        if i_f >= 1:
            denom = xc - x[i_f - 1]
            w = dx / denom if denom > dx * 1e-9 else 1.0
            v[i_f] = v[i_f - 1] + w * (vc - v[i_f - 1])
        else:
            v[0] = vc
        u[0] = float(model.g0(X, float(v[0]), s_stage))

    steps = 0
    max_steps = 200 * (N + 1) * max(1, int(1.0 / cfl))
    while s < t_now - _TIME_EPS:
        steps += 1
        if steps > max_steps:
            raise PredictionError("re-prediction march failed to terminate")
        du1, dv1, dX1, lam_u, lam_v = rhs(u, v, X, s, i_f)
        ms = max(float(np.max(lam_u)), float(np.max(lam_v)))
        dt = cfl * dx / ms
        next_act = float(curve.s[i_f + 1]) if i_f + 1 <= last else t_now
        dt = min(dt, next_act - s, t_now - s)
        if dt <= 0:
            dt = max(next_act - s, _TIME_EPS)

        u1 = u + dt * du1
        v1 = v + dt * dv1
        X1 = X + dt * dX1
        fix(u1, v1, X1, s + dt, i_f)
        du2, dv2, dX2, _, _ = rhs(u1, v1, X1, s + dt, i_f)
        u = u + 0.5 * dt * (du1 + du2)
        v = v + 0.5 * dt * (dv1 + dv2)
        X = X + 0.5 * dt * (dX1 + dX2)
        fix(u, v, X, s + dt, i_f)
        s = s + dt

        _check_fields(u[: i_f + 1], v[: i_f + 1])
        while i_f + 1 <= last and s >= float(curve.s[i_f + 1]) - _TIME_EPS:
            i_f += 1
            u[i_f] = u_on_curve[i_f]
            v[i_f] = v_on_curve[i_f]

    if not include_right_node:
        u[N] = u_on_curve[N]
        v[N] = 2.0 * v[N - 1] - v[N - 2]
    return PlantState(t=t_now, u=u, v=v, X=X)
