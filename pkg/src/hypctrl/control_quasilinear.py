"""Sampled-interval predictive boundary control for quasilinear plants.

Per sampling instant t_k the controller (1) predicts the state and its time
derivatives over the forward determinate set, (2) designs the virtual
boundary value v(0, .) as a rate-limited ramp from the predicted anchor
toward the ODE law, switching branches at their first intersection, and
(3) solves the boundary-aligned target system backwards across the domain to
convert the virtual input into the physical one, emitted as a piecewise
linear segment U(t) = target v at x = 1 over [t_k, t_k + theta].

The target system evolves the rightward state and its time derivative on the
(moving) bounding characteristic: the rightward derivative field is
transported at the composite speed mu with the quadratic bracket source, the
leftward pair follows from per-time x-ODEs seeded by the virtual input, and
the curve's foot time advances at the dilation rate sigma.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .derivative_coeffs import (
    bracket_u,
    bracket_v,
    composite_speed,
    curve_rate_v,
)
from .errors import ControlError
from .model import Grid, SystemModel
from .predictor import Prediction, predict_determinate
from .simulator import GRADIENT_LIMIT, STATE_NORM_LIMIT, InputSegment, PlantState

_TIME_EPS = 1e-12
_BISECT_TOL = 1e-10


@dataclass
class VirtualInputPlan:
    """Designed virtual boundary value U*(tau) on [tau_k, horizon].

    Ramp branch: anchor + delta * sign(e_k) * (tau - tau_k) up to the switch
    time; afterwards the ODE-law branch K evaluated along the co-integrated
    target ODE state.  ``switch_time`` equals ``horizon`` when the branches
    did not intersect inside the plan window (the plan then stays on the
    ramp; a later interval switches).
    """

    tau_k: float
    anchor: float
    e_k: float
    delta: float
    sign: float
    switch_time: float
    horizon: float
    branch_times: np.ndarray  # K-branch samples (empty if never switching)
    branch_U: np.ndarray
    branch_dU: np.ndarray

    def _check(self, tau):
        if tau < self.tau_k - 1e-9 or tau > self.horizon + 1e-9:
            raise ControlError(
                f"virtual input queried at {tau} outside plan window "
                f"[{self.tau_k}, {self.horizon}]"
            )

    def U(self, tau: float) -> float:
        self._check(tau)
        if tau < self.switch_time:
            return self.anchor + self.delta * self.sign * (tau - self.tau_k)
        return float(np.interp(tau, self.branch_times, self.branch_U))

    def dU(self, tau: float) -> float:
        """Branch time-derivative; right-continuous at the switch."""
        self._check(tau)
        if tau < self.switch_time:
            return self.delta * self.sign
        return float(np.interp(tau, self.branch_times, self.branch_dU))

    @property
    def switched(self) -> bool:
        return self.branch_times.size > 0


def _k_rate(model: SystemModel, X, u_star, tau) -> float:
    """d/dtau of K along the target ODE driven by the current input value."""
    pr = model.partials
    xdot = np.asarray(model.f0(X, u_star, tau), float)
    return float(np.dot(np.atleast_1d(pr.dK_dX(X, tau)), xdot)) + float(
        pr.dK_dt(X, tau)
    )


def design_virtual_input(
    model: SystemModel,
    pred: Prediction,
    theta: float,
    delta: float,
    horizon_pad: float = 0.25,
    dt_plan: Optional[float] = None,
) -> VirtualInputPlan:
    """Construct the rate-limited virtual input from a prediction.

    The switch time is located by sign-change detection on the gap between
    the ODE-law branch (co-integrating the target ODE under the ramp) and the
    ramp itself, refined by bisection to 1e-10.  sign(0) = 0, so a zero
    tracking error switches immediately.
    """
    tau_k = pred.tau0
    anchor = pred.anchor_v
    X0 = pred.X_at(tau_k)
    e_k = float(model.K(X0, tau_k)) - anchor
    sgn = float(np.sign(e_k))
    horizon = tau_k + 2.0 * theta + horizon_pad
    if dt_plan is None:
        dt_plan = theta / max(100.0, 2.0 * pred.grid.N)

    def heun(X, tau, dt, u_of_tau):
        k1 = np.asarray(model.f0(X, u_of_tau(tau), tau), float)
        X1 = X + dt * k1
        k2 = np.asarray(model.f0(X1, u_of_tau(tau + dt), tau + dt), float)
        return X + 0.5 * dt * (k1 + k2)

    ramp = lambda tau: anchor + delta * sgn * (tau - tau_k)

    switch = None
    X_switch = X0
    if sgn == 0.0:
        switch = tau_k
    else:
        # March under the ramp until K(X, tau) - ramp(tau) changes sign.
        tau, X = tau_k, X0.copy()
        gap = e_k
        while tau < horizon - _TIME_EPS:
            dt = min(dt_plan, horizon - tau)
            X_next = heun(X, tau, dt, ramp)
            tau_next = tau + dt
            if not np.all(np.isfinite(X_next)) or np.max(
                np.abs(X_next)
            ) > 10.0 * STATE_NORM_LIMIT:
                # Target ODE escapes under the ramp before intersecting: the
                # branches do not meet inside this window.
                break
            gap_next = float(model.K(X_next, tau_next)) - ramp(tau_next)
            if gap_next * sgn <= 0.0:
                lo, hi = tau, tau_next
                X_lo = X.copy()
                for _ in range(200):
                    if hi - lo <= _BISECT_TOL:
                        break
                    mid = 0.5 * (lo + hi)
                    X_mid = heun(X_lo, lo, mid - lo, ramp)
                    gap_mid = float(model.K(X_mid, mid)) - ramp(mid)
                    if gap_mid * sgn <= 0.0:
                        hi = mid
                    else:
                        lo, X_lo = mid, X_mid
                switch = 0.5 * (lo + hi)
                X_switch = heun(X_lo, lo, switch - lo, ramp)
                break
            tau, X, gap = tau_next, X_next, gap_next
        if switch is None:
            # No intersection inside the window: stay on the ramp.
            return VirtualInputPlan(
                tau_k=tau_k, anchor=anchor, e_k=e_k, delta=delta, sign=sgn,
                switch_time=horizon, horizon=horizon,
                branch_times=np.empty(0), branch_U=np.empty(0),
                branch_dU=np.empty(0),
            )

    # ODE-law branch: closed-loop integration from the switch point.
    times = [switch]
    X = np.atleast_1d(X_switch).copy()
    u_branch = [float(model.K(X, switch))]
    du_branch = [_k_rate(model, X, u_branch[0], switch)]
    tau = switch
    while tau < horizon - _TIME_EPS:
        dt = min(dt_plan, horizon - tau)
        k1 = np.asarray(model.f0(X, float(model.K(X, tau)), tau), float)
        X1 = X + dt * k1
        k2 = np.asarray(
            model.f0(X1, float(model.K(X1, tau + dt)), tau + dt), float
        )
        X = X + 0.5 * dt * (k1 + k2)
        tau += dt
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > 10.0 * STATE_NORM_LIMIT:
            raise ControlError("virtual-input branch integration diverged")
        u_val = float(model.K(X, tau))
        times.append(tau)
        u_branch.append(u_val)
        du_branch.append(_k_rate(model, X, u_val, tau))
    if not np.all(np.isfinite(u_branch)):
        raise ControlError("virtual-input branch integration diverged")
    return VirtualInputPlan(
        tau_k=tau_k, anchor=anchor, e_k=e_k, delta=delta, sign=sgn,
        switch_time=switch, horizon=horizon,
        branch_times=np.asarray(times), branch_U=np.asarray(u_branch),
        branch_dU=np.asarray(du_branch),
    )


@dataclass
class TargetSolution:
    """Backward target solve over one controller interval."""

    times: np.ndarray       # accepted solver times in [t_k, t_{k+1}]
    U_emitted: np.ndarray   # target v at x = 1 per time
    U_star: np.ndarray      # virtual input at the foot time per time
    foot_times: np.ndarray  # tau_v(t; 0) per time
    u_final: np.ndarray
    p_final: np.ndarray
    v_final: np.ndarray
    q_final: np.ndarray
    sigma_final: np.ndarray
    X_final: np.ndarray
    history: Optional[list] = None


def _x_odes_along_curve(model, grid, ubar, pbar, v0, q0):
    """Integrate the leftward pair (v, q) across x from the foot values."""
    x = grid.x
    v = np.empty_like(ubar)
    q = np.empty_like(ubar)
    v[0], q[0] = v0, q0

    def slopes(i, vv, qq):
        xa = x[i]
        ua = ubar[i]
        pa = pbar[i]
        lam = float(model.lambda_v(xa, ua, vv))
        dv = -float(model.f_v(xa, ua, vv)) / lam
        bv = float(
            bracket_v(model, np.array([xa]), np.array([ua]), np.array([vv]),
                      np.array([pa]), np.array([qq]))[0]
        )
        return dv, -bv / lam

    h = grid.dx
    for i in range(grid.N):
        dv1, dq1 = slopes(i, v[i], q[i])
        v_p = v[i] + h * dv1
        q_p = q[i] + h * dq1
        dv2, dq2 = slopes(i + 1, v_p, q_p)
        v[i + 1] = v[i] + 0.5 * h * (dv1 + dv2)
        q[i + 1] = q[i] + 0.5 * h * (dq1 + dq2)
    return v, q


def solve_target_system(
    model: SystemModel,
    grid: Grid,
    pred: Prediction,
    plan: VirtualInputPlan,
    t_k: float,
    t_k1: float,
    cfl: float = 0.8,
    keep_history: bool = False,
) -> TargetSolution:
    """March the boundary-aligned target system over [t_k, t_{k+1}].

    Per step: (a) rebuild the leftward pair by x-ODEs from the virtual-input
    rows; (b) advance the rightward derivative field by upwind transport at
    the composite speed; (c) advance the rightward state by the dilation-
    scaled derivative; (d) update the dilation rate from its quadrature;
    (e) advance the target ODE state and the foot time.  Emits the physical
    input samples v at x = 1.
    """
    if pred.p_on_curve is None:
        raise ControlError("target solve needs a prediction with derivatives")
    x = grid.x
    dx = grid.dx
    ubar = pred.u_on_curve.copy()
    pbar = pred.p_on_curve.copy()
    Xs = pred.X_at(pred.tau0)
    T0 = pred.tau0
    t = t_k

    ts, U_emit, U_star, foots = [], [], [], []
    history = [] if keep_history else None
    pr = model.partials

    def diagnostics(ubar, pbar, Xs, T0):
        u_foot = plan.U(T0)
        du_foot = plan.dU(T0)
        vbar, qbar = _x_odes_along_curve(model, grid, ubar, pbar, u_foot, du_foot)
        if not (np.all(np.isfinite(vbar)) and np.all(np.isfinite(qbar))):
            raise ControlError("target blow-up (leftward pair)")
        sigma = curve_rate_v(model, grid, ubar, vbar, pbar, qbar)
        mu0, nu0, _ = composite_speed(model, x, ubar, vbar)
        xdot = np.asarray(model.f0(Xs, u_foot, T0), float)
        p0 = (
            float(np.dot(np.atleast_1d(pr.dg0_dX(Xs, u_foot, T0)), xdot))
            + float(pr.dg0_dv(Xs, u_foot, T0)) * du_foot
            + float(pr.dg0_dt(Xs, u_foot, T0))
        )
        return vbar, qbar, sigma, sigma * mu0, sigma * nu0, xdot, p0, u_foot

    def rhs(ubar, pbar, Xs, T0):
        vbar, qbar, sigma, mu, nu, xdot, p0, u_foot = diagnostics(
            ubar, pbar, Xs, T0
        )
        dub = sigma * pbar
        dpb = np.zeros_like(pbar)
        dpb[1:] = (
            -mu[1:] * (pbar[1:] - pbar[:-1]) / dx
            + nu[1:] * bracket_u(model, x, ubar, vbar, pbar, qbar)[1:]
        )
        return dub, dpb, sigma[0] * xdot, sigma[0], vbar, qbar, sigma, mu, p0, u_foot

    def fix(ubar, pbar, Xs, T0, p0):
        pbar[0] = p0
        ubar[0] = float(model.g0(Xs, plan.U(T0), T0))

    steps = 0
    max_steps = 400 * (grid.N + 1)
    while True:
        dub, dpb, dXs, dT0, vbar, qbar, sigma, mu, p0, u_foot = rhs(
            ubar, pbar, Xs, T0
        )
        ts.append(t)
        U_emit.append(float(vbar[-1]))
        U_star.append(u_foot)
        foots.append(T0)
        if history is not None:
            history.append(
                dict(t=t, u=ubar.copy(), p=pbar.copy(), v=vbar.copy(),
                     q=qbar.copy(), sigma=sigma.copy(), X=Xs.copy(), T0=T0)
            )
        if t >= t_k1 - _TIME_EPS:
            break
        steps += 1
        if steps > max_steps:
            raise ControlError("target march failed to terminate")
        dt = min(cfl * dx / float(np.max(mu)), t_k1 - t)

        u1 = ubar + dt * dub
        p1 = pbar + dt * dpb
        X1 = Xs + dt * dXs
        T1 = T0 + dt * dT0
        fix(u1, p1, X1, T1, p0)
        dub2, dpb2, dXs2, dT02, _, _, _, _, p0_2, _ = rhs(u1, p1, X1, T1)
        ubar = ubar + 0.5 * dt * (dub + dub2)
        pbar = pbar + 0.5 * dt * (dpb + dpb2)
        Xs = Xs + 0.5 * dt * (dXs + dXs2)
        T0 = T0 + 0.5 * dt * (dT0 + dT02)
        fix(ubar, pbar, Xs, T0, p0_2)
        t += dt

        if not (np.all(np.isfinite(ubar)) and np.all(np.isfinite(pbar))):
            raise ControlError("target blow-up")
        if np.max(np.abs(ubar)) > STATE_NORM_LIMIT or np.max(
            np.abs(pbar)
        ) > GRADIENT_LIMIT:
            raise ControlError("target blow-up")

    vbar, qbar, sigma, _, _, _, _, _ = diagnostics(ubar, pbar, Xs, T0)
    return TargetSolution(
        times=np.asarray(ts), U_emitted=np.asarray(U_emit),
        U_star=np.asarray(U_star), foot_times=np.asarray(foots),
        u_final=ubar, p_final=pbar, v_final=vbar, q_final=qbar,
        sigma_final=sigma, X_final=Xs, history=history,
    )


@dataclass
class ControlIntervalRecord:
    prediction: Prediction
    plan: VirtualInputPlan
    target: TargetSolution
    segment: InputSegment


class QuasilinearController:
    """Sampled-interval controller: theta-spaced evaluations, delta ramp rate.

    ``control_interval`` is a pure function of the sampled state; successive
    intervals are inherently sequential.
    """

    def __init__(
        self,
        model: SystemModel,
        grid: Grid,
        theta: float = 0.5,
        delta: float = 1.0,
        cfl: float = 0.8,
    ):
        if theta <= 0 or delta <= 0:
            raise ControlError("theta and delta must be positive")
        self.model = model
        self.grid = grid
        self.theta = theta
        self.delta = delta
        self.cfl = cfl

    def control_interval(self, state: PlantState, return_details: bool = False):
        t_k = state.t
        t_k1 = t_k + self.theta
        pred = predict_determinate(
            self.model, state, self.grid, cfl=self.cfl, with_derivatives=True
        )
        plan = design_virtual_input(self.model, pred, self.theta, self.delta)
        target = solve_target_system(
            self.model, self.grid, pred, plan, t_k, t_k1, cfl=self.cfl
        )
        m = target.times.size
        uniform_t = np.linspace(t_k, t_k1, m)
        values = np.interp(uniform_t, target.times, target.U_emitted)
        segment = InputSegment(t_k, t_k1, values)
        if return_details:
            return segment, ControlIntervalRecord(pred, plan, target, segment)
        return segment
