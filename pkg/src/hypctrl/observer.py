"""Boundary observers: past-state estimation plus current-state re-prediction.

The observer runs on the actuated-boundary measurement Y(t) = u(1, t) and the
applied input U(t) only.  Its fields estimate the state on the measurement
characteristic (the rightward line arriving at (1, t)): the leftward field is
advected toward x = 0 at the composite speed with inflow U at x = 1, and the
rightward field is re-integrated down the domain from the measurement each
step.  The ODE estimate is driven by the reconstructed x = 0 boundary values
through a plug-in finite-time observer and never feeds back into the PDE
fields (cascade structure).  ``estimate_current`` maps the curve estimate to
a current-state estimate by forward re-prediction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .characteristics import CharCurve, measurement_transit
from .derivative_coeffs import (
    bracket_u,
    bracket_v,
    composite_speed,
    curve_rate_u_meas,
)
from .errors import ObserverError, UnsupportedModel
from .model import Grid, Kind, SystemModel
from .predictor import predict_interval
from .simulator import GRADIENT_LIMIT, STATE_NORM_LIMIT, PlantState


def differentiate_measurement(samples, dt: float, smooth: bool = False):
    """Causal backward differences of a sampled signal.

    First entry is 0 (no earlier sample).  With ``smooth`` a 3-point moving
    average is applied to the raw differences.
    """
    y = np.asarray(samples, float)
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    d = np.empty_like(y)
    d[1:] = (y[1:] - y[:-1]) / dt
    d[0] = 0.0
    if smooth:
        out = d.copy()
        for i in range(1, y.size):
            lo = max(1, i - 2)
            out[i] = np.mean(d[lo:i + 1])
        return out
    return d


@dataclass(frozen=True)
class OdeObserver:
    """Plug-in estimator for the boundary ODE from its local signals.

    ``rhs`` mode integrates dX_hat/dt = h(X_hat, u0, v0, t); ``direct`` mode
    assigns X_hat = solve(u0, v0, t) each step (deadbeat, zero horizon).
    """

    mode: str  # "rhs" | "direct"
    fn: Callable
    horizon: float = 0.0


def _bisect_root(f, lo, hi, tol=1e-12, iters=200):
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise UnsupportedModel("root not bracketed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def algebraic_ode_observer(
    model: SystemModel, box: float = 10.0, samples: int = 17
) -> OdeObserver:
    """Deadbeat ODE observer inverting the boundary coupling in X.

    Valid for scalar ODE states with the coupling strictly monotone in X on
    the operating box (checked numerically); the estimate solves
    g0(X_hat, v0, t) = u0 by bracketed bisection to 1e-12.
    """
    if model.n != 1:
        raise UnsupportedModel("algebraic observer needs a scalar ODE state")
    xs = np.linspace(-box, box, samples)
    for v0 in (-box, 0.0, box):
        vals = np.array([float(model.g0(np.array([xv]), v0, 0.0)) for xv in xs])
        d = np.diff(vals)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise UnsupportedModel(
                "boundary coupling is not strictly monotone in X"
            )

    def solve(u0, v0, t):
        def f(xv):
            return float(model.g0(np.array([xv]), v0, t)) - u0

        lo, hi = -box, box
        # Expand the bracket if the operating point drifted outside.
        for _ in range(60):
            if f(lo) * f(hi) <= 0:
                break
            lo *= 2.0
            hi *= 2.0
        return np.array([_bisect_root(f, lo, hi)])

    return OdeObserver(mode="direct", fn=solve, horizon=0.0)


@dataclass
class ObserverState:
    """Estimate of the state on the measurement characteristic at time t."""

    t: float
    u_hat: np.ndarray
    v_hat: np.ndarray
    X_hat: np.ndarray
    tau_curve: CharCurve
    curve_rate: Optional[np.ndarray] = None  # d tau_u / dt, quasilinear only
    p_hat: Optional[np.ndarray] = None
    q_hat: Optional[np.ndarray] = None
    prev_Y: Optional[float] = None
    prev_U: Optional[float] = None
    dY: float = 0.0
    dU: float = 0.0
    flush_time: float = 0.0
    converged: bool = False
    smooth: bool = False
    recent_dY: tuple = ()
    recent_dU: tuple = ()

    def copy_shallow(self):
        return dataclasses.replace(self)


def make_observer_state(
    model: SystemModel,
    grid: Grid,
    t0: float = 0.0,
    u_hat0=None,
    v_hat0=None,
    X_hat0=None,
    smooth: bool = False,
) -> ObserverState:
    """Initial observer state from guesses (defaults: zero fields)."""
    x = grid.x

    def sample(g):
        if g is None:
            return np.zeros_like(x)
        if callable(g):
            return np.asarray(g(x), float) * np.ones_like(x)
        return float(g) * np.ones_like(x)

    u_hat = sample(u_hat0)
    v_hat = sample(v_hat0)
    X_hat = (
        np.zeros(model.n)
        if X_hat0 is None
        else np.atleast_1d(np.asarray(X_hat0, float)).copy()
    )
    quasi = model.kind is Kind.QUASILINEAR
    p_hat = np.zeros_like(x) if quasi else None
    q_hat = np.zeros_like(x) if quasi else None
    curve = measurement_transit(model, grid, t0, field=(u_hat, v_hat))
    rate = (
        curve_rate_u_meas(model, grid, u_hat, v_hat, p_hat, q_hat)
        if quasi
        else None
    )
    # Flush horizon estimate: measurement-line transit plus two leftward
    # transits (curve estimate flush, then re-prediction coverage).
    zero = np.zeros_like(x)
    lam_u = np.asarray(model.lambda_u(x, zero, zero), float) * np.ones_like(x)
    lam_v = np.asarray(model.lambda_v(x, zero, zero), float) * np.ones_like(x)
    flush = float(np.trapezoid(1.0 / lam_u, x) + 2.0 * np.trapezoid(1.0 / lam_v, x))
    return ObserverState(
        t=t0, u_hat=u_hat, v_hat=v_hat, X_hat=X_hat, tau_curve=curve,
        curve_rate=rate, p_hat=p_hat, q_hat=q_hat,
        flush_time=t0 + flush, smooth=smooth,
    )


def _descend_u(model, grid, v_hat, y_top):
    """Re-integrate the rightward field down from the measurement."""
    x = grid.x
    u = np.empty_like(x)
    u[-1] = y_top

    def slope(i, uu):
        lam = float(model.lambda_u(x[i], uu, v_hat[i]))
        return float(model.f_u(x[i], uu, v_hat[i])) / lam

    h = grid.dx
    for i in range(grid.N, 0, -1):
        k1 = slope(i, u[i])
        u_p = u[i] - h * k1
        k2 = slope(i - 1, u_p)
        u[i - 1] = u[i] - 0.5 * h * (k1 + k2)
    return u


def _descend_u_p(model, grid, v_hat, q_hat, y_top, dy_top):
    """Joint downward integration of the rightward field and its derivative."""
    x = grid.x
    u = np.empty_like(x)
    p = np.empty_like(x)
    u[-1] = y_top
    p[-1] = dy_top

    def slopes(i, uu, pp):
        lam = float(model.lambda_u(x[i], uu, v_hat[i]))
        du = float(model.f_u(x[i], uu, v_hat[i])) / lam
        bu = float(
            bracket_u(model, np.array([x[i]]), np.array([uu]),
                      np.array([v_hat[i]]), np.array([pp]),
                      np.array([q_hat[i]]))[0]
        )
        return du, bu / lam

    h = grid.dx
    for i in range(grid.N, 0, -1):
        du1, dp1 = slopes(i, u[i], p[i])
        u_p = u[i] - h * du1
        p_p = p[i] - h * dp1
        du2, dp2 = slopes(i - 1, u_p, p_p)
        u[i - 1] = u[i] - 0.5 * h * (du1 + du2)
        p[i - 1] = p[i] - 0.5 * h * (dp1 + dp2)
    return u, p


def _advect_left(field, speed, source, dx, inflow):
    """One Euler stage of leftward transport with the given inflow at x = 1."""
    d = np.zeros_like(field)
    d[:-1] = speed[:-1] * (field[1:] - field[:-1]) / dx + source[:-1]
    return d


def _causal_diff(value, prev, dt, recent, smooth):
    if prev is None:
        raw = 0.0
    else:
        raw = (value - prev) / dt
    recent = (recent + (raw,))[-3:]
    return (float(np.mean(recent)) if smooth else raw), recent


def observer_step(
    obs: ObserverState,
    Y_sample: float,
    U_sample: float,
    dt: float,
    model: SystemModel,
    grid: Grid,
    ode_obs: OdeObserver,
    cfl_limit: float = 1.0,
) -> ObserverState:
    """Advance the observer by one step to t + dt.

    ``Y_sample`` and ``U_sample`` are the measurement and applied input at
    the new time.  Raises ObserverError if dt violates the CFL bound of the
    estimate's transport speed or if the estimate escapes.
    """
    x = grid.x
    dx = grid.dx
    t1 = obs.t + dt
    quasi = model.kind is Kind.QUASILINEAR

    dY, recent_dY = _causal_diff(Y_sample, obs.prev_Y, dt, obs.recent_dY, obs.smooth)
    dU, recent_dU = _causal_diff(U_sample, obs.prev_U, dt, obs.recent_dU, obs.smooth)

    u_hat = obs.u_hat.copy()
    v_hat = obs.v_hat.copy()

    mu0, _, nu_u = composite_speed(model, x, u_hat, v_hat)
    if quasi:
        sigma = obs.curve_rate
        speed = sigma * mu0
    else:
        sigma = np.ones_like(x)
        speed = mu0
    if dt * float(np.max(speed)) / dx > cfl_limit + 1e-12:
        raise ObserverError(
            f"dt={dt} violates the estimate CFL bound {dx / np.max(speed)}"
        )

    # Leftward transport of v_hat (and its derivative), inflow at x = 1.
    def fv_src(vv):
        return sigma * nu_u * (
            np.asarray(model.f_v(x, u_hat, vv), float) * np.ones_like(x)
        )

    d1 = _advect_left(v_hat, speed, fv_src(v_hat), dx, U_sample)
    v1 = v_hat + dt * d1
    v1[-1] = U_sample
    d2 = _advect_left(v1, speed, fv_src(v1), dx, U_sample)
    v_new = v_hat + 0.5 * dt * (d1 + d2)
    v_new[-1] = U_sample

    if quasi:
        q_hat = obs.q_hat.copy()

        def q_src(qq):
            return sigma * nu_u * bracket_v(model, x, u_hat, v_hat, obs.p_hat, qq)

        e1 = _advect_left(q_hat, speed, q_src(q_hat), dx, dU)
        q1 = q_hat + dt * e1
        q1[-1] = dU
        e2 = _advect_left(q1, speed, q_src(q1), dx, dU)
        q_new = q_hat + 0.5 * dt * (e1 + e2)
        q_new[-1] = dU
        u_new, p_new = _descend_u_p(model, grid, v_new, q_new, Y_sample, dY)
    else:
        q_new = None
        p_new = None
        u_new = _descend_u(model, grid, v_new, Y_sample)

    for arr, lim in ((u_new, STATE_NORM_LIMIT), (v_new, STATE_NORM_LIMIT)):
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > lim:
            raise ObserverError("estimate blow-up")
    if quasi and (
        not np.all(np.isfinite(p_new))
        or max(np.max(np.abs(p_new)), np.max(np.abs(q_new))) > GRADIENT_LIMIT
    ):
        raise ObserverError("estimate derivative blow-up")

    # Measurement curve and its rate from the updated fields.
    curve = measurement_transit(model, grid, t1, field=(u_new, v_new))
    rate = (
        curve_rate_u_meas(model, grid, u_new, v_new, p_new, q_new)
        if quasi
        else None
    )

    # ODE estimate from the reconstructed x = 0 values (cascade: the PDE
    # fields above never consumed X_hat).
    foot_time = float(curve.s[0])
    scale = float(rate[0]) if quasi else 1.0
    if ode_obs.mode == "direct":
        X_new = np.asarray(
            ode_obs.fn(float(u_new[0]), float(v_new[0]), foot_time), float
        )
    else:
        X_old = obs.X_hat
        k1 = scale * np.asarray(
            ode_obs.fn(X_old, float(obs.u_hat[0]), float(obs.v_hat[0]),
                       float(obs.tau_curve.s[0])),
            float,
        )
        Xp = X_old + dt * k1
        k2 = scale * np.asarray(
            ode_obs.fn(Xp, float(u_new[0]), float(v_new[0]), foot_time), float
        )
        X_new = X_old + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(X_new)):
        raise ObserverError("ODE estimate blow-up")

    return ObserverState(
        t=t1, u_hat=u_new, v_hat=v_new, X_hat=X_new, tau_curve=curve,
        curve_rate=rate, p_hat=p_new, q_hat=q_new,
        prev_Y=Y_sample, prev_U=U_sample, dY=dY, dU=dU,
        flush_time=obs.flush_time,
        converged=t1 >= obs.flush_time + ode_obs.horizon,
        smooth=obs.smooth, recent_dY=recent_dY, recent_dU=recent_dU,
    )


def estimate_current(
    obs: ObserverState,
    model: SystemModel,
    grid: Grid,
    include_right_node: Optional[bool] = None,
    cfl: float = 0.8,
) -> PlantState:
    """Map the curve estimate to a current-state estimate by re-prediction.

    Semilinear plants use the frozen measurement curve and leave the actuated
    node out of the marched domain (its input value is not known online);
    quasilinear plants use the observer's state-dependent curve.
    """
    quasi = model.kind is Kind.QUASILINEAR
    if include_right_node is None:
        include_right_node = quasi
    curve = (
        obs.tau_curve
        if quasi
        else measurement_transit(model, grid, obs.t, field=None)
    )
    return predict_interval(
        model, curve, obs.u_hat, obs.v_hat, obs.X_hat, grid,
        cfl=cfl, include_right_node=include_right_node,
    )


class ObserverLoop:
    """Mutable wrapper advancing an ObserverState alongside a simulation."""

    def __init__(self, model, grid, ode_obs, state: ObserverState, cfl=0.8):
        self.model = model
        self.grid = grid
        self.ode_obs = ode_obs
        self.state = state
        self.cfl = cfl

    def step(self, Y: float, U: float, t: float):
        dt = t - self.state.t
        if dt <= 0:
            return
        self.state = observer_step(
            self.state, Y, U, dt, self.model, self.grid, self.ode_obs
        )

    def estimate(self) -> PlantState:
        return estimate_current(self.state, self.model, self.grid, cfl=self.cfl)
