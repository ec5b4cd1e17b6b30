"""Forward-in-time plant solver, closed-loop drivers and blow-up detection.

Discretization: first-order upwind in space (u advected rightward with
backward differences, v leftward with forward differences), explicit 2-stage
strong-stability-preserving Runge-Kutta in time, dt = cfl * dx / max(speed)
re-evaluated every step.  Inflow boundaries are imposed algebraically after
each stage: v(1, t) = U(t) and u(0, t) = g0(X, v(0, t), t).  The boundary ODE
is advanced by the same stepper.

Trajectories are plain data; a single run is sequential and bit-deterministic
for identical configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputCoverageError, NumericsError
from .model import Grid, InitialData, SystemModel, initial_state

STATE_NORM_LIMIT = 1.0e3
GRADIENT_LIMIT = 1.0e4
_TIME_EPS = 1e-12


@dataclass
class PlantState:
    """Distributed state sampled on grid nodes plus the boundary ODE state."""

    t: float
    u: np.ndarray
    v: np.ndarray
    X: np.ndarray

    def copy(self) -> "PlantState":
        return PlantState(self.t, self.u.copy(), self.v.copy(), self.X.copy())

    def w_norm(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))


@dataclass(frozen=True)
class BlowupRecord:
    time: float
    trigger: str  # "NonFinite" | "StateNorm" | "GradientNorm"
    value: float


def detect_blowup(state: PlantState, grid: Grid) -> Optional[BlowupRecord]:
    """Finite-time escape check: norm, gradient and finiteness thresholds."""
    w = np.concatenate((state.u, state.v))
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(state.X))):
        return BlowupRecord(state.t, "NonFinite", float("nan"))
    norm = max(float(np.max(np.abs(w))), float(np.max(np.abs(state.X))))
    if norm > STATE_NORM_LIMIT:
        return BlowupRecord(state.t, "StateNorm", norm)
    gx = max(
        float(np.max(np.abs(np.diff(state.u)))),
        float(np.max(np.abs(np.diff(state.v)))),
    ) / grid.dx
    if gx > GRADIENT_LIMIT:
        return BlowupRecord(state.t, "GradientNorm", gx)
    return None


# ----------------------------------------------------------------------------
# Input signals


@dataclass(frozen=True)
class InputSegment:
    """Piecewise-linear scalar control signal on [a, b], uniform samples."""

    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("segment needs b > a")
        vals = np.asarray(self.values, float)
        if vals.ndim != 1 or vals.size < 2 or not np.all(np.isfinite(vals)):
            raise ValueError("segment needs >= 2 finite samples")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.values.size)

    def eval(self, t: float) -> float:
        if t < self.a - _TIME_EPS or t > self.b + _TIME_EPS:
            raise InputCoverageError(
                f"t={t} outside input segment [{self.a}, {self.b}]"
            )
        return float(np.interp(t, self.times, self.values))


class ConstantInput:
    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, t: float) -> float:
        return self.value


class CallableInput:
    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn

    def eval(self, t: float) -> float:
        return float(self.fn(t))


class StitchedInput:
    """Consecutive input segments; later segments win at shared endpoints."""

    def __init__(self, segments=()):
        self.segments = list(segments)

    def append(self, seg: InputSegment):
        self.segments.append(seg)

    def eval(self, t: float) -> float:
        for seg in reversed(self.segments):
            if seg.a - _TIME_EPS <= t <= seg.b + _TIME_EPS:
                return seg.eval(t)
        raise InputCoverageError(f"t={t} not covered by any input segment")


def as_input(obj):
    """Wrap a segment, callable or constant into an input with .eval(t)."""
    if hasattr(obj, "eval"):
        return obj
    if callable(obj):
        return CallableInput(obj)
    return ConstantInput(float(obj))


# ----------------------------------------------------------------------------
# Trajectory record


@dataclass
class Trajectory:
    x: np.ndarray
    times: np.ndarray
    u: np.ndarray  # (n_snap, N+1)
    v: np.ndarray
    X: np.ndarray  # (n_snap, n)
    U: np.ndarray  # applied input at snapshot times
    blowup: Optional[BlowupRecord] = None
    traces: Optional[dict] = None  # per-step: t, u0, uN, v0, vN, U
    control_records: list = field(default_factory=list)
    observer_records: list = field(default_factory=list)

    def final_state(self) -> PlantState:
        return PlantState(
            float(self.times[-1]), self.u[-1].copy(), self.v[-1].copy(),
            self.X[-1].copy(),
        )

    def w_inf(self) -> np.ndarray:
        return np.maximum(
            np.max(np.abs(self.u), axis=1), np.max(np.abs(self.v), axis=1)
        )

    def X_inf(self) -> np.ndarray:
        return np.max(np.abs(self.X), axis=1)

    def field_at(self, name: str, node: int, t):
        """Linear-in-time interpolation of u or v at one grid node."""
        arr = getattr(self, name)[:, node]
        return np.interp(t, self.times, arr)


# ----------------------------------------------------------------------------
# Stepping kernels (shared with the determinate-set solvers)


def plant_rhs(model: SystemModel, grid: Grid, u, v, X, t):
    """Upwind semi-discrete right-hand side; inflow rows left at zero."""
    x = grid.x
    dx = grid.dx
    lam_u = np.asarray(model.lambda_u(x, u, v), float) * np.ones_like(x)
    lam_v = np.asarray(model.lambda_v(x, u, v), float) * np.ones_like(x)
    du = np.zeros_like(u)
    dv = np.zeros_like(v)
    fu = np.asarray(model.f_u(x, u, v), float) * np.ones_like(x)
    fv = np.asarray(model.f_v(x, u, v), float) * np.ones_like(x)
    du[1:] = -lam_u[1:] * (u[1:] - u[:-1]) / dx + fu[1:]
    dv[:-1] = lam_v[:-1] * (v[1:] - v[:-1]) / dx + fv[:-1]
    dX = np.asarray(model.f0(X, float(v[0]), t), float)
    return du, dv, dX


def impose_bc(model: SystemModel, u, v, X, t, u_val: float):
    v[-1] = u_val
    u[0] = float(model.g0(X, float(v[0]), t))


def max_speed(model: SystemModel, grid: Grid, u, v) -> float:
    lam_u = np.asarray(model.lambda_u(grid.x, u, v), float)
    lam_v = np.asarray(model.lambda_v(grid.x, u, v), float)
    ms = max(float(np.max(lam_u)), float(np.max(lam_v)))
    if not np.isfinite(ms) or ms <= 0.0:
        raise NumericsError(f"invalid propagation speed bound {ms}")
    return ms


def plant_step(model, grid, u, v, X, t, dt, input_eval):
    """One SSP-RK2 step; boundary values re-imposed after each stage."""
    du1, dv1, dX1 = plant_rhs(model, grid, u, v, X, t)
    u1 = u + dt * du1
    v1 = v + dt * dv1
    X1 = X + dt * dX1
    t1 = t + dt
    impose_bc(model, u1, v1, X1, t1, input_eval(t1))
    du2, dv2, dX2 = plant_rhs(model, grid, u1, v1, X1, t1)
    un = u + 0.5 * dt * (du1 + du2)
    vn = v + 0.5 * dt * (dv1 + dv2)
    Xn = X + 0.5 * dt * (dX1 + dX2)
    impose_bc(model, un, vn, Xn, t1, input_eval(t1))
    return un, vn, Xn


# ----------------------------------------------------------------------------
# Drivers


@dataclass
class SimOptions:
    cfl: float = 0.8
    snapshot_dt: Optional[float] = 0.05  # None records every step
    record_traces: bool = False
    max_steps: int = 5_000_000


def _snapshot_times(t0, t_end, snapshot_dt):
    if snapshot_dt is None:
        return None
    n = int(np.floor((t_end - t0) / snapshot_dt + 0.5))
    ts = t0 + snapshot_dt * np.arange(1, n + 1)
    ts = ts[(ts > t0 + _TIME_EPS) & (ts < t_end - _TIME_EPS)]
    return np.concatenate((ts, [t_end]))


class _Recorder:
    def __init__(self, grid, n, record_traces):
        self.grid = grid
        self.snap_t, self.snap_u, self.snap_v = [], [], []
        self.snap_X, self.snap_U = [], []
        self.traces = (
            {"t": [], "u0": [], "uN": [], "v0": [], "vN": [], "U": []}
            if record_traces
            else None
        )

    def snapshot(self, state, u_val):
        self.snap_t.append(state.t)
        self.snap_u.append(state.u.copy())
        self.snap_v.append(state.v.copy())
        self.snap_X.append(state.X.copy())
        self.snap_U.append(u_val)

    def trace(self, state, u_val):
        if self.traces is None:
            return
        tr = self.traces
        tr["t"].append(state.t)
        tr["u0"].append(float(state.u[0]))
        tr["uN"].append(float(state.u[-1]))
        tr["v0"].append(float(state.v[0]))
        tr["vN"].append(float(state.v[-1]))
        tr["U"].append(u_val)

    def build(self, grid, blowup) -> Trajectory:
        traces = None
        if self.traces is not None:
            traces = {k: np.asarray(vals, float) for k, vals in self.traces.items()}
        return Trajectory(
            x=grid.x,
            times=np.asarray(self.snap_t, float),
            u=np.asarray(self.snap_u, float),
            v=np.asarray(self.snap_v, float),
            X=np.asarray(self.snap_X, float),
            U=np.asarray(self.snap_U, float),
            blowup=blowup,
            traces=traces,
        )


def march(
    model: SystemModel,
    grid: Grid,
    state: PlantState,
    input_signal,
    t_end: float,
    opts: SimOptions,
    recorder: _Recorder,
    on_step_start=None,
    on_step=None,
):
    """Advance the plant to t_end (or blow-up), filling the recorder.

    Returns (final_state, blowup_record_or_None).  ``on_step_start(state)``
    may return an input override value for the upcoming step (used by
    per-step sampled control laws); ``on_step(state)`` runs after each step.
    """
    sig = as_input(input_signal)
    u, v, X, t = state.u.copy(), state.v.copy(), state.X.copy(), state.t
    snaps = _snapshot_times(t, t_end, opts.snapshot_dt)
    snap_idx = 0
    cur = PlantState(t, u, v, X)

    rec = detect_blowup(cur, grid)
    if rec is not None:
        return cur, rec

    steps = 0
    while t < t_end - _TIME_EPS:
        if steps >= opts.max_steps:
            raise NumericsError("step budget exhausted before reaching t_end")
        held = None
        if on_step_start is not None:
            held = on_step_start(cur)
        eval_fn = sig.eval if held is None else (lambda s, _h=held: _h)

        dt = opts.cfl * grid.dx / max_speed(model, grid, u, v)
        if snaps is not None and snap_idx < snaps.size:
            dt = min(dt, snaps[snap_idx] - t)
        dt = min(dt, t_end - t)
        if dt <= 0:
            raise NumericsError("non-positive time step")

        u, v, X = plant_step(model, grid, u, v, X, t, dt, eval_fn)
        t = t + dt
        cur = PlantState(t, u, v, X)
        steps += 1

        applied = eval_fn(t)
        recorder.trace(cur, applied)
        rec = detect_blowup(cur, grid)
        if rec is not None:
            recorder.snapshot(cur, applied)
            return cur, rec
        if snaps is None:
            recorder.snapshot(cur, applied)
        elif snap_idx < snaps.size and t >= snaps[snap_idx] - _TIME_EPS:
            recorder.snapshot(cur, applied)
            snap_idx += 1
        if on_step is not None:
            on_step(cur, applied)
    return cur, None


def simulate(
    model: SystemModel,
    init,
    input_signal,
    t_end: float,
    grid: Grid,
    opts: Optional[SimOptions] = None,
) -> Trajectory:
    """Open-loop method-of-lines solution under a given input signal.

    ``init`` is an InitialData or a PlantState to resume from.  Stops early
    with a blow-up record when the state escapes; non-finite states are
    recorded, not raised.
    """
    opts = opts or SimOptions()
    state = (
        initial_state(model, init, grid) if isinstance(init, InitialData) else init
    )
    recorder = _Recorder(grid, model.n, opts.record_traces)
    sig = as_input(input_signal)
    recorder.snapshot(state, sig.eval(state.t))
    recorder.trace(state, sig.eval(state.t))
    _, blowup = march(
        model, grid, state, sig, t_end, opts, recorder
    )
    return recorder.build(grid, blowup)


def run_closed_loop(
    model: SystemModel,
    init,
    controller,
    t_end: float,
    grid: Grid,
    opts: Optional[SimOptions] = None,
    observer=None,
    controller_start: float = 0.0,
    warmup_input=0.0,
) -> Trajectory:
    """Plant in feedback with a controller, optionally through an observer.

    Sampled-interval controllers (``control_interval``) are evaluated at
    t_k = k * theta and their emitted segments drive the plant over each
    interval.  Per-step controllers (``control``) are re-evaluated every
    simulator step and held constant over the step.  In output-feedback mode
    the controller consumes the observer's current-state estimate; the
    observer itself is advanced synchronously with the plant using the
    actuated-boundary measurement u(1, t) and the applied input.

    Controller-internal failures raise ControlError; plant blow-up is
    recorded on the trajectory instead of raised.
    """
    opts = opts or SimOptions()
    state = (
        initial_state(model, init, grid) if isinstance(init, InitialData) else init
    )
    recorder = _Recorder(grid, model.n, opts.record_traces)
    records: list = []
    observer_records: list = []

    def obs_sync(cur, applied):
        if observer is None:
            return
        observer.step(Y=float(cur.u[-1]), U=applied, t=cur.t)

    def state_for_controller(cur):
        if observer is None:
            return cur
        est = observer.estimate()
        observer_records.append(
            {"t": cur.t, "X_hat": est.X.copy(), "w_hat_norm": est.w_norm()}
        )
        return est

    blowup = None
    if hasattr(controller, "control_interval"):
        theta = controller.theta
        if opts.snapshot_dt is not None:
            ratio = theta / opts.snapshot_dt
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(
                    "controller period theta must be an integer multiple of "
                    "snapshot_dt"
                )
        stitched = StitchedInput()
        recorder.snapshot(state, float(as_input(warmup_input).eval(state.t)))
        recorder.trace(state, float(as_input(warmup_input).eval(state.t)))
        t_k = state.t
        while t_k < t_end - _TIME_EPS:
            t_k1 = min(t_k + theta, t_end)
            if t_k < controller_start - _TIME_EPS:
                warm = as_input(warmup_input)
                seg = InputSegment(
                    t_k, t_k + theta,
                    np.array([warm.eval(t_k), warm.eval(t_k + theta)]),
                )
            else:
                seg, details = controller.control_interval(
                    state_for_controller(state), return_details=True
                )
                records.append(details)
            stitched.append(seg)
            state, blowup = march(
                model, grid, state, stitched, t_k1, opts, recorder,
                on_step=obs_sync,
            )
            if blowup is not None:
                break
            t_k = t_k1
    else:
        def on_step_start(cur):
            if cur.t < controller_start - _TIME_EPS:
                return float(as_input(warmup_input).eval(cur.t))
            return float(controller.control(state_for_controller(cur)))

        recorder.snapshot(state, on_step_start(state))
        recorder.trace(state, on_step_start(state))
        state, blowup = march(
            model, grid, state, ConstantInput(0.0), t_end, opts, recorder,
            on_step_start=on_step_start, on_step=obs_sync,
        )

    traj = recorder.build(grid, blowup)
    traj.control_records = records
    traj.observer_records = observer_records
    return traj
