"""Plant description: coefficient functions, initial data, grid and validation.

A plant consists of two counter-propagating transport states u (rightward,
speed ``lambda_u``) and v (leftward, speed ``lambda_v``) on x in [0, 1] with
source terms ``f_u``/``f_v``, coupled at x = 0 to an ODE
``dX/dt = f0(X, v(0,t), t)`` that closes the loop through the inflow value
``u(0,t) = g0(X, v(0,t), t)``.  The control enters at x = 1 as ``v(1,t)``.

All distributed coefficient functions must accept numpy arrays for
(x, u, v) and broadcast.  ``f0`` returns a length-n vector, ``g0`` and ``K``
return scalars.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError


class Kind(enum.Enum):
    SEMILINEAR = "semilinear"
    QUASILINEAR = "quasilinear"


class Scenario(enum.Enum):
    STABILIZATION = "stabilization"
    TRACKING = "tracking"


@dataclass(frozen=True)
class Partials:
    """Partial derivatives of the coefficient functions.

    Any entry may be None; ``numeric_partials`` fills missing ones by central
    finite differences.  Distributed entries take (x, u, v) arrays.  ODE-side
    entries take (X, v0, t) with X a length-n vector; ``df0_dX`` returns an
    (n, n) matrix, ``df0_dv``/``dg0_dX``/``dK_dX`` return length-n vectors,
    the rest return scalars.
    """

    dlu_du: Optional[Callable] = None
    dlu_dv: Optional[Callable] = None
    dlv_du: Optional[Callable] = None
    dlv_dv: Optional[Callable] = None
    dfu_du: Optional[Callable] = None
    dfu_dv: Optional[Callable] = None
    dfv_du: Optional[Callable] = None
    dfv_dv: Optional[Callable] = None
    df0_dX: Optional[Callable] = None
    df0_dv: Optional[Callable] = None
    dg0_dX: Optional[Callable] = None
    dg0_dv: Optional[Callable] = None
    dg0_dt: Optional[Callable] = None
    dK_dX: Optional[Callable] = None
    dK_dt: Optional[Callable] = None

    def complete(self) -> bool:
        return all(
            getattr(self, f.name) is not None for f in dataclasses.fields(self)
        )


@dataclass(frozen=True)
class SystemModel:
    """Immutable plant description.

    Fields are pure functions of their arguments; instances are safe to share
    across threads.
    """

    lambda_u: Callable
    lambda_v: Callable
    f_u: Callable
    f_v: Callable
    f0: Callable
    g0: Callable
    K: Callable
    kind: Kind
    n: int = 1
    partials: Partials = dataclasses.field(default_factory=Partials)
    name: str = ""

    @property
    def semilinear(self) -> bool:
        return self.kind is Kind.SEMILINEAR


@dataclass(frozen=True)
class InitialData:
    """Initial profiles u0(x), v0(x) (vectorized callables) and ODE state X0."""

    u0: Callable
    v0: Callable
    X0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X0", np.atleast_1d(np.asarray(self.X0, float)))


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on [0, 1] with N cells (N + 1 nodes)."""

    N: int
    x: np.ndarray
    dx: float

    @staticmethod
    def uniform(N: int) -> "Grid":
        if N < 2:
            raise ValueError("grid needs N >= 2 cells")
        x = np.linspace(0.0, 1.0, N + 1)
        return Grid(N=N, x=x, dx=1.0 / N)


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: Optional[dict] = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f"  [{c.detail}]" if c.detail else ""
            if c.witness:
                extra += f"  witness={c.witness}"
            lines.append(f"{status:4s}  {c.name}{extra}")
        return "\n".join(lines)


# Compatibility tolerance: exact analytic data passes, perturbed data fails.
COMPAT_RTOL = 1e-9
# Default finite-difference slope bound accepted as "Lipschitz" on the grid.
DEFAULT_SLOPE_BOUND = 100.0

_BOX_POINTS = 9  # lattice points per state axis in the validation box


def _check_finite(value, func_name, point):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(func_name, point)
    return arr


def state_box(init: InitialData, grid: Grid) -> float:
    """Half-width of the validation hypercube around the operating range."""
    u0 = np.asarray(init.u0(grid.x), float)
    v0 = np.asarray(init.v0(grid.x), float)
    w_max = max(np.max(np.abs(u0)), np.max(np.abs(v0)))
    return 2.0 * max(w_max, np.max(np.abs(init.X0)), 1.0)


def validate_model(
    model: SystemModel,
    init: InitialData,
    grid: Grid,
    scenario: Scenario = Scenario.STABILIZATION,
    slope_bound: float = DEFAULT_SLOPE_BOUND,
) -> ValidationReport:
    """Check the plant against its standing structural conditions.

    Conditions checked on a sampled state box (positivity of both speeds,
    semilinearity when declared, equilibrium identities for stabilization
    scenarios) plus data conditions (Lipschitz slope bound and boundary
    compatibility for quasilinear plants).  Returns a report with one entry
    per condition, including the witness point of any failure.

    Raises
    ------
    EvaluationError
        If any coefficient function returns a non-finite value.
    """
    checks = []
    box = state_box(init, grid)
    lattice = np.linspace(-box, box, _BOX_POINTS)
    t_samples = np.linspace(0.0, 10.0, _BOX_POINTS)
    x = grid.x

    # Speed positivity over the state box.
    witness = None
    for name, fn in (("lambda_u", model.lambda_u), ("lambda_v", model.lambda_v)):
        for uu in lattice:
            for vv in lattice:
                vals = _check_finite(
                    fn(x, np.full_like(x, uu), np.full_like(x, vv)),
                    name,
                    {"u": uu, "v": vv},
                )
                vals = np.broadcast_to(vals, x.shape)
                bad = np.nonzero(~(vals > 0.0))[0]
                if bad.size and witness is None:
                    witness = {"fn": name, "x": float(x[bad[0]]), "u": uu, "v": vv}
    checks.append(
        CheckResult(
            "speed positivity",
            witness is None,
            witness,
            "lambda_u, lambda_v > 0 on the state box",
        )
    )

    # Declared semilinearity: speeds must not react to the state.
    if model.semilinear:
        witness = None
        ref_u = np.broadcast_to(
            np.asarray(model.lambda_u(x, 0.0 * x, 0.0 * x), float), x.shape
        )
        ref_v = np.broadcast_to(
            np.asarray(model.lambda_v(x, 0.0 * x, 0.0 * x), float), x.shape
        )
        for uu in lattice:
            for vv in lattice:
                got_u = np.broadcast_to(
                    np.asarray(
                        model.lambda_u(x, np.full_like(x, uu), np.full_like(x, vv)),
                        float,
                    ),
                    x.shape,
                )
                got_v = np.broadcast_to(
                    np.asarray(
                        model.lambda_v(x, np.full_like(x, uu), np.full_like(x, vv)),
                        float,
                    ),
                    x.shape,
                )
                if witness is None and (
                    np.any(got_u != ref_u) or np.any(got_v != ref_v)
                ):
                    witness = {"u": uu, "v": vv}
        checks.append(
            CheckResult(
                "semilinearity",
                witness is None,
                witness,
                "speeds identical for all sampled states",
            )
        )

    # Equilibrium identities (only meaningful when stabilizing the origin).
    if scenario is Scenario.STABILIZATION:
        witness = None
        zero = np.zeros_like(x)
        fu = np.broadcast_to(
            _check_finite(model.f_u(x, zero, zero), "f_u", {"u": 0, "v": 0}), x.shape
        )
        fv = np.broadcast_to(
            _check_finite(model.f_v(x, zero, zero), "f_v", {"u": 0, "v": 0}), x.shape
        )
        bad = np.nonzero((np.abs(fu) > 1e-12) | (np.abs(fv) > 1e-12))[0]
        if bad.size:
            witness = {"fn": "F", "x": float(x[bad[0]])}
        X0z = np.zeros(model.n)
        for t in t_samples:
            if witness is not None:
                break
            f0v = _check_finite(model.f0(X0z, 0.0, t), "f0", {"t": t})
            g0v = _check_finite(model.g0(X0z, 0.0, t), "g0", {"t": t})
            Kv = _check_finite(model.K(X0z, t), "K", {"t": t})
            for fn, val in (("f0", f0v), ("g0", g0v), ("K", Kv)):
                if np.max(np.abs(np.atleast_1d(val))) > 1e-12:
                    witness = {"fn": fn, "t": float(t)}
                    break
        checks.append(
            CheckResult(
                "origin equilibrium",
                witness is None,
                witness,
                "F(x,0)=0, f0(0,0,t)=0, g0(0,0,t)=0, K(0,t)=0",
            )
        )

    # Data conditions for quasilinear plants.
    u0 = _check_finite(init.u0(x), "u0", {}) * np.ones_like(x)
    v0 = _check_finite(init.v0(x), "v0", {}) * np.ones_like(x)
    if model.kind is Kind.QUASILINEAR:
        slope_u = float(np.max(np.abs(np.diff(u0))) / grid.dx)
        slope_v = float(np.max(np.abs(np.diff(v0))) / grid.dx)
        ok = slope_u <= slope_bound and slope_v <= slope_bound
        checks.append(
            CheckResult(
                "Lipschitz slope bound",
                ok,
                None if ok else {"slope_u": slope_u, "slope_v": slope_v},
                f"grid slope <= {slope_bound}",
            )
        )
        g00 = float(_check_finite(model.g0(init.X0, float(v0[0]), 0.0), "g0", {"t": 0}))
        err = abs(float(u0[0]) - g00)
        ok = err <= COMPAT_RTOL * (1.0 + abs(float(u0[0])))
        checks.append(
            CheckResult(
                "boundary compatibility",
                ok,
                None if ok else {"u0(0)": float(u0[0]), "g0": g00},
                "u0(0) = g0(X0, v0(0), 0)",
            )
        )

    return ValidationReport(checks)


_FD_REL_STEP = 1e-6


def _fd_step(v):
    return _FD_REL_STEP * (1.0 + abs(float(v)))


def _central(f, args, idx):
    """Central difference of f in its idx-th scalar argument."""

    def d(*a):
        a = list(a)
        h = _fd_step(a[idx])
        hi = list(a)
        lo = list(a)
        hi[idx] = a[idx] + h
        lo[idx] = a[idx] - h
        return (np.asarray(f(*hi), float) - np.asarray(f(*lo), float)) / (2.0 * h)

    return d


def _central_field(f, idx):
    """Central difference for distributed functions of (x, u, v), vectorized."""

    def d(x, u, v):
        x = np.asarray(x, float)
        u = np.asarray(u, float) * np.ones_like(x)
        v = np.asarray(v, float) * np.ones_like(x)
        args = [x, u, v]
        h = _FD_REL_STEP * (1.0 + np.abs(args[idx]))
        hi = [a.copy() for a in args]
        lo = [a.copy() for a in args]
        hi[idx] = args[idx] + h
        lo[idx] = args[idx] - h
        return (np.asarray(f(*hi), float) - np.asarray(f(*lo), float)) / (2.0 * h)

    return d


def _central_vec_X(f, n, shape):
    """Central difference of f(X, ...) in the leading vector argument."""

    def d(X, *rest):
        X = np.atleast_1d(np.asarray(X, float))
        cols = []
        for j in range(n):
            h = _fd_step(X[j])
            hi = X.copy()
            lo = X.copy()
            hi[j] += h
            lo[j] -= h
            cols.append(
                (np.asarray(f(hi, *rest), float) - np.asarray(f(lo, *rest), float))
                / (2.0 * h)
            )
        if shape == "matrix":
            return np.column_stack([np.atleast_1d(c) for c in cols])
        return np.array([float(np.asarray(c)) for c in cols])

    return d


def numeric_partials(model: SystemModel) -> SystemModel:
    """Return a model with every missing partial filled by central differences.

    User-supplied partials are kept as-is.  At kinks of absolute-value terms
    the central difference returns the symmetric value (0 at the kink).
    """
    p = model.partials
    n = model.n
    filled = {}

    def put(name, maker):
        filled[name] = getattr(p, name) or maker()

    put("dlu_du", lambda: _central_field(model.lambda_u, 1))
    put("dlu_dv", lambda: _central_field(model.lambda_u, 2))
    put("dlv_du", lambda: _central_field(model.lambda_v, 1))
    put("dlv_dv", lambda: _central_field(model.lambda_v, 2))
    put("dfu_du", lambda: _central_field(model.f_u, 1))
    put("dfu_dv", lambda: _central_field(model.f_u, 2))
    put("dfv_du", lambda: _central_field(model.f_v, 1))
    put("dfv_dv", lambda: _central_field(model.f_v, 2))
    put("df0_dX", lambda: _central_vec_X(model.f0, n, "matrix"))
    put("df0_dv", lambda: _central(model.f0, None, 1))
    put("dg0_dX", lambda: _central_vec_X(model.g0, n, "vector"))
    put("dg0_dv", lambda: _central(model.g0, None, 1))
    put("dg0_dt", lambda: _central(model.g0, None, 2))
    put("dK_dX", lambda: _central_vec_X(model.K, n, "vector"))
    put("dK_dt", lambda: _central(model.K, None, 1))

    return dataclasses.replace(model, partials=Partials(**filled))


def initial_state(model: SystemModel, init: InitialData, grid: Grid):
    """Sample the initial data onto the grid as a PlantState at t = 0."""
    from .simulator import PlantState

    u = np.asarray(init.u0(grid.x), float) * np.ones_like(grid.x)
    v = np.asarray(init.v0(grid.x), float) * np.ones_like(grid.x)
    return PlantState(t=0.0, u=u, v=v, X=init.X0.copy())
