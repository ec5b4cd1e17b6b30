"""Named model presets addressable from configs and the CLI.

``paper-sec5`` is the benchmark system used throughout the test suite: a
quasilinear plant with a piecewise rightward speed (kink at x = 0.5, so grids
must place a node there, i.e. even N), a state-dependent leftward speed, and
a scalar boundary ODE with a destabilizing quadratic term.  Under the constant
input U = 1 it escapes in finite time; the bundled controllers stabilize it.
"""

from __future__ import annotations

import dataclasses

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .model import InitialData, Kind, Partials, SystemModel


@dataclass(frozen=True)
class Preset:
    model: SystemModel
    init: InitialData
    requires_even_N: bool = False
    # open-loop input used by the blow-up scenario, None otherwise
    open_loop_U: Optional[float] = None


def default_reference(t):
    """Default tracking reference: slow, small sinusoid."""
    return 0.3 * np.sin(0.5 * t)


def default_reference_rate(t):
    return 0.15 * np.cos(0.5 * t)


def _benchmark_model(objective: str, x_ref: Callable | None = None) -> SystemModel:
    def lambda_u(x, u, v):
        x = np.asarray(x, float)
        return np.where(x < 0.5, 0.5, x) + 0.0 * np.asarray(u)

    def lambda_v(x, u, v):
        return 1.0 + 0.5 * (np.abs(u) + np.abs(v)) + 0.0 * np.asarray(x)

    def f_u(x, u, v):
        return np.sin(u + v) + 0.0 * np.asarray(x)

    def f_v(x, u, v):
        return np.sin(v - u) + 0.0 * np.asarray(x)

    def f0(X, v0, t):
        return np.array([X[0] * abs(X[0]) + v0])

    def g0(X, v0, t):
        return X[0] + v0

    zeros = lambda x, u, v: np.zeros_like(np.asarray(x, float) + np.asarray(u))

    if objective == "stabilization":
        def K(X, t):
            return -X[0] * abs(X[0]) - X[0]

        def dK_dX(X, t):
            return np.array([-2.0 * abs(X[0]) - 1.0])

        def dK_dt(X, t):
            return 0.0
    elif objective == "tracking":
        ref = x_ref or default_reference
        ref_rate = default_reference_rate if x_ref is None else None

        def K(X, t):
            return -X[0] * abs(X[0]) + 2.0 * (ref(t) - X[0])

        def dK_dX(X, t):
            return np.array([-2.0 * abs(X[0]) - 2.0])

        if ref_rate is not None:
            def dK_dt(X, t):
                return 2.0 * ref_rate(t)
        else:
            dK_dt = None  # filled numerically
    else:
        raise ConfigError(f"unknown objective {objective!r}", key="objective")

    partials = Partials(
        dlu_du=zeros,
        dlu_dv=zeros,
        dlv_du=lambda x, u, v: 0.5 * np.sign(u) + 0.0 * np.asarray(x),
        dlv_dv=lambda x, u, v: 0.5 * np.sign(v) + 0.0 * np.asarray(x),
        dfu_du=lambda x, u, v: np.cos(u + v) + 0.0 * np.asarray(x),
        dfu_dv=lambda x, u, v: np.cos(u + v) + 0.0 * np.asarray(x),
        dfv_du=lambda x, u, v: -np.cos(v - u) + 0.0 * np.asarray(x),
        dfv_dv=lambda x, u, v: np.cos(v - u) + 0.0 * np.asarray(x),
        df0_dX=lambda X, v0, t: np.array([[2.0 * abs(X[0])]]),
        df0_dv=lambda X, v0, t: np.array([1.0]),
        dg0_dX=lambda X, v0, t: np.array([1.0]),
        dg0_dv=lambda X, v0, t: 1.0,
        dg0_dt=lambda X, v0, t: 0.0,
        dK_dX=dK_dX,
        dK_dt=dK_dt,
    )
    return SystemModel(
        lambda_u=lambda_u,
        lambda_v=lambda_v,
        f_u=f_u,
        f_v=f_v,
        f0=f0,
        g0=g0,
        K=K,
        kind=Kind.QUASILINEAR,
        n=1,
        partials=partials,
        name=f"paper-sec5/{objective}",
    )


def _benchmark_init(scale: float = 1.0) -> InitialData:
    # The family scales compatibly: u0(0) = X0 + v0(0) for every scale.
    return InitialData(
        u0=lambda x: -0.5 * scale * np.ones_like(np.asarray(x, float)),
        v0=lambda x: 0.5 * scale * (1.0 + np.asarray(x, float)),
        X0=np.array([-1.0 * scale]),
    )


def _frozen_speeds(model: SystemModel) -> SystemModel:
    """Benchmark variant with the leftward speed frozen at 1 (semilinear)."""
    ones = lambda x, u, v: np.ones_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    zeros = lambda x, u, v: np.zeros_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    partials = dataclasses.replace(
        model.partials, dlv_du=zeros, dlv_dv=zeros
    )
    return dataclasses.replace(
        model,
        lambda_v=ones,
        kind=Kind.SEMILINEAR,
        partials=partials,
        name=model.name + "/frozen-v",
    )


def _zero_preset() -> Preset:
    ones = lambda x, u, v: np.ones_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    zeros = lambda x, u, v: np.zeros_like(np.asarray(x, float) + 0.0 * np.asarray(u))
    model = SystemModel(
        lambda_u=ones,
        lambda_v=ones,
        f_u=zeros,
        f_v=zeros,
        f0=lambda X, v0, t: np.zeros(1),
        g0=lambda X, v0, t: 0.0,
        K=lambda X, t: 0.0,
        kind=Kind.SEMILINEAR,
        n=1,
        name="zero",
    )
    init = InitialData(
        u0=lambda x: np.zeros_like(np.asarray(x, float)),
        v0=lambda x: np.zeros_like(np.asarray(x, float)),
        X0=np.zeros(1),
    )
    return Preset(model=model, init=init)


def _advection_preset() -> Preset:
    zero = _zero_preset()
    model = dataclasses.replace(zero.model, name="advection")
    return Preset(model=model, init=zero.init)


def get_preset(
    name: str,
    objective: str = "stabilization",
    x_ref: Callable | None = None,
    init_scale: float = 1.0,
) -> Preset:
    """Look up a model preset by name.

    Known names: ``paper-sec5``, ``paper-sec5-semilinear``, ``zero``,
    ``advection``.
    """
    if name == "paper-sec5":
        return Preset(
            model=_benchmark_model(objective, x_ref),
            init=_benchmark_init(init_scale),
            requires_even_N=True,
            open_loop_U=1.0,
        )
    if name == "paper-sec5-semilinear":
        return Preset(
            model=_frozen_speeds(_benchmark_model(objective, x_ref)),
            init=_benchmark_init(init_scale),
            requires_even_N=True,
            open_loop_U=1.0,
        )
    if name == "zero":
        return _zero_preset()
    if name == "advection":
        return _advection_preset()
    raise ConfigError(f"unknown model preset {name!r}", key="model.preset")


PRESET_NAMES = ("paper-sec5", "paper-sec5-semilinear", "zero", "advection")
