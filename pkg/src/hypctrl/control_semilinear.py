"""Continuous-time predictive boundary law for state-independent speeds.

Evaluating the law at a state: (1) predict over the forward determinate set;
(2) pin the virtual boundary value at the curve's foot to the ODE law,
U* = K(X_pred(tau0), tau0); (3) integrate the boundary trace ODE across x
along the bounding characteristic, seeded with U*, and emit its value at
x = 1 as the physical input.  The law is stateless: the output depends only
on the supplied plant state.
"""

from __future__ import annotations

import numpy as np

from .errors import ControlError
from .model import Grid, Kind, SystemModel
from .predictor import Prediction, predict_determinate
from .simulator import PlantState


def integrate_curve_ode(
    model: SystemModel,
    grid: Grid,
    u_on_curve: np.ndarray,
    v_start: float,
    forward: bool = True,
) -> np.ndarray:
    """Integrate dv/dx = -f_v(x, (u, v)) / lambda_v along the curve.

    Classical 4-stage Runge-Kutta per grid cell with the recorded u values
    interpolated linearly.  ``forward`` integrates x: 0 -> 1 (construction
    direction); otherwise x: 1 -> 0 with ``v_start`` the value at x = 1.
    Returns the trace on all nodes.
    """
    x = grid.x

    def slope(xq, vq):
        uq = np.interp(xq, x, u_on_curve)
        lam = float(model.lambda_v(xq, uq, vq))
        return -float(model.f_v(xq, uq, vq)) / lam

    order = range(grid.N) if forward else range(grid.N, 0, -1)
    vals = np.empty(grid.N + 1)
    idx0 = 0 if forward else grid.N
    vals[idx0] = v_start
    v = float(v_start)
    for i in order:
        if forward:
            xa, xb_ = x[i], x[i + 1]
            target = i + 1
        else:
            xa, xb_ = x[i], x[i - 1]
            target = i - 1
        h = xb_ - xa
        k1 = slope(xa, v)
        k2 = slope(xa + 0.5 * h, v + 0.5 * h * k1)
        k3 = slope(xa + 0.5 * h, v + 0.5 * h * k2)
        k4 = slope(xb_, v + h * k3)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        vals[target] = v
    if not np.all(np.isfinite(vals)):
        raise ControlError("non-finite boundary-trace integration")
    return vals


class SemilinearController:
    """Predictive boundary feedback for semilinear plants.

    Meant to be evaluated every simulator step (the continuous-time law
    sampled at the step size).  Safe to call concurrently on distinct states.
    """

    def __init__(self, model: SystemModel, grid: Grid, cfl: float = 0.8):
        if model.kind is not Kind.SEMILINEAR:
            raise ControlError("SemilinearController requires a semilinear model")
        self.model = model
        self.grid = grid
        self.cfl = cfl

    def control(self, state: PlantState, return_details: bool = False):
        pred = predict_determinate(
            self.model, state, self.grid, cfl=self.cfl, with_derivatives=False
        )
        u_val = self._emit(pred)
        if return_details:
            return u_val, pred
        return u_val

    def _emit(self, pred: Prediction) -> float:
        tau0 = pred.tau0
        u_star = float(self.model.K(pred.X_at(tau0), tau0))
        trace = integrate_curve_ode(
            self.model, self.grid, pred.u_on_curve, u_star, forward=True
        )
        return float(trace[-1])
