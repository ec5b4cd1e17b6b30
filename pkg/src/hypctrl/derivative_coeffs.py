"""Quadratic source structure of the time-derivative fields.

Differentiating the transport equations in time and eliminating the spatial
derivative with the equation itself gives, for p = u_t and q = v_t,

    p_t = -lambda_u p_x + B_u(x, w, p, q),
    q_t = +lambda_v q_x + B_v(x, w, p, q),

with brackets quadratic in (p, q):

    B_u = c1 p^2 + c2 p q + c3 p + c4 q,
    B_v = c5 p q + c6 q^2 + c7 p + c8 q,

    c1 = d(lambda_u)/du / lambda_u        c5 = d(lambda_v)/du / lambda_v
    c2 = d(lambda_u)/dv / lambda_u        c6 = d(lambda_v)/dv / lambda_v
    c3 = d(f_u)/du - c1 f_u               c7 = d(f_v)/du - c5 f_v
    c4 = d(f_u)/dv - c2 f_u               c8 = d(f_v)/dv - c6 f_v

Changing to a characteristic time coordinate T(x, t) with dT/dx = -1/lambda_v
(curves of the v family) or +1/lambda_u (u family) turns one of the two
transport operators into an x-ODE and rescales the other to the composite
speed mu = lambda_u lambda_v / (lambda_u + lambda_v), weighted by

    nu_v = lambda_v / (lambda_u + lambda_v)   (fields aligned with v curves)
    nu_u = lambda_u / (lambda_u + lambda_v)   (fields aligned with u curves).

For the semilinear special case (state-independent speeds) the c1, c2, c5,
c6 terms vanish and nu_u reproduces the measurement-side weights used by the
boundary observer.  Correctness of this derivation is pinned operationally by
the round-trip test: solving the boundary-aligned system and feeding the
resulting input through the plant reproduces the designed boundary trace to
first order in the grid spacing.
"""

from __future__ import annotations

import numpy as np

from .model import SystemModel


def _field(fn, x, u, v):
    return np.asarray(fn(x, u, v), float) * np.ones_like(np.asarray(x, float))


def bracket_u(model: SystemModel, x, u, v, p, q):
    """B_u(x, w, p, q) for the rightward derivative field p = u_t."""
    pr = model.partials
    lam = _field(model.lambda_u, x, u, v)
    fu = _field(model.f_u, x, u, v)
    c1 = _field(pr.dlu_du, x, u, v) / lam
    c2 = _field(pr.dlu_dv, x, u, v) / lam
    c3 = _field(pr.dfu_du, x, u, v) - c1 * fu
    c4 = _field(pr.dfu_dv, x, u, v) - c2 * fu
    return c1 * p * p + c2 * p * q + c3 * p + c4 * q


def bracket_v(model: SystemModel, x, u, v, p, q):
    """B_v(x, w, p, q) for the leftward derivative field q = v_t."""
    pr = model.partials
    lam = _field(model.lambda_v, x, u, v)
    fv = _field(model.f_v, x, u, v)
    c5 = _field(pr.dlv_du, x, u, v) / lam
    c6 = _field(pr.dlv_dv, x, u, v) / lam
    c7 = _field(pr.dfv_du, x, u, v) - c5 * fv
    c8 = _field(pr.dfv_dv, x, u, v) - c6 * fv
    return c5 * p * q + c6 * q * q + c7 * p + c8 * q


def composite_speed(model: SystemModel, x, u, v):
    """mu = lambda_u lambda_v / (lambda_u + lambda_v), with both weights."""
    lu = _field(model.lambda_u, x, u, v)
    lv = _field(model.lambda_v, x, u, v)
    denom = lu + lv
    return lu * lv / denom, lv / denom, lu / denom  # mu, nu_v, nu_u


def curve_rate_v(model: SystemModel, grid, u, v, p, q):
    """Time dilation sigma(x) = d(tau_v)/dt of v-family transit times.

    Differentiating the transit integral gives a linear Volterra relation in
    sigma whose closed form is the exponential of the accumulated sensitivity

        sigma(x) = exp(-int_x^1 (dlv_du p + dlv_dv q) / lambda_v^2 dxi),

    evaluated along states recorded on the curve.  sigma(1) = 1 and sigma > 0
    always.
    """
    pr = model.partials
    x = grid.x
    lam = _field(model.lambda_v, x, u, v)
    g = (_field(pr.dlv_du, x, u, v) * p + _field(pr.dlv_dv, x, u, v) * q) / lam**2
    cells = 0.5 * grid.dx * (g[:-1] + g[1:])
    acc = np.concatenate(([0.0], np.cumsum(cells)))
    return np.exp(-(acc[-1] - acc))


def curve_rate_u_meas(model: SystemModel, grid, u, v, p, q):
    """Time dilation d(tau_u)/dt of the measurement-side transit times.

    Same construction as curve_rate_v for curves traced backwards from the
    actuated boundary: sigma(x) = exp(+int_x^1 (dlu_du p + dlu_dv q) /
    lambda_u^2 dxi), sigma(1) = 1.
    """
    pr = model.partials
    x = grid.x
    lam = _field(model.lambda_u, x, u, v)
    g = (_field(pr.dlu_du, x, u, v) * p + _field(pr.dlu_dv, x, u, v) * q) / lam**2
    cells = 0.5 * grid.dx * (g[:-1] + g[1:])
    acc = np.concatenate(([0.0], np.cumsum(cells)))
    return np.exp(acc[-1] - acc)
