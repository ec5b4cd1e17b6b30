import dataclasses

import numpy as np
import pytest

import hypctrl as hc
from hypctrl.errors import EvaluationError
from hypctrl.model import Partials, Scenario, numeric_partials, validate_model


def test_benchmark_validates_including_compatibility(benchmark):
    g = hc.Grid.uniform(100)
    rep = validate_model(benchmark.model, benchmark.init, g, Scenario.STABILIZATION)
    assert rep.passed, str(rep)
    # Compatibility witness of the bundled data: g0(X0, v0(0), 0) = -1 + 0.5.
    got = benchmark.model.g0(benchmark.init.X0, float(benchmark.init.v0(0.0)), 0.0)
    assert got == pytest.approx(-0.5, abs=1e-15)
    assert float(benchmark.init.u0(0.0)) == pytest.approx(-0.5, abs=1e-15)


def test_zero_model_validates(zero_preset):
    rep = validate_model(zero_preset.model, zero_preset.init, hc.Grid.uniform(10))
    assert rep.passed


def test_vanishing_speed_fails_with_witness(zero_preset):
    bad = dataclasses.replace(
        zero_preset.model,
        lambda_v=lambda x, u, v: np.abs(np.asarray(x) - 0.5) + 0.0 * np.asarray(u),
    )
    rep = validate_model(bad, zero_preset.init, hc.Grid.uniform(10))
    assert not rep.passed
    fail = rep.failures()[0]
    assert fail.name == "speed positivity"
    assert fail.witness["x"] == pytest.approx(0.5)


def test_nonfinite_coefficient_raises(zero_preset):
    bad = dataclasses.replace(
        zero_preset.model,
        f_u=lambda x, u, v: np.full_like(np.asarray(x, float), np.nan),
    )
    with pytest.raises(EvaluationError):
        validate_model(bad, zero_preset.init, hc.Grid.uniform(10))


def test_tracking_scenario_skips_equilibrium(zero_preset):
    shifted = dataclasses.replace(
        zero_preset.model, K=lambda X, t: 0.3 * np.sin(0.5 * t)
    )
    rep_track = validate_model(
        shifted, zero_preset.init, hc.Grid.uniform(10), Scenario.TRACKING
    )
    assert rep_track.passed
    rep_stab = validate_model(
        shifted, zero_preset.init, hc.Grid.uniform(10), Scenario.STABILIZATION
    )
    assert not rep_stab.passed


def test_perturbed_compatibility_fails(benchmark):
    init = hc.InitialData(
        u0=lambda x: -0.5 + 1e-6 + 0.0 * np.asarray(x),
        v0=benchmark.init.v0,
        X0=benchmark.init.X0,
    )
    rep = validate_model(benchmark.model, init, hc.Grid.uniform(20))
    names = [c.name for c in rep.failures()]
    assert "boundary compatibility" in names


def test_numeric_partials_examples(benchmark):
    bare = dataclasses.replace(benchmark.model, partials=Partials())
    filled = numeric_partials(bare)
    x = np.array([0.3])
    # d lambda_v / du at u=1 is 0.5; at the |.| kink the symmetric value is 0.
    assert filled.partials.dlv_du(x, np.array([1.0]), np.array([0.0]))[0] == \
        pytest.approx(0.5, rel=1e-9)
    assert filled.partials.dlv_dv(x, np.array([1.0]), np.array([0.0]))[0] == \
        pytest.approx(0.0, abs=1e-9)
    # Boundary coupling X + v0 has unit slopes in both arguments.
    assert filled.partials.dg0_dX(np.array([0.5]), 0.2, 0.0)[0] == \
        pytest.approx(1.0, rel=1e-6)
    assert filled.partials.dg0_dv(np.array([0.5]), 0.2, 0.0) == \
        pytest.approx(1.0, rel=1e-6)


def test_numeric_partials_constant_speed_zero(zero_preset):
    filled = numeric_partials(zero_preset.model)
    x = np.linspace(0, 1, 5)
    u = np.full_like(x, 0.7)
    v = np.full_like(x, -0.2)
    assert np.all(filled.partials.dlu_du(x, u, v) == 0.0)
    assert np.all(filled.partials.dlv_dv(x, u, v) == 0.0)


def test_numeric_matches_analytic_partials(benchmark):
    bare = dataclasses.replace(benchmark.model, partials=Partials())
    filled = numeric_partials(bare)
    xs = np.linspace(0.0, 1.0, 9)
    us = np.full_like(xs, 0.7)   # away from the |.| kinks
    vs = np.full_like(xs, -0.4)
    for name in ("dfu_du", "dfu_dv", "dfv_du", "dfv_dv", "dlv_du", "dlv_dv"):
        num = getattr(filled.partials, name)(xs, us, vs)
        ana = getattr(benchmark.model.partials, name)(xs, us, vs)
        assert np.max(np.abs(num - ana)) <= 1e-6 * (1.0 + np.max(np.abs(ana)))


def test_user_partials_never_overwritten(benchmark):
    marker = lambda x, u, v: np.full_like(np.asarray(x, float), 42.0)
    model = dataclasses.replace(
        benchmark.model, partials=dataclasses.replace(
            benchmark.model.partials, dfu_du=marker
        )
    )
    filled = numeric_partials(model)
    assert filled.partials.dfu_du is marker


def test_validate_is_deterministic(benchmark):
    g = hc.Grid.uniform(40)
    r1 = validate_model(benchmark.model, benchmark.init, g)
    r2 = validate_model(benchmark.model, benchmark.init, g)
    assert str(r1) == str(r2)
    assert [c.passed for c in r1.checks] == [c.passed for c in r2.checks]


def test_semilinear_spot_check():
    pre = hc.get_preset("paper-sec5-semilinear")
    g = hc.Grid.uniform(20)
    rep = validate_model(pre.model, pre.init, g)
    assert rep.passed
    x = g.x
    for uu in (-1.5, 0.0, 2.0):
        got = pre.model.lambda_u(x, np.full_like(x, uu), np.full_like(x, -uu))
        ref = pre.model.lambda_u(x, 0.0 * x, 0.0 * x)
        assert np.array_equal(np.broadcast_to(got, x.shape),
                              np.broadcast_to(ref, x.shape))


def test_grid_invariants():
    g = hc.Grid.uniform(8)
    assert g.N == 8 and g.dx == pytest.approx(1.0 / 8)
    assert np.all(np.diff(g.x) > 0)
    with pytest.raises(ValueError):
        hc.Grid.uniform(1)
