"""Scenario configuration: flat dotted-key files, strictly validated.

Format: one ``section.key = value`` per line, ``#`` comments, blank lines
ignored.  Values are numbers, booleans (true/false) or double-quoted strings
(a TOML-compatible subset, so files conventionally carry a .toml extension).
Unknown keys, malformed values and inconsistent combinations are rejected
with the offending key named; runs are fully deterministic, so there is no
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .expressions import compile_expression
from .model import Grid, InitialData, Kind, Partials, SystemModel
from .presets import get_preset


def parse_flat_kv(text: str) -> dict:
    """Parse the flat dotted-key format into {key: python value}."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key=key)
        out[key] = _parse_value(key, val, lineno)
    return out


def _parse_value(key, val, lineno):
    if val.startswith('"'):
        if not (val.endswith('"') and len(val) >= 2):
            raise ConfigError(f"line {lineno}: unterminated string for {key!r}",
                              key=key)
        return val[1:-1]
    if val in ("true", "false"):
        return val == "true"
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value {val!r} for {key!r} is not a number, "
            'boolean or "quoted string"',
            key=key,
        )


_SCENARIOS = ("open-loop", "state-feedback", "output-feedback", "observer-only")
_CONTROLLERS = ("none", "semilinear", "quasilinear")
_OBSERVERS = ("none", "semilinear", "quasilinear")
_OBJECTIVES = ("stabilization", "tracking")

# key -> (required, type, default)
_SCHEMA = {
    "scenario": (True, str, None),
    "objective": (False, str, "stabilization"),
    "model.preset": (False, str, None),
    "model.kind": (False, str, None),
    "model.lambda_u": (False, str, None),
    "model.lambda_v": (False, str, None),
    "model.f_u": (False, str, None),
    "model.f_v": (False, str, None),
    "model.f0": (False, str, None),
    "model.g0": (False, str, None),
    "model.K": (False, str, None),
    "init.u0": (False, str, None),
    "init.v0": (False, str, None),
    "init.X0": (False, (int, float), None),
    "init.scale": (False, (int, float), 1.0),
    "grid.N": (True, int, None),
    "sim.cfl": (False, (int, float), 0.8),
    "sim.t_end": (True, (int, float), None),
    "sim.snapshot_dt": (False, (int, float), 0.05),
    "input.U": (False, str, None),
    "input.U_const": (False, (int, float), None),
    "controller.type": (False, str, "none"),
    "controller.theta": (False, (int, float), 0.5),
    "controller.delta": (False, (int, float), 1.0),
    "controller.start": (False, (int, float), 0.0),
    "observer.type": (False, str, "none"),
    "observer.u_hat0": (False, (int, float), 0.0),
    "observer.v_hat0": (False, (int, float), 0.0),
    "observer.X_hat0": (False, (int, float), 0.0),
    "observer.smooth": (False, bool, False),
    "observer.source": (False, str, "simulate"),
    "observer.replay_path": (False, str, None),
    "reference.X_ref": (False, str, None),
    "output.dir": (False, str, "out"),
    "output.prefix": (False, str, "run"),
    "output.plots": (False, bool, True),
}


@dataclass
class ScenarioConfig:
    """Validated scenario description, ready to execute."""

    scenario: str
    objective: str
    model: SystemModel
    init: InitialData
    grid: Grid
    cfl: float
    t_end: float
    snapshot_dt: Optional[float]
    input_fn: Optional[object]
    controller_type: str
    theta: float
    delta: float
    controller_start: float
    observer_type: str
    observer_guesses: dict
    observer_source: str
    observer_replay_path: Optional[str]
    x_ref: Optional[object]
    out_dir: str
    prefix: str
    plots: bool
    raw: dict = field(default_factory=dict)


def _check_keys(kv: dict):
    for key in kv:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
    for key, (required, typ, _default) in _SCHEMA.items():
        if required and key not in kv:
            raise ConfigError(f"missing required key {key!r}", key=key)
        if key in kv and not isinstance(kv[key], typ):
            raise ConfigError(
                f"key {key!r} has wrong type {type(kv[key]).__name__}", key=key
            )


def _get(kv, key):
    return kv.get(key, _SCHEMA[key][2])


_INLINE_MODEL_KEYS = (
    "model.lambda_u", "model.lambda_v", "model.f_u", "model.f_v",
    "model.f0", "model.g0", "model.K",
)


def _build_inline_model(kv) -> SystemModel:
    missing = [k for k in _INLINE_MODEL_KEYS if k not in kv]
    if missing:
        raise ConfigError(
            f"inline model needs {missing[0]!r} (no model.preset given)",
            key=missing[0],
        )
    kind_txt = kv.get("model.kind")
    if kind_txt not in ("semilinear", "quasilinear"):
        raise ConfigError(
            "model.kind must be \"semilinear\" or \"quasilinear\"",
            key="model.kind",
        )
    fields = {}
    for key in ("lambda_u", "lambda_v", "f_u", "f_v"):
        fields[key] = compile_expression(kv[f"model.{key}"], ("x", "u", "v"))
    f0_expr = compile_expression(kv["model.f0"], ("X", "v0", "t"))
    g0_expr = compile_expression(kv["model.g0"], ("X", "v0", "t"))
    K_expr = compile_expression(kv["model.K"], ("X", "t"))
    return SystemModel(
        lambda_u=fields["lambda_u"],
        lambda_v=fields["lambda_v"],
        f_u=fields["f_u"],
        f_v=fields["f_v"],
        f0=lambda X, v0, t: np.atleast_1d(
            np.asarray(f0_expr(float(X[0]), v0, t), float)
        ),
        g0=lambda X, v0, t: float(g0_expr(float(X[0]), v0, t)),
        K=lambda X, t: float(K_expr(float(X[0]), t)),
        kind=Kind(kind_txt),
        n=1,
        partials=Partials(),
        name="inline",
    )


def _build_inline_init(kv) -> InitialData:
    for k in ("init.u0", "init.v0"):
        if k not in kv:
            raise ConfigError(f"inline model needs {k!r}", key=k)
    if "init.X0" not in kv:
        raise ConfigError("inline model needs 'init.X0'", key="init.X0")
    u0 = compile_expression(kv["init.u0"], ("x",))
    v0 = compile_expression(kv["init.v0"], ("x",))
    return InitialData(
        u0=lambda x: np.asarray(u0(np.asarray(x, float)), float),
        v0=lambda x: np.asarray(v0(np.asarray(x, float)), float),
        X0=np.array([float(kv["init.X0"])]),
    )


def load_config(text: str) -> ScenarioConfig:
    """Parse, validate and assemble a scenario configuration."""
    kv = parse_flat_kv(text)
    _check_keys(kv)

    scenario = _get(kv, "scenario")
    if scenario not in _SCENARIOS:
        raise ConfigError(
            f"scenario must be one of {_SCENARIOS}", key="scenario"
        )
    objective = _get(kv, "objective")
    if objective not in _OBJECTIVES:
        raise ConfigError(
            f"objective must be one of {_OBJECTIVES}", key="objective"
        )

    x_ref = None
    if kv.get("reference.X_ref"):
        expr = compile_expression(kv["reference.X_ref"], ("t",))
        x_ref = lambda t: expr(t)

    preset_name = kv.get("model.preset")
    requires_even = False
    if preset_name is not None:
        preset = get_preset(
            preset_name, objective=objective, x_ref=x_ref,
            init_scale=float(_get(kv, "init.scale")),
        )
        model, init = preset.model, preset.init
        requires_even = preset.requires_even_N
        if x_ref is not None and objective == "tracking":
            from .model import numeric_partials

            model = numeric_partials(model)  # fills dK_dt for custom refs
    else:
        model = _build_inline_model(kv)
        init = _build_inline_init(kv)
        from .model import numeric_partials

        model = numeric_partials(model)

    N = kv["grid.N"]
    if N < 2:
        raise ConfigError("grid.N must be >= 2", key="grid.N")
    if requires_even and N % 2 != 0:
        raise ConfigError(
            "grid.N must be even for this preset (speed kink at x = 0.5 "
            "needs an on-node break)",
            key="grid.N",
        )
    grid = Grid.uniform(N)

    controller_type = _get(kv, "controller.type")
    if controller_type not in _CONTROLLERS:
        raise ConfigError(
            f"controller.type must be one of {_CONTROLLERS}",
            key="controller.type",
        )
    observer_type = _get(kv, "observer.type")
    if observer_type not in _OBSERVERS:
        raise ConfigError(
            f"observer.type must be one of {_OBSERVERS}", key="observer.type"
        )

    input_fn = None
    if "input.U" in kv and "input.U_const" in kv:
        raise ConfigError(
            "give either input.U or input.U_const, not both", key="input.U"
        )
    if "input.U" in kv:
        u_expr = compile_expression(kv["input.U"], ("t",))
        input_fn = lambda t: float(u_expr(t))
    elif "input.U_const" in kv:
        c = float(kv["input.U_const"])
        input_fn = lambda t: c
    elif preset_name is not None and scenario == "open-loop":
        preset_u = get_preset(preset_name).open_loop_U
        if preset_u is not None:
            input_fn = lambda t: preset_u

    if scenario == "open-loop":
        if controller_type != "none":
            raise ConfigError(
                "open-loop scenario cannot carry a controller",
                key="controller.type",
            )
        if input_fn is None:
            raise ConfigError(
                "open-loop scenario needs input.U or input.U_const",
                key="input.U",
            )
    if scenario in ("state-feedback", "output-feedback"):
        if controller_type == "none":
            raise ConfigError(
                f"{scenario} scenario needs controller.type", key="controller.type"
            )
    if scenario == "output-feedback" and observer_type == "none":
        raise ConfigError(
            "output-feedback scenario needs observer.type", key="observer.type"
        )
    if scenario == "observer-only" and observer_type == "none":
        raise ConfigError(
            "observer-only scenario needs observer.type", key="observer.type"
        )
    if scenario == "observer-only" and _get(kv, "observer.source") == "simulate":
        if input_fn is None:
            raise ConfigError(
                "observer-only with simulated source needs input.U",
                key="input.U",
            )
    obs_source = _get(kv, "observer.source")
    if obs_source not in ("simulate", "replay"):
        raise ConfigError(
            'observer.source must be "simulate" or "replay"',
            key="observer.source",
        )
    if obs_source == "replay" and not kv.get("observer.replay_path"):
        raise ConfigError(
            "observer.source = replay needs observer.replay_path",
            key="observer.replay_path",
        )

    snapshot_dt = float(_get(kv, "sim.snapshot_dt"))
    theta = float(_get(kv, "controller.theta"))
    if controller_type == "quasilinear":
        ratio = theta / snapshot_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(
                "controller.theta must be an integer multiple of "
                "sim.snapshot_dt",
                key="controller.theta",
            )

    return ScenarioConfig(
        scenario=scenario,
        objective=objective,
        model=model,
        init=init,
        grid=grid,
        cfl=float(_get(kv, "sim.cfl")),
        t_end=float(kv["sim.t_end"]),
        snapshot_dt=snapshot_dt,
        input_fn=input_fn,
        controller_type=controller_type,
        theta=theta,
        delta=float(_get(kv, "controller.delta")),
        controller_start=float(_get(kv, "controller.start")),
        observer_type=observer_type,
        observer_guesses=dict(
            u_hat0=float(_get(kv, "observer.u_hat0")),
            v_hat0=float(_get(kv, "observer.v_hat0")),
            X_hat0=float(_get(kv, "observer.X_hat0")),
            smooth=bool(_get(kv, "observer.smooth")),
        ),
        observer_source=obs_source,
        observer_replay_path=kv.get("observer.replay_path"),
        x_ref=x_ref,
        out_dir=_get(kv, "output.dir"),
        prefix=_get(kv, "output.prefix"),
        plots=bool(_get(kv, "output.plots")),
        raw=kv,
    )


def load_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())
