"""Restricted arithmetic expression grammar for inline model coefficients.

Accepted constructs: numeric literals, declared variable names, +, -, *, /,
unary minus, and the calls sin, cos, abs, sign, min, max, piecewise.
``piecewise(cond1, val1, ..., default)`` takes comparison conditions
(<, <=, >, >=) and selects the first matching branch.  Comparisons are legal
only as piecewise conditions.  Everything else (powers, attribute access,
names outside the declared set) is rejected with the offending construct
named, so configuration files cannot execute arbitrary code.

Compiled expressions broadcast over numpy arrays.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "sign": np.sign,
}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}

_CMPOPS = {
    ast.Lt: lambda a, b: a < b,
    ast.LtE: lambda a, b: a <= b,
    ast.Gt: lambda a, b: a > b,
    ast.GtE: lambda a, b: a >= b,
}


def _fail(node, why):
    raise ConfigError(f"expression rejected: {why} (column {node.col_offset})")


class _Evaluator:
    def __init__(self, names):
        self.names = set(names)

    def eval(self, node, env):
        if isinstance(node, ast.Expression):
            return self.eval(node.body, env)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)) and not isinstance(
                node.value, bool
            ):
                return float(node.value)
            _fail(node, f"literal {node.value!r} is not a number")
        if isinstance(node, ast.Name):
            if node.id in self.names:
                return env[node.id]
            _fail(node, f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                _fail(node, f"operator {type(node.op).__name__} not allowed")
            return op(self.eval(node.left, env), self.eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -self.eval(node.operand, env)
            if isinstance(node.op, ast.UAdd):
                return +self.eval(node.operand, env)
            _fail(node, f"operator {type(node.op).__name__} not allowed")
        if isinstance(node, ast.Call):
            return self._call(node, env)
        _fail(node, f"construct {type(node).__name__} not allowed")

    def _call(self, node, env):
        if not isinstance(node.func, ast.Name):
            _fail(node, "only plain function names may be called")
        if node.keywords:
            _fail(node, "keyword arguments not allowed")
        name = node.func.id
        args = node.args
        if name in _FUNCS:
            if len(args) != 1:
                _fail(node, f"{name} takes exactly one argument")
            return _FUNCS[name](self.eval(args[0], env))
        if name in ("min", "max"):
            if len(args) < 2:
                _fail(node, f"{name} needs at least two arguments")
            vals = [self.eval(a, env) for a in args]
            fn = np.minimum if name == "min" else np.maximum
            out = vals[0]
            for v in vals[1:]:
                out = fn(out, v)
            return out
        if name == "piecewise":
            if len(args) < 3 or len(args) % 2 == 0:
                _fail(node, "piecewise needs cond1, val1, ..., default")
            conds, vals = [], []
            for c_node, v_node in zip(args[0:-1:2], args[1:-1:2]):
                conds.append(self._condition(c_node, env))
                vals.append(self.eval(v_node, env))
            default = self.eval(args[-1], env)
            return np.select(conds, vals, default=default)
        _fail(node, f"function {name!r} not allowed")

    def _condition(self, node, env):
        if not isinstance(node, ast.Compare):
            _fail(node, "piecewise condition must be a comparison")
        if len(node.ops) != 1:
            _fail(node, "chained comparisons not allowed")
        op = _CMPOPS.get(type(node.ops[0]))
        if op is None:
            _fail(node, f"comparison {type(node.ops[0]).__name__} not allowed")
        return op(self.eval(node.left, env), self.eval(node.comparators[0], env))


def compile_expression(text: str, variables):
    """Compile an expression over the given variable names into a callable.

    The callable takes the variables positionally, in the declared order, and
    broadcasts over numpy array arguments.
    """
    variables = tuple(variables)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"expression rejected: syntax error ({exc.msg})")
    ev = _Evaluator(variables)

    # Validate eagerly with dummy arguments so config errors surface at parse
    # time, not mid-simulation.
    probe = {name: np.array([0.5, 1.0]) for name in variables}
    ev.eval(tree, probe)

    def fn(*args):
        if len(args) != len(variables):
            raise TypeError(f"expected {len(variables)} arguments")
        env = dict(zip(variables, args))
        return ev.eval(tree, env)

    fn.__name__ = f"expr<{text}>"
    return fn
