"""Restricted arithmetic expressions for data fields.

Grammar: numbers, the coordinates x1..xN (aliases x, y, z), r (distance to
the domain centre), the constants pi and e, the operators + - * / ** and
unary minus, comparisons, and the functions below. Anything else is
rejected before evaluation.
"""

from __future__ import annotations

import ast
import math

import numpy as np

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "abs": np.abs, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "arctan": np.arctan,
    "min": np.minimum, "max": np.maximum, "where": np.where, "sign": np.sign,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
_ALIASES = {"x": "x1", "y": "x2", "z": "x3"}

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide,
           ast.Pow: np.power}
_CMPOPS = {ast.Lt: np.less, ast.LtE: np.less_equal, ast.Gt: np.greater, ast.GtE: np.greater_equal}


class ExpressionError(ValueError):
    pass


def _check(node, names):
    if isinstance(node, ast.Expression):
        return _check(node.body, names)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return
    if isinstance(node, ast.Name):
        n = _ALIASES.get(node.id, node.id)
        if n not in names and n not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
        return
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, names)
        _check(node.right, names)
        return
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, names)
        return
    if isinstance(node, ast.Compare):
        if len(node.ops) != 1 or type(node.ops[0]) not in _CMPOPS:
            raise ExpressionError("only single comparisons <, <=, >, >= are allowed")
        _check(node.left, names)
        _check(node.comparators[0], names)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise ExpressionError(f"call not allowed: {ast.unparse(node)}")
        for a in node.args:
            _check(a, names)
        return
    raise ExpressionError(f"syntax not allowed: {ast.unparse(node)}")


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        n = _ALIASES.get(node.id, node.id)
        return env[n] if n in env else CONSTANTS[n]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Compare):
        return _CMPOPS[type(node.ops[0])](_eval(node.left, env), _eval(node.comparators[0], env)).astype(float)
    return FUNCTIONS[node.func.id](*(_eval(a, env) for a in node.args))


def compile_expression(text: str, dim: int):
    """Parse and validate; returns the checked syntax tree."""
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg} (column {exc.offset})") from None
    names = {f"x{k + 1}" for k in range(dim)} | {"r"}
    _check(tree, names)
    return tree


def evaluate(text, coords, center=None) -> np.ndarray:
    """Evaluate `text` on the coordinate arrays `coords` (one per axis)."""
    dim = len(coords)
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return np.full(coords[0].shape, float(text))
    tree = compile_expression(text, dim)
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    env = {f"x{k + 1}": x for k, x in enumerate(coords)}
    env["r"] = np.sqrt(sum((x - ck) ** 2 for x, ck in zip(coords, c)))
    with np.errstate(all="ignore"):
        out = _eval(tree.body, env)
    return np.broadcast_to(np.asarray(out, dtype=float), coords[0].shape).copy()
