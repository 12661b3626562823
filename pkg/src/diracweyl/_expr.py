"""Restricted arithmetic expressions in one variable ``x``.

Grammar: numbers, ``x``, ``pi``, binary ``+ - * / ^`` (``^`` is power,
``**`` is accepted too), unary minus, and calls to ``sin cos exp log sqrt``.
Anything else is rejected at compile time.
"""
from __future__ import annotations

import ast

import numpy as np

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _check(node):
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError("only unary +/- allowed")
        _check(node.operand)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"constant {node.value!r} not allowed")
    elif isinstance(node, ast.Name):
        if node.id not in ("x", "pi"):
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos, exp, log, sqrt may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0])
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not allowed")


def _eval(node, x):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, x)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return x if node.id == "x" else np.pi
    return _FUNCS[node.func.id](_eval(node.args[0], x))


def compile_expression(text):
    """Parse ``text`` and return a vectorized evaluator ``f(x)``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree)
    body = tree.body

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(_eval(body, x), x.shape).astype(float)

    return f
