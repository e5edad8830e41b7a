"""Tiny arithmetic-expression evaluator for analytic field specifications.

Config files describe initial data, forcing and the transport field as
strings over the node coordinates ``x1 .. xn`` (and ``t`` for time-dependent
forcing), e.g. ``"sin(pi*x1)*cos(2*x2)"``.  Expressions are parsed with
:mod:`ast` and only a whitelist of arithmetic nodes and functions is allowed,
so configs cannot execute arbitrary code.
"""

from __future__ import annotations

import ast
import math

import numpy as np

__all__ = ["evaluate", "validate"]

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "log": np.log,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    pass


def _eval_node(node, names):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ExpressionError(f"non-numeric constant {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        left = _eval_node(node.left, names)
        right = _eval_node(node.right, names)
        op = node.op
        if isinstance(op, ast.Add):
            return left + right
        if isinstance(op, ast.Sub):
            return left - right
        if isinstance(op, ast.Mult):
            return left * right
        if isinstance(op, ast.Div):
            return left / right
        if isinstance(op, ast.Mod):
            return left % right
        return left**right
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        value = _eval_node(node.operand, names)
        return value if isinstance(node.op, ast.UAdd) else -value
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only sin/cos/tan/exp/sqrt/abs/tanh/log calls are allowed")
        if node.keywords or len(node.args) != 1:
            raise ExpressionError(f"{node.func.id} takes exactly one positional argument")
        return _FUNCTIONS[node.func.id](_eval_node(node.args[0], names))
    raise ExpressionError(f"disallowed syntax: {ast.dump(node)}")


def validate(expr: str) -> None:
    """Parse ``expr`` and raise :class:`ExpressionError` if it is not admissible."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc}") from exc
    _eval_node(tree, {f"x{i}": 0.5 for i in range(1, 4)} | {"t": 0.0})


def evaluate(expr: str, coords, t: float | None = None):
    """Evaluate ``expr`` on broadcastable coordinate arrays ``x1 .. xn``.

    ``coords`` is a sequence of arrays (one per axis); ``t`` is bound when
    given.  Returns an array broadcast to the common grid shape.
    """
    names = {f"x{i + 1}": c for i, c in enumerate(coords)}
    if t is not None:
        names["t"] = t
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc}") from exc
    value = _eval_node(tree, names)
    shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
    return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
