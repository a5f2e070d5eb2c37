"""Minimal arithmetic expressions for user-defined SDE coefficients.

Grammar: numbers, the variables ``x`` and ``t``, the binary operators
``+ - * / ^`` (``^`` is exponentiation, right associative), unary minus,
parentheses and the functions ``exp log sin cos sqrt``.

Expressions are parsed once with :mod:`ast` and compiled into a
numpy-vectorized closure; nothing is passed to ``eval``.
"""

from __future__ import annotations

import ast
import operator
from typing import Callable

import numpy as np

from .errors import ConfigError

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}
VARIABLES = ("x", "t")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _compile(node, source):
    if isinstance(node, ast.Expression):
        return _compile(node.body, source)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda x, t: c
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x, t: x
        if node.id == "t":
            return lambda x, t: t
        raise ConfigError(f"unknown variable {node.id!r} in expression {source!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, source)
        if isinstance(node.op, ast.USub):
            return lambda x, t: -inner(x, t)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile(node.left, source)
        right = _compile(node.right, source)
        return lambda x, t: op(left(x, t), right(x, t))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            name = getattr(node.func, "id", "?")
            raise ConfigError(f"unknown function {name!r} in expression {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one argument in {source!r}")
        fn = FUNCTIONS[node.func.id]
        arg = _compile(node.args[0], source)
        return lambda x, t: fn(arg(x, t))
    raise ConfigError(f"unsupported syntax {type(node).__name__} in expression {source!r}")


def parse_expression(source: str) -> Callable:
    """Compile ``source`` into ``f(x, t)`` that broadcasts over numpy arrays."""
    if not isinstance(source, str) or not source.strip():
        raise ConfigError(f"expression must be a non-empty string, got {source!r}")
    if "**" in source:
        raise ConfigError(f"use '^' for powers in expression {source!r}")
    try:
        tree = ast.parse(source.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
    fn = _compile(tree, source)

    def evaluate(x, t=0.0):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = fn(x, t)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, t).shape).copy()

    evaluate.source = source
    return evaluate
