"""Tiny side-effect-free arithmetic language for initial data.

Expressions are written over the variables ``x1 .. xN`` with ``+ - * / ^``,
parentheses, numeric constants, ``pi``/``e`` and the functions
``exp sin cos sqrt abs``.  Parsing goes through :mod:`ast` and only a
whitelist of node types is accepted, so nothing can be executed beyond
numpy arithmetic.
"""
from __future__ import annotations

import ast
import re

import numpy as np

from .errors import ExpressionError

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "abs": np.abs}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_VAR = re.compile(r"x([1-9][0-9]*)$")


class Expression:
    """Compiled expression; call it with an (M, N) array of points."""

    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        if len(source) > 10_000:
            raise ExpressionError("expression is too long")
        try:
            tree = ast.parse(source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                raise ExpressionError("only unary + and - are allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError("unknown function in expression")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{node.func.id} takes exactly one argument")
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            m = _VAR.match(node.id)
            if m:
                if int(m.group(1)) > self.dim:
                    raise ExpressionError(f"variable {node.id} exceeds dimension {self.dim}")
            elif node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError("only numeric constants are allowed")
        else:
            raise ExpressionError(f"syntax element {type(node).__name__} is not allowed")

    def _eval(self, node, X):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, X), self._eval(node.right, X))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, X)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](self._eval(node.args[0], X))
        if isinstance(node, ast.Name):
            m = _VAR.match(node.id)
            if m:
                return X[..., int(m.group(1)) - 1]
            return _CONSTS[node.id]
        return float(node.value)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, X)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()

    def __repr__(self):
        return f"Expression({self.source!r}, dim={self.dim})"


def compile_expression(source: str, dim: int) -> Expression:
    return Expression(source, dim)
