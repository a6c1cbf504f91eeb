"""Safe evaluation of closed-form coefficient and initial-data expressions.

Grammar: numbers, the variables ``x`` and ``y``, the constant ``pi``,
``+ - * / **``, unary minus, and the functions ``cos sin exp sqrt abs``.
Parsing goes through :mod:`ast`; anything outside the whitelist is rejected
before evaluation.
"""

from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"cos": np.cos, "sin": np.sin, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}
_CONSTS = {"pi": np.pi}
_VARS = ("x", "y")


class Expression:
    """A parsed expression, callable on an array of points of shape (m, d)."""

    def __init__(self, source: str):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"non-numeric literal in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in _VARS and node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ConfigError(f"operator not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"function not allowed in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take exactly one argument: {self.source!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax in {self.source!r}")

    def uses(self, name: str) -> bool:
        return any(isinstance(n, ast.Name) and n.id == name for n in ast.walk(self._tree))

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = {"x": pts[:, 0]}
        if pts.shape[1] > 1:
            env["y"] = pts[:, 1]
        elif self.uses("y"):
            raise ConfigError(f"expression {self.source!r} uses y on a 1D domain")
        out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __repr__(self):
        return f"Expression({self.source!r})"
