"""
A small arithmetic expression language for user-supplied fields and densities.

Grammar: numbers, ``+ - * / ** ^``, parentheses, the variables ``x1 .. xN``,
``xn`` (last coordinate), ``|x|`` (Euclidean norm), ``|x'|`` (norm of the
tangential part), the constants ``pi`` and ``e``, and the functions ``exp``,
``log``, ``sqrt``, ``abs``, ``sin``, ``cos``, ``tanh``, ``min``, ``max``.
Expressions are parsed with :mod:`ast` and only whitelisted nodes are
accepted.
"""

import ast
import operator
import re

import numpy as np

from .errors import HalfSpaceError

_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _normalize(text):
    text = text.replace("^", "**")
    text = re.sub(r"\|\s*x\s*'\s*\|", " _tnorm ", text)
    text = re.sub(r"\|\s*x\s*\|", " _norm ", text)
    if "|" in text:
        raise HalfSpaceError("absolute value bars are only supported as |x| and |x'|; use abs()")
    return text


class Expression:
    """A compiled expression in ``dim`` variables.

    Calling it on an array of points ``(..., dim)`` returns values ``(...)``.
    """

    def __init__(self, text, dim):
        self.text = str(text)
        self.dim = int(dim)
        try:
            tree = ast.parse(_normalize(self.text), mode="eval")
        except SyntaxError as exc:
            raise HalfSpaceError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise HalfSpaceError(f"unsupported function in {self.text!r}")
            for a in node.args:
                self._check(a)
        elif isinstance(node, ast.Name):
            if node.id not in _CONSTS and node.id not in ("_norm", "_tnorm", "xn") and not self._is_coord(node.id):
                raise HalfSpaceError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise HalfSpaceError(f"unsupported literal in {self.text!r}")
        else:
            raise HalfSpaceError(f"unsupported syntax in {self.text!r}")

    def _is_coord(self, name):
        m = re.fullmatch(r"x([1-9][0-9]*)", name)
        return m is not None and 1 <= int(m.group(1)) <= self.dim

    def __call__(self, points):
        p = np.asarray(points, dtype=float)
        if p.shape[-1] != self.dim:
            raise HalfSpaceError(f"expression expects {self.dim} coordinates")
        env = {f"x{i + 1}": p[..., i] for i in range(self.dim)}
        env["xn"] = p[..., -1]
        env["_norm"] = np.linalg.norm(p, axis=-1)
        env["_tnorm"] = np.linalg.norm(p[..., :-1], axis=-1) if self.dim > 1 else np.zeros(p.shape[:-1])
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), p.shape[:-1]).copy()

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*[self._eval(a, env) for a in node.args])
        if isinstance(node, ast.Name):
            return _CONSTS[node.id] if node.id in _CONSTS else env[node.id]
        return float(node.value)

    def __repr__(self):
        return f"Expression({self.text!r}, dim={self.dim})"
