"""Small arithmetic expression language for user-supplied perturbations.

Grammar: numbers, the variables ``a``, ``b``, ``z``, ``eps``, the binary
operators ``+ - * / ^`` (``^`` is power), unary minus and the function
``exp``. Expressions are parsed with :mod:`ast` and every node is checked
against that whitelist before compilation.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path

from .cusp_core import A3System
from .errors import ConfigError

VARIABLES = ("a", "b", "z", "eps")
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)


def _validate(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body, text)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed in {text!r}")
        _validate(node.left, text)
        _validate(node.right, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNARY):
            raise ConfigError(f"unary operator not allowed in {text!r}")
        _validate(node.operand, text)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"only numeric constants are allowed in {text!r}")
    elif isinstance(node, ast.Name):
        if node.id not in VARIABLES:
            raise ConfigError(f"unknown variable {node.id!r} in {text!r}; use a, b, z, eps")
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id == "exp"):
            raise ConfigError(f"only exp(...) may be called in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"exp takes exactly one argument in {text!r}")
        _validate(node.args[0], text)
    else:
        raise ConfigError(f"unsupported syntax {type(node).__name__} in {text!r}")


def _safe_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class Expression:
    """Compiled expression, callable as ``f(a, b, z, eps)``."""

    text: str
    _code: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        src = self.text.replace("^", "**")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc.msg}") from exc
        _validate(tree, self.text)
        object.__setattr__(self, "_code", compile(tree, "<expr>", "eval"))

    def __call__(self, a, b, z, eps):
        env = {"a": float(a), "b": float(b), "z": float(z), "eps": float(eps), "exp": _safe_exp}
        try:
            return eval(self._code, {"__builtins__": {}}, env)
        except (ZeroDivisionError, OverflowError):
            return math.nan

    def __reduce__(self):
        return (Expression, (self.text,))


def parse_expression(text: str) -> Expression:
    return Expression(str(text))


def system_from_expressions(f1: str | None = None, f2: str | None = None, f3: str | None = None,
                            name: str = "expr") -> A3System:
    """Build an :class:`A3System` from expression strings (``None`` for zero)."""
    fs = [parse_expression(t) if t not in (None, "", "0") else None for t in (f1, f2, f3)]
    return A3System(*fs, name=name)


def read_expression_file(path) -> dict:
    """Read ``f1 = ...`` lines (``#`` comments allowed) into a dict."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read expression file {path}: {exc}") from exc
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rhs = line.partition("=")
        key = key.strip()
        if not sep or key not in ("f1", "f2", "f3"):
            raise ConfigError(f"{path}:{k}: expected 'f1 = ...', 'f2 = ...' or 'f3 = ...'")
        out[key] = rhs.strip()
    return out
