# src/data/expressions.py

"""Closed-form field expressions used in config files.

Grammar: numbers, the names x, t, T, pi and q1..qn, the functions sin, cos,
exp and sqrt, and the operators + - * / ** with parentheses. Text is parsed
with ``ast`` and rebuilt as a sympy expression; nothing is ever evaluated.
"""

import ast
from typing import Callable, Dict, List, Sequence

import numpy as np
import sympy as sp

from ..types.errors import ConfigError

X, T_VAR, PERIOD = sp.symbols("x t T", real=True)

_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}
_BINARY = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def state_symbols(n: int) -> List[sp.Symbol]:
    return [sp.Symbol(f"q{i + 1}", real=True) for i in range(n)]


def _names(n_state: int) -> Dict[str, sp.Basic]:
    names = {"x": X, "t": T_VAR, "T": PERIOD, "pi": sp.pi}
    names.update({str(q): q for q in state_symbols(n_state)})
    return names


def _convert(node, names, text, key):
    if isinstance(node, ast.Expression):
        return _convert(node.body, names, text, key)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return sp.Float(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ConfigError(f"unknown name '{node.id}' in expression '{text}'", key=key)
        return names[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = _convert(node.operand, names, text, key)
        return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        return _BINARY[type(node.op)](_convert(node.left, names, text, key),
                                      _convert(node.right, names, text, key))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        func = _FUNCTIONS.get(node.func.id)
        if func is None:
            raise ConfigError(f"unknown function '{node.func.id}' in expression '{text}'", key=key)
        if len(node.args) != 1:
            raise ConfigError(f"{node.func.id} takes one argument in '{text}'", key=key)
        return func(_convert(node.args[0], names, text, key))
    raise ConfigError(f"unsupported syntax in expression '{text}'", key=key)


def parse_expression(text, n_state: int = 0, key: str = None) -> sp.Expr:
    """Parse a number or expression string into a sympy expression."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return sp.Float(text)
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"expected an expression, got {text!r}", key=key)
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"cannot parse expression '{text}': {e.msg}", key=key) from e
    return _convert(tree, _names(n_state), text, key)


def compile_expression(expr: sp.Expr, period: float, n_state: int = 0) -> Callable:
    """Vectorized f(x, t, *q) on numpy arrays; the result always has the broadcast shape."""
    expr = expr.subs(PERIOD, period)
    args = [X, T_VAR] + state_symbols(n_state)
    fn = sp.lambdify(args, expr, modules="numpy")

    def evaluate(x, t, *q):
        shape = np.broadcast_shapes(np.shape(x), np.shape(t), *[np.shape(v) for v in q])
        return np.broadcast_to(np.asarray(fn(x, t, *q), dtype=float), shape)

    return evaluate


def sample_field(text, x: np.ndarray, t: np.ndarray, period: float, key: str = None) -> np.ndarray:
    """Sample an expression on the (x, t) grid; returns shape (len(x), len(t))."""
    expr = parse_expression(text, key=key)
    if expr.free_symbols - {X, T_VAR, PERIOD}:
        raise ConfigError(f"field '{text}' may only depend on x and t", key=key)
    values = compile_expression(expr, period)(x[:, None], t[None, :])
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"field '{text}' is not finite on the grid", key=key)
    return np.array(values, dtype=float)


def sample_matrix(entries: Sequence[Sequence], x: np.ndarray, t: np.ndarray, period: float,
                  key: str) -> np.ndarray:
    """Sample an n x m table of expressions into an (n, m, len(x), len(t)) array."""
    rows = [[sample_field(e, x, t, period, key=f"{key}[{i}][{j}]") for j, e in enumerate(row)]
            for i, row in enumerate(entries)]
    return np.array(rows, dtype=float)
