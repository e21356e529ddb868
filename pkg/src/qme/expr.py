"""Scalar expressions in the time variable ``t``.

Grammar: numeric literals, ``t``, the constant ``pi``, binary ``+ - * /``,
unary ``-``/``+``, parentheses and calls to a fixed set of one-argument
functions. Source text is parsed once with :mod:`ast`, checked against the
grammar, and compiled into a tree of closures.
"""

import ast
import math
import operator

from .errors import ConfigError, ScheduleError

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "tanh": math.tanh,
    "cosh": math.cosh,
    "sinh": math.sinh,
    "exp": math.exp,
    "log": math.log,
    "abs": abs,
    "sqrt": math.sqrt,
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class Expression:
    """A parsed expression; call it with a time value."""

    def __init__(self, source):
        if not isinstance(source, str) or not source.strip():
            raise ConfigError("expression must be a non-empty string")
        self.source = source
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._uses_t = False
        self._fn = self._compile(tree.body)

    @property
    def depends_on_t(self):
        return self._uses_t

    def _compile(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigError(f"unsupported literal {node.value!r} in {self.source!r}")
            value = float(node.value)
            return lambda t: value
        if isinstance(node, ast.Name):
            if node.id == "t":
                self._uses_t = True
                return lambda t: t
            if node.id == "pi":
                return lambda t: math.pi
            raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = self._compile(node.left), self._compile(node.right)
            return lambda t: op(left(t), right(t))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            op = _UNARY[type(node.op)]
            inner = self._compile(node.operand)
            return lambda t: op(inner(t))
        if isinstance(node, ast.Call):
            if (not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS
                    or len(node.args) != 1 or node.keywords):
                raise ConfigError(f"unsupported function call in {self.source!r}")
            fn = FUNCTIONS[node.func.id]
            arg = self._compile(node.args[0])
            return lambda t: fn(arg(t))
        raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def __call__(self, t):
        try:
            value = self._fn(float(t))
        except (ArithmeticError, ValueError) as exc:
            raise ScheduleError(f"evaluating {self.source!r} at t={t}: {exc}",
                                operation="generators.schedule") from None
        if not math.isfinite(value):
            raise ScheduleError(f"{self.source!r} is not finite at t={t}",
                                operation="generators.schedule")
        return value

    def __repr__(self):
        return f"Expression({self.source!r})"
