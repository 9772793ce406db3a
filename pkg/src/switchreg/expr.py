"""Tiny arithmetic expression language for problem data.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x``, ``y`` and ``r`` (= sqrt(x^2 + y^2)); ``pi`` is the only
named constant.  Piecewise data is written with ``min``/``max``/``abs``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = ("x", "y", "r")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "ln": 1,
    "exp": 1,
    "abs": 1,
    "sqrt": 1,
    "min": 2,
    "max": 2,
    "atan2": 2,
}

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExpressionEvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expression = Union[Num, Var, Const, Neg, BinOp, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, text, pos = self.tok
        if text != value or kind != "op":
            what = "end of input" if kind == "eof" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.tok
        if kind != "eof":
            if text == ")":
                raise ExpressionSyntaxError("unbalanced ')'", pos)
            raise ExpressionSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            value = float(text)
            if not math.isfinite(value):
                raise ExpressionSyntaxError(f"numeric literal {text!r} overflows", pos)
            return Num(value)
        if kind == "name":
            self.advance()
            if self.tok[0] == "op" and self.tok[1] == "(":
                if text not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {text!r}", pos)
                open_pos = self.advance()[2]
                args = [self.expr()]
                while self.tok[0] == "op" and self.tok[1] == ",":
                    self.advance()
                    args.append(self.expr())
                if self.tok[1] != ")" or self.tok[0] != "op":
                    what = "end of input" if self.tok[0] == "eof" else repr(self.tok[1])
                    raise ExpressionSyntaxError(
                        f"expected ')' to close '(' at {open_pos}, found {what}", self.tok[2]
                    )
                self.advance()
                if len(args) != FUNCTIONS[text]:
                    raise ExpressionSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", pos
                    )
                return Call(text, tuple(args))
            if text in VARIABLES:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            if text in FUNCTIONS:
                raise ExpressionSyntaxError(f"function {text!r} used without arguments", pos)
            raise ExpressionSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            if self.tok[1] != ")" or self.tok[0] != "op":
                raise ExpressionSyntaxError(f"unbalanced '(' opened at {pos}", self.tok[2])
            self.advance()
            return node
        if kind == "eof":
            raise ExpressionSyntaxError("unexpected end of input", pos)
        raise ExpressionSyntaxError(f"unexpected token {text!r}", pos)


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExpressionSyntaxError` carrying the 0-based offset of the
    offending token (``len(text)`` for premature end of input).
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def as_expression(obj) -> Expression:
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Num(float(obj))
    if isinstance(obj, (Num, Var, Const, Neg, BinOp, Call)):
        return obj
    raise TypeError(f"cannot interpret {obj!r} as an expression")


def _prec(node):
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _PRECEDENCE["neg"]
    return 10


def to_string(node: Expression) -> str:
    """Render with the minimum parentheses needed to reparse to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_string(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        # '-' binds looser than '^' only, so any lower-precedence operand needs parens
        if _prec(node.operand) < _PRECEDENCE["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PRECEDENCE[node.op]
    left, right = to_string(node.left), to_string(node.right)
    if node.op == "^":
        # base must be a primary; exponent is parsed as a unary
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PRECEDENCE["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left} {node.op} {right}"


def _pow(a, b):
    if a < 0 and b != math.floor(b):
        raise ExpressionEvalError(f"non-integer power {b!r} of negative base {a!r}")
    if a == 0 and b < 0:
        raise ExpressionEvalError("zero raised to a negative power")
    try:
        return math.pow(a, b)
    except OverflowError as exc:
        raise ExpressionEvalError(f"overflow in {a!r}^{b!r}") from exc


def evaluate(expr: Expression, point) -> float:
    """Evaluate ``expr`` at ``point = (x, y)`` in double precision."""
    x, y = float(point[0]), float(point[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ExpressionEvalError(f"non-finite evaluation point {point!r}")
    return _eval(expr, x, y)


def _eval(node, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "x":
            return x
        if node.name == "y":
            return y
        return math.hypot(x, y)
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, x, y)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, y)
        b = _eval(node.right, x, y)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0:
                raise ExpressionEvalError("division by zero")
            return a / b
        return _pow(a, b)
    args = [_eval(a, x, y) for a in node.args]
    f = node.func
    if f == "ln":
        if args[0] <= 0:
            raise ExpressionEvalError(f"ln of non-positive argument {args[0]!r}")
        return math.log(args[0])
    if f == "sqrt":
        if args[0] < 0:
            raise ExpressionEvalError(f"sqrt of negative argument {args[0]!r}")
        return math.sqrt(args[0])
    if f == "exp":
        try:
            return math.exp(args[0])
        except OverflowError as exc:
            raise ExpressionEvalError(f"overflow in exp({args[0]!r})") from exc
    if f == "sin":
        return math.sin(args[0])
    if f == "cos":
        return math.cos(args[0])
    if f == "abs":
        return abs(args[0])
    if f == "min":
        return min(args[0], args[1])
    if f == "max":
        return max(args[0], args[1])
    return math.atan2(args[0], args[1])


def evaluate_array(expr: Expression, x: np.ndarray, y: np.ndarray):
    """Vectorised evaluation over arrays of points.

    Returns ``(values, bad)`` where ``bad`` marks points at which scalar
    :func:`evaluate` would raise; their values are NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    with np.errstate(all="ignore"):
        vals, bad = _eval_arr(expr, x, y)
        vals = np.array(np.broadcast_to(vals, x.shape), dtype=float)
        bad = np.broadcast_to(bad, x.shape) | ~np.isfinite(vals)
    vals[bad] = np.nan
    return vals, np.array(bad)


def _eval_arr(node, x, y):
    if isinstance(node, Num):
        return np.float64(node.value), False
    if isinstance(node, Var):
        if node.name == "x":
            return x, False
        if node.name == "y":
            return y, False
        return np.hypot(x, y), False
    if isinstance(node, Const):
        return np.float64(CONSTANTS[node.name]), False
    if isinstance(node, Neg):
        v, bad = _eval_arr(node.operand, x, y)
        return -v, bad
    if isinstance(node, BinOp):
        a, ba = _eval_arr(node.left, x, y)
        b, bb = _eval_arr(node.right, x, y)
        bad = ba | bb
        if node.op == "+":
            return a + b, bad
        if node.op == "-":
            return a - b, bad
        if node.op == "*":
            return a * b, bad
        if node.op == "/":
            return a / b, bad | (b == 0)
        bad = bad | ((a < 0) & (b != np.floor(b))) | ((a == 0) & (b < 0))
        return np.power(a, b), bad
    parts = [_eval_arr(a, x, y) for a in node.args]
    bad = parts[0][1] if len(parts) == 1 else parts[0][1] | parts[1][1]
    a = parts[0][0]
    f = node.func
    if f == "ln":
        return np.log(a), bad | (a <= 0)
    if f == "sqrt":
        return np.sqrt(a), bad | (a < 0)
    if f == "exp":
        return np.exp(a), bad
    if f == "sin":
        return np.sin(a), bad
    if f == "cos":
        return np.cos(a), bad
    if f == "abs":
        return np.abs(a), bad
    b = parts[1][0]
    if f == "min":
        return np.minimum(a, b), bad
    if f == "max":
        return np.maximum(a, b), bad
    return np.arctan2(a, b), bad
