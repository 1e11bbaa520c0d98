"""Scalar expressions in ``x`` and ``y``.

Potentials and starting functions are given as plain strings such as
``"(x-1)*(y-1)*(x+1)*(y+1)"`` or ``"1/sqrt((x-0.5)^2+y^2)"``.  They are
parsed once into an immutable tree by a precedence-climbing parser and
then evaluated pointwise.

Grammar (highest binding first)::

    atom     := number | x | y | pi | func "(" expr ")" | "(" expr ")"
    power    := atom ["^" unary]          (right associative)
    unary    := "-" unary | "+" unary | power
    product  := unary (("*" | "/") unary)*
    sum      := product (("+" | "-") product)*

Functions: sin, cos, sqrt, log (natural), abs, exp and step (Heaviside,
with step(0) = 1).  Multiplication
must be written explicitly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "EvaluationError",
    "ExprDomainError",
    "ExprZeroDivision",
    "parse",
    "evaluate",
    "to_string",
    "FUNCTIONS",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvaluationError(ExprError, ArithmeticError):
    """Raised when an expression cannot be evaluated at a point."""


class ExprDomainError(EvaluationError):
    pass


class ExprZeroDivision(EvaluationError, ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "x" or "y"


@dataclass(frozen=True)
class Const:
    name: str  # only "pi"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Const, Neg, BinOp, Call]


def _sqrt(v: float) -> float:
    if v < 0:
        raise ExprDomainError(f"sqrt of negative argument {v!r}")
    return math.sqrt(v)


def _log(v: float) -> float:
    if v < 0:
        raise ExprDomainError(f"log of negative argument {v!r}")
    if v == 0:
        raise ExprZeroDivision("log of zero")
    return math.log(v)


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError as exc:
        raise ExprDomainError(f"exp overflow at {v!r}") from exc


def _step(v: float) -> float:
    """Heaviside step with ``step(0) = 1``, for piecewise-constant potentials."""
    return 1.0 if v >= 0 else 0.0


FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": _sqrt,
    "log": _log,
    "abs": abs,
    "exp": _exp,
    "step": _step,
}
CONSTANTS = {"pi": math.pi}
VARIABLES = ("x", "y")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

# binding power of infix operators; "^" is handled separately
_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20}
_UNARY_BP = 30
_POW_BP = 40


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            found = tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", tok.offset)
        return tok

    def parse(self) -> Expr:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
        return node

    def expression(self, min_bp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX:
                return left
            bp = _INFIX[tok.text]
            if bp <= min_bp:
                return left
            self.next()
            right = self.expression(bp)
            left = BinOp(tok.text, left, right)

    def prefix(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.next()
            operand = self.expression(_UNARY_BP)
            return Neg(operand) if tok.text == "-" else operand
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.next()
            # right associative; exponent may carry its own sign
            exponent = self.prefix_for_exponent()
            return BinOp("^", base, exponent)
        return base

    def prefix_for_exponent(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.next()
            operand = self.prefix_for_exponent()
            return Neg(operand) if tok.text == "-" else operand
        return self.power()

    def atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            name = tok.text
            if name in VARIABLES:
                return Var(name)
            if name in CONSTANTS:
                return Const(name)
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expression(0)
                self.expect(")")
                return Call(name, arg)
            raise UnknownIdentifier(name, tok.offset)
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.offset)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def _pow(a: float, b: float) -> float:
    if a == 0 and b < 0:
        raise ExprZeroDivision("zero raised to a negative power")
    if a < 0 and not float(b).is_integer():
        raise ExprDomainError(f"negative base {a!r} with fractional exponent {b!r}")
    try:
        return math.pow(a, b)
    except OverflowError as exc:
        raise ExprDomainError(f"overflow in {a!r}^{b!r}") from exc


def evaluate(e: Expr, x: float, y: float) -> float:
    """Evaluate ``e`` at the point ``(x, y)``.

    Raises :class:`ExprDomainError` for sqrt/log of negative arguments and
    :class:`ExprZeroDivision` for division by zero; neither returns NaN.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.operand, x, y)
    if isinstance(e, Call):
        return FUNCTIONS[e.func](evaluate(e.arg, x, y))
    if isinstance(e, BinOp):
        a = evaluate(e.left, x, y)
        b = evaluate(e.right, x, y)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise ExprZeroDivision("division by zero")
            return a / b
        return _pow(a, b)
    raise TypeError(f"not an expression node: {e!r}")


def to_string(e: Expr) -> str:
    """Fully parenthesised source text; ``parse(to_string(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.operand)})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")
