"""Small expression language for initial data.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' exponent)?
    atom   := number | 'x' | fn '(' expr ')' | '(' expr ')'
    fn     := sin | cos | exp | tanh | sech2

Unary minus binds looser than ``^`` so ``-x^2`` is ``-(x^2)``.  Exponents
must be constant: a number, a negated number, or a parenthesised
expression free of ``x``.  Only smooth functions are available, so every
expression is C-infinity wherever it evaluates finitely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_DEPTH = 64
FUNCTIONS = ("sin", "cos", "exp", "tanh", "sech2")


class ExprSyntaxError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(ArithmeticError):
    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} at x={x!r}")
        self.x = x


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Const | Var | Neg | Bin | Pow | Call
X = Var()


# ---------------------------------------------------------------- parsing

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.depth = 0

    def error(self, message, offset=None):
        raise ExprSyntaxError(message, self.pos if offset is None else offset)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.error(f"expression nested deeper than {MAX_DEPTH}")

    def parse(self):
        node = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        if depth(node) > MAX_DEPTH:
            self.error(f"expression tree deeper than {MAX_DEPTH}", 0)
        return node

    def expr(self):
        self.enter()
        node = self.term()
        while self.peek() in ("+", "-") and self.peek():
            op = self.text[self.pos]
            self.pos += 1
            node = Bin(op, node, self.term())
        self.depth -= 1
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/") and self.peek():
            op = self.text[self.pos]
            self.pos += 1
            node = Bin(op, node, self.factor())
        return node

    def factor(self):
        if self.peek() == "-":
            self.pos += 1
            self.enter()
            node = Neg(self.factor())
            self.depth -= 1
            return node
        node = self.atom()
        if self.peek() == "^":
            self.pos += 1
            node = Pow(node, self.exponent())
        return node

    def exponent(self):
        start = self.pos
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            sub = self.expr()
            self.expect(")")
        elif ch == "-":
            self.pos += 1
            sub = Neg(self.number())
        elif ch.isdigit() or ch == ".":
            sub = self.number()
        else:
            self.error("non-constant exponent")
        if _has_var(sub):
            self.error("non-constant exponent", start)
        return float(evaluate(sub, 0.0))

    def number(self):
        self.skip()
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark
        try:
            return Const(float(text[start:self.pos]))
        except ValueError:
            self.error("malformed number", start)

    def atom(self):
        ch = self.peek()
        start = self.pos
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self.pos += 1
            name = self.text[start:self.pos]
            if name == "x":
                return X
            if name not in FUNCTIONS:
                self.error(f"unknown function {name!r}", start)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        if not ch:
            self.error("unexpected end of input")
        self.error(f"unexpected {ch!r}")


def parse(text: str) -> Node:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if not text.isascii():
        raise ExprSyntaxError("non-ASCII input", next(i for i, c in enumerate(text) if not c.isascii()))
    return _Parser(text).parse()


def _has_var(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, Bin):
        return _has_var(node.left) or _has_var(node.right)
    if isinstance(node, Pow):
        return _has_var(node.base)
    return _has_var(node.arg)


def depth(node) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Bin):
        return 1 + max(depth(node.left), depth(node.right))
    if isinstance(node, Pow):
        return 1 + depth(node.base)
    return 1 + depth(node.arg)


# ------------------------------------------------------------- evaluation

def _sech2(u):
    c = np.cosh(u)
    return 1.0 / (c * c)


_FN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh, "sech2": _sech2}


def _first_bad(x, bad):
    if np.ndim(x) == 0:
        return float(x)
    return float(np.broadcast_to(x, bad.shape)[bad][0])


def _eval(node, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Pow):
        return np.power(_eval(node.base, x), node.exponent)
    if isinstance(node, Call):
        return _FN[node.fn](_eval(node.arg, x))
    a = _eval(node.left, x)
    b = _eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    zero = np.asarray(b) == 0
    if zero.any():
        raise ExprEvalError("division by zero", _first_bad(x, zero))
    return a / b


def evaluate(node: Node, x):
    """Evaluate at a scalar or an array of abscissas (float64).

    Raises ExprEvalError on division by zero or a non-finite result.
    """
    xs = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(node, xs)
    out = np.asarray(out, dtype=float)
    bad = ~np.isfinite(out)
    if bad.any():
        raise ExprEvalError("non-finite value", _first_bad(xs, bad))
    if xs.ndim == 0:
        return float(out)
    return np.broadcast_to(out, xs.shape).copy()


# --------------------------------------------------------- differentiation

ZERO = Const(0.0)
ONE = Const(1.0)


def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Bin("*", a, b)


def differentiate(node: Node) -> Node:
    """Exact d/dx; tanh' is written with sech2 so the grammar stays closed."""
    if isinstance(node, (Const,)):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        d = differentiate(node.arg)
        return ZERO if d == ZERO else Neg(d)
    if isinstance(node, Pow):
        db = differentiate(node.base)
        n = node.exponent
        if n == 0.0 or db == ZERO:
            return ZERO
        inner = ONE if n == 1.0 else (node.base if n == 2.0 else Pow(node.base, n - 1.0))
        return _mul(_mul(Const(n), inner), db)
    if isinstance(node, Call):
        u = node.arg
        du = differentiate(u)
        if du == ZERO:
            return ZERO
        if node.fn == "sin":
            outer = Call("cos", u)
        elif node.fn == "cos":
            outer = Neg(Call("sin", u))
        elif node.fn == "exp":
            outer = node
        elif node.fn == "tanh":
            outer = Call("sech2", u)
        else:
            outer = Neg(Bin("*", Bin("*", Const(2.0), node), Call("tanh", u)))
        return _mul(outer, du)
    a, b = node.left, node.right
    da, db = differentiate(a), differentiate(b)
    if node.op == "+":
        return _add(da, db)
    if node.op == "-":
        return _sub(da, db)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    # quotient rule: (a'b - ab') / b^2
    num = _sub(_mul(da, b), _mul(a, db))
    if num == ZERO:
        return ZERO
    return Bin("/", num, Pow(b, 2.0))


# ---------------------------------------------------------------- printing

def render(node: Node) -> str:
    """Fully parenthesised text that parses back to an equivalent tree."""
    if isinstance(node, Const):
        v = node.value
        text = repr(float(abs(v)))
        if "inf" in text or "nan" in text:
            raise ExprEvalError(f"cannot render constant {v!r}")
        return f"(-{text})" if math.copysign(1.0, v) < 0 else text
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{render(node.arg)})"
    if isinstance(node, Pow):
        return f"(({render(node.base)})^({render(Const(node.exponent))}))"
    if isinstance(node, Call):
        return f"{node.fn}({render(node.arg)})"
    return f"({render(node.left)} {node.op} {render(node.right)})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its source text."""

    text: str
    ast: Node

    @classmethod
    def parse(cls, text: str) -> "Expression":
        return cls(text, parse(text))

    @classmethod
    def from_ast(cls, ast: Node) -> "Expression":
        return cls(render(ast), ast)

    def __call__(self, x):
        return evaluate(self.ast, x)

    def derivative(self) -> "Expression":
        return Expression.from_ast(differentiate(self.ast))

    def __str__(self):
        return self.text
