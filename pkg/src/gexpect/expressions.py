"""Tiny closed expression grammar for payoffs and coefficient maps.

The grammar is deliberately restricted (constants, +, -, *, integer powers,
sin, cos, and affine state references) so that configuration files cannot
embed a general-purpose language, and so that every expression carries exact
symbolic first and second derivatives.  State variables are written ``x0``,
``x1``, ... with the aliases ``x`` and ``z`` for ``x0`` and ``y`` for ``x1``.
Coefficient maps may additionally reference the control variables ``gamma``
and ``lam``.

Evaluation is vectorised: variables bind to numpy arrays of a common
broadcastable shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

Number = Union[int, float]

_ALIASES = {"x": "x0", "z": "x0", "y": "x1", "lambda": "lam"}
_FUNCTIONS = ("sin", "cos", "abs")


class ExpressionError(ValueError):
    """Raised for syntax errors or unknown symbols."""


def _as_expr(v) -> "Expr":
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return Const(float(v))
    raise ExpressionError(f"cannot coerce {v!r} to an expression")


class Expr:
    """Immutable expression node; supports arithmetic operators."""

    def eval(self, env: Mapping[str, np.ndarray]):
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def degree(self):
        """Polynomial growth degree bound (sin/cos count as bounded)."""
        raise NotImplementedError

    def __call__(self, *arrays, **named):
        env = dict(named)
        for i, a in enumerate(arrays):
            env[f"x{i}"] = a
        return self.eval(env)

    def __add__(self, other):
        return Add(self, _as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Add(self, Neg(_as_expr(other)))

    def __rsub__(self, other):
        return Add(_as_expr(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, _as_expr(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n):
        return Pow(self, n)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Const(0.0)

    def variables(self):
        return frozenset()

    def degree(self):
        return 0

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ExpressionError(f"unbound variable {self.name!r}") from None

    def diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def variables(self):
        return frozenset({self.name})

    def degree(self):
        return 1

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def eval(self, env):
        return self.left.eval(env) + self.right.eval(env)

    def diff(self, var):
        return _add(self.left.diff(var), self.right.diff(var))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def degree(self):
        return max(self.left.degree(), self.right.degree())

    def __repr__(self):
        return f"({self.left!r} + {self.right!r})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def eval(self, env):
        return self.left.eval(env) * self.right.eval(env)

    def diff(self, var):
        return _add(
            _mul(self.left.diff(var), self.right),
            _mul(self.left, self.right.diff(var)),
        )

    def variables(self):
        return self.left.variables() | self.right.variables()

    def degree(self):
        return self.left.degree() + self.right.degree()

    def __repr__(self):
        return f"({self.left!r} * {self.right!r})"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return Neg(self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def degree(self):
        return self.arg.degree()

    def __repr__(self):
        return f"(-{self.arg!r})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ExpressionError("powers must use non-negative integer exponents")

    def eval(self, env):
        return self.base.eval(env) ** self.exponent

    def diff(self, var):
        if self.exponent == 0:
            return Const(0.0)
        return _mul(
            _mul(Const(float(self.exponent)), Pow(self.base, self.exponent - 1)),
            self.base.diff(var),
        )

    def variables(self):
        return self.base.variables()

    def degree(self):
        return self.base.degree() * self.exponent

    def __repr__(self):
        return f"{self.base!r}^{self.exponent}"


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr

    def eval(self, env):
        return np.sin(self.arg.eval(env))

    def diff(self, var):
        return _mul(Cos(self.arg), self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def degree(self):
        return 0

    def __repr__(self):
        return f"sin({self.arg!r})"


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr

    def eval(self, env):
        return np.cos(self.arg.eval(env))

    def diff(self, var):
        return Neg(_mul(Sin(self.arg), self.arg.diff(var)))

    def variables(self):
        return self.arg.variables()

    def degree(self):
        return 0

    def __repr__(self):
        return f"cos({self.arg!r})"


@dataclass(frozen=True)
class Abs(Expr):
    """|arg|; derivative uses sign(arg), undefined at kinks."""

    arg: Expr

    def eval(self, env):
        return np.abs(self.arg.eval(env))

    def diff(self, var):
        return _mul(SignOf(self.arg), self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def degree(self):
        return self.arg.degree()

    def __repr__(self):
        return f"abs({self.arg!r})"


@dataclass(frozen=True)
class SignOf(Expr):
    arg: Expr

    def eval(self, env):
        return np.sign(self.arg.eval(env))

    def diff(self, var):
        return Const(0.0)

    def variables(self):
        return self.arg.variables()

    def degree(self):
        return 0

    def __repr__(self):
        return f"sign({self.arg!r})"


def _add(a: Expr, b: Expr) -> Expr:
    # light folding keeps derivative trees small
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 0.0:
            return Const(0.0)
        if a.value == 1.0:
            return b
        if isinstance(b, Const):
            return Const(a.value * b.value)
    if isinstance(b, Const):
        if b.value == 0.0:
            return Const(0.0)
        if b.value == 1.0:
            return a
    return Mul(a, b)


def X(i: int) -> Var:
    """State variable ``x{i}``; convenience constructor for code-built payoffs."""
    return Var(f"x{i}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*^(),]))"
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"bad token at {text[pos:pos + 10]!r}")
        if m.lastgroup == "num":
            out.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, found {val!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input from {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = _add(node, rhs if op == "+" else Neg(rhs))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek() == ("op", "*"):
            self.next()
            node = _mul(node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek() == ("op", "-"):
            self.next()
            return Neg(self.unary())
        if self.peek() == ("op", "+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.next()
            if self.peek() == ("op", "-"):
                raise ExpressionError("negative exponents are not in the grammar")
            kind, val = self.next()
            if kind != "num" or val != int(val):
                raise ExpressionError("exponent must be a literal integer")
            return Pow(base, int(val))
        return base

    def atom(self) -> Expr:
        kind, val = self.next()
        if kind == "num":
            return Const(val)
        if kind == "name":
            name = _ALIASES.get(val, val)
            if val in _FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return {"sin": Sin, "cos": Cos, "abs": Abs}[val](inner)
            if not re.fullmatch(r"x\d+|gamma|lam", name):
                raise ExpressionError(f"unknown symbol {val!r}")
            return Var(name)
        if (kind, val) == ("op", "("):
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExpressionError(f"unexpected token {val!r}")


def parse(text: str) -> Expr:
    """Parse an expression string into an :class:`Expr` tree."""
    return _Parser(_tokenize(text)).parse()
