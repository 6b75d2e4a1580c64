"""Tiny arithmetic expression language with symbolic differentiation.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("+" | "-") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``FUNC`` is one of ``exp, log, sin, cos``; ``NAME`` is a coordinate or the
constant ``pi``. ``^`` binds tighter than unary minus and associates to the
right, so ``-q^2`` is ``-(q^2)`` and ``2^3^2`` is ``2^9``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParseError
from .geometry import ScalarField

__all__ = ["Node", "parse", "compile_field", "compile_predicate"]

FUNCS = ("exp", "log", "sin", "cos")

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


class Node:
    def eval(self, x):
        raise NotImplementedError

    def diff(self, i: int) -> "Node":
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def eval(self, x):
        return self.value

    def diff(self, i):
        return ZERO

    def __str__(self):
        return repr(self.value)


ZERO = Num(0.0)
ONE = Num(1.0)


@dataclass(frozen=True)
class Var(Node):
    index: int
    name: str

    def eval(self, x):
        return x[self.index]

    def diff(self, i):
        return ONE if i == self.index else ZERO

    def __str__(self):
        return self.name


def _is(node, value):
    return isinstance(node, Num) and node.value == value


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def div(a, b):
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Bin("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


def power(a, b):
    if _is(b, 1):
        return a
    if _is(b, 0):
        return ONE
    return Bin("^", a, b)


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def eval(self, x):
        return -self.arg.eval(x)

    def diff(self, i):
        return neg(self.arg.diff(i))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node

    def eval(self, x):
        a = self.left.eval(x)
        b = self.right.eval(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return a ** b

    def diff(self, i):
        u, v = self.left, self.right
        du, dv = u.diff(i), v.diff(i)
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        if self.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), power(v, Num(2.0)))
        if isinstance(v, Num):
            return mul(mul(v, power(u, Num(v.value - 1.0))), du)
        # d(u^v) = u^v (v' log u + v u' / u)
        return mul(self, add(mul(dv, Func("log", u)), div(mul(v, du), u)))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


_NP = {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos}


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def eval(self, x):
        return _NP[self.name](self.arg.eval(x))

    def diff(self, i):
        du = self.arg.diff(i)
        if _is(du, 0):
            return ZERO
        if self.name == "exp":
            outer = self
        elif self.name == "log":
            outer = div(ONE, self.arg)
        elif self.name == "sin":
            outer = Func("cos", self.arg)
        else:
            outer = neg(Func("sin", self.arg))
        return mul(outer, du)

    def __str__(self):
        return f"{self.name}({self.arg})"


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {n: i for i, n in enumerate(names)}
        self.tokens = []
        for m in _TOKEN.finditer(text):
            if m.group(0).strip() == "":
                continue
            num, name, other = m.groups()
            pos = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
            if num is not None:
                self.tokens.append(("num", num, pos))
            elif name is not None:
                self.tokens.append(("name", name, pos))
            else:
                if other not in "+-*/^()":
                    raise ParseError(f"unexpected character {other!r}", pos)
                self.tokens.append(("op", other, pos))
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Node:
        if not self.tokens:
            raise ParseError("empty expression", 0)
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Bin(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Bin(op, node, rhs)
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            arg = self.unary()
            return arg if val == "+" else Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if val in self.names:
                return Var(self.names[val], val)
            if val == "pi":
                return Num(math.pi)
            raise ParseError(f"unknown name {val!r}", pos)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str, names: Sequence[str]) -> Node:
    """Parse ``text`` over the coordinate ``names``."""
    if not isinstance(text, str):
        raise ParseError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, names).parse()


def compile_field(text: str, names: Sequence[str], label: str = "") -> ScalarField:
    """Scalar field with closed-form gradient from symbolic differentiation."""
    tree = parse(text, names)
    partials = [tree.diff(i) for i in range(len(names))]

    def func(x):
        return float(tree.eval(x))

    def grad(x):
        return np.array([float(d.eval(x)) for d in partials])

    return ScalarField(func, grad, name=label or text)


_INEQ = re.compile(r"^(.*?)(<|>)(.*)$")


def compile_predicate(conditions: Sequence[str], names: Sequence[str]):
    """Conjunction of strict inequalities ``"lhs > rhs"`` / ``"lhs < rhs"``."""
    tests = []
    for cond in conditions:
        m = _INEQ.match(cond)
        if m is None or "=" in cond:
            raise ParseError(f"domain condition {cond!r} must be a strict inequality", 0)
        lhs, op, rhs = m.groups()
        a, b = parse(lhs, names), parse(rhs, names)
        tests.append((a, op, b))

    def predicate(x):
        for a, op, b in tests:
            va, vb = a.eval(x), b.eval(x)
            if not (va > vb if op == ">" else va < vb):
                return False
        return True

    return predicate
