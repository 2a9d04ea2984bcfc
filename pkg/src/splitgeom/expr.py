"""Closed-form expression language for metric entries and warp functions.

Grammar (standard precedence, ``^`` binds tightest, then unary minus,
then ``* /``, then ``+ -``):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          # right-associative exponent
    atom    := NUMBER | 'x'<k> | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := sin | cos | exp | log | sqrt

Coordinates are ``x1 .. xn`` (1-based, validated against the chart
dimension at parse time).  Evaluation is generic over the scalar type:
plain floats, numpy arrays of points, or :class:`~splitgeom.hyperdual.HyperDual`
jets all work, so one parsed expression serves both fast value sampling
and exact differentiation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import hyperdual as hd
from .hyperdual import HyperDual, JetDomainError

__all__ = [
    "ExprError",
    "ParseError",
    "DomainError",
    "Num",
    "Var",
    "Call",
    "Bin",
    "Neg",
    "parse_expr",
    "evaluate",
    "eval_jet",
    "to_source",
]


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    pass


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based coordinate index


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class Call:
    fn: str
    child: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip over whitespace-only tail
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(source)))
    return tokens


class _Parser:
    def __init__(self, tokens, dim):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}", offset)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, _, offset = self.peek()
        if kind != "end":
            raise ParseError("trailing input", offset)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in ("+", "-"):
                self.advance()
                node = Bin(value, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in ("*", "/"):
                self.advance()
                node = Bin(value, node, self.factor())
            else:
                return node

    def factor(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, offset = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            exponent = self.factor()
            if _has_var(exponent):
                raise ParseError("exponent must be a constant", offset)
            return Bin("^", base, exponent)
        return base

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "name":
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.dim:
                    raise ParseError(
                        f"coordinate x{idx} exceeds chart dimension {self.dim}", offset)
                return Var(idx)
            raise ParseError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError("expected a number, coordinate, function or '('", offset)


def _has_var(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, (Num,)):
        return False
    if isinstance(node, Neg):
        return _has_var(node.child)
    if isinstance(node, Call):
        return _has_var(node.child)
    if isinstance(node, Bin):
        return _has_var(node.left) or _has_var(node.right)
    return False


def parse_expr(source, dim):
    """Parse ``source`` into an AST over coordinates ``x1..x<dim>``."""
    if not isinstance(source, str):
        raise ExprError(f"expression must be a string, got {type(source).__name__}")
    return _Parser(_tokenize(source), dim).parse()


# -- evaluation ------------------------------------------------------------

_FN_IMPL = {"sin": hd.sin, "cos": hd.cos, "exp": hd.exp, "log": hd.log, "sqrt": hd.sqrt}


def evaluate(node, coords):
    """Evaluate an AST at ``coords`` (sequence of scalars, arrays or jets)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return coords[node.index - 1]
    if isinstance(node, Neg):
        return -evaluate(node.child, coords)
    if isinstance(node, Call):
        try:
            return _FN_IMPL[node.fn](evaluate(node.child, coords))
        except JetDomainError as e:
            raise DomainError(f"{node.fn}: {e}") from e
    if isinstance(node, Bin):
        a = evaluate(node.left, coords)
        b = evaluate(node.right, coords)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            try:
                if isinstance(a, HyperDual) or isinstance(b, HyperDual):
                    if not isinstance(a, HyperDual):
                        a = hd.as_jet(a, b)
                    return a / b
                b_arr = np.asarray(b, dtype=float)
                if np.any(b_arr == 0.0):
                    raise DomainError("division by zero")
                return a / b_arr
            except JetDomainError as e:
                raise DomainError(str(e)) from e
        if node.op == "^":
            p = float(evaluate(node.right, ()))
            try:
                if isinstance(a, HyperDual):
                    return a ** p
                a_arr = np.asarray(a, dtype=float)
                if not p.is_integer() and np.any(a_arr <= 0.0):
                    raise DomainError("non-integer power of non-positive base")
                return np.power(a_arr, p)
            except JetDomainError as e:
                raise DomainError(str(e)) from e
    raise ExprError(f"unknown node {node!r}")


def eval_jet(node, point):
    """Second-order jet of the expression at ``point`` of shape ``(..., n)`` or ``(n,)``.

    The chart dimension is taken from the point, so the expression must have
    been parsed against the same dimension.
    """
    xs = hd.seed_jets(np.asarray(point, dtype=float))
    result = evaluate(node, xs)
    if not isinstance(result, HyperDual):
        result = hd.as_jet(result, xs[0])
    return result


# -- canonical printer -----------------------------------------------------

def to_source(node):
    """Canonical fully-parenthesized rendering; parses back to an equal AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.child)})"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.child)})"
    if isinstance(node, Bin):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    raise ExprError(f"unknown node {node!r}")
