"""Scalar potential expressions: parsing and forward-mode differentiation.

Grammar (whitespace ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := primary ("^" exponent)?
    exponent:= unary                      (must fold to an integer constant)
    primary := NUMBER | IDENT | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "sqrt" | "abs" | "exp"
    IDENT   := "x1" ... "xN"  (and "x", "y", "z" when N <= 3)

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``, and it is
right associative.  Exponents are integer constants only, which keeps the
evaluation total on negative bases.

Evaluation is vectorised over points and over seed directions at once: a
:class:`DualValue` carries ``value`` of shape ``(k,)`` and ``derivative`` of
shape ``(k, S)`` for ``S`` seeds.  The gradient of a potential is the
``S = N`` case with the identity seeds.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, EvaluationError, WellgeoError

FUNCTIONS = ("sin", "cos", "sqrt", "abs", "exp")


class ParseError(WellgeoError, ValueError):
    """Malformed expression text.  ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based coordinate index


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # "add", "sub", "mul", "div"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Const | Var | Unary | Binary | Pow


@dataclass(frozen=True)
class ExprAst:
    root: Node
    dimension: int
    text: str = ""

    def __str__(self):
        return to_text(self.root, self.dimension)


@dataclass
class DualValue:
    value: np.ndarray | float
    derivative: np.ndarray | float


# -- tokenizer / parser ------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text, dimension):
        self.text = text
        self.dimension = dimension
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _byte(self, char_offset):
        return len(self.text[:char_offset].encode("utf-8"))

    def _tokenize(self, text):
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}", self._byte(i))
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            i = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, self._byte(tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {found}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = "add" if self.advance()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = "mul" if self.advance()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Unary("neg", self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            start = self.peek()
            if start[0] == "end":
                raise self.error("expected exponent, found end of input")
            exponent = _fold_constant(self.unary())
            if exponent is None or not float(exponent).is_integer():
                raise self.error("exponent must be an integer constant", start)
            return Pow(base, int(exponent))
        return base

    def primary(self):
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "ident":
            self.advance()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            return Var(self._variable_index(text, tok))
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {text!r}")

    def _variable_index(self, name, tok):
        aliases = {"x": 0, "y": 1, "z": 2}
        if name in aliases and self.dimension <= 3:
            index = aliases[name]
        else:
            m = re.fullmatch(r"x([1-9][0-9]*)", name)
            if m is None:
                raise self.error(f"unknown identifier {name!r}", tok)
            index = int(m.group(1)) - 1
        if index >= self.dimension:
            raise self.error(
                f"variable {name!r} out of range for dimension {self.dimension}", tok
            )
        return index


def _fold_constant(node):
    """Value of a constant subtree, or None if it depends on a variable."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Unary) and node.op == "neg":
        v = _fold_constant(node.arg)
        return None if v is None else -v
    if isinstance(node, Pow):
        v = _fold_constant(node.base)
        return None if v is None else v**node.exponent
    return None


def parse_expression(text: str, dimension: int) -> ExprAst:
    """Parse ``text`` into an AST over coordinates ``x1..xN``."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0)
    if dimension < 1:
        raise ArgumentError("dimension must be >= 1")
    return ExprAst(_Parser(text, dimension).parse(), dimension, text)


# -- pretty printing ---------------------------------------------------------

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def to_text(node: Node, dimension: int = 4) -> str:
    """Fully parenthesised text that reparses to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value)) if node.value >= 0 else f"(-{repr(float(-node.value))})"
    if isinstance(node, Var):
        if dimension <= 3:
            return "xyz"[node.index]
        return f"x{node.index + 1}"
    if isinstance(node, Unary):
        inner = to_text(node.arg, dimension)
        if node.op == "neg":
            return f"(-{inner})"
        return f"{node.op}({inner})"
    if isinstance(node, Binary):
        return f"({to_text(node.left, dimension)}{_BINARY_SYMBOL[node.op]}{to_text(node.right, dimension)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base, dimension)}^({node.exponent}))"
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation --------------------------------------------------------------


def _fail(message, node, dimension):
    sub = to_text(node, dimension)
    return EvaluationError(f"{message} in subexpression {sub}", subexpression=sub)


def _eval(node, points, seeds, dimension):
    """Forward-mode evaluation: returns (value (k,), derivative (k, S))."""
    k = points.shape[0]
    S = seeds.shape[0]
    if isinstance(node, Const):
        return np.full(k, node.value), np.zeros((k, S))
    if isinstance(node, Var):
        return points[:, node.index].copy(), np.broadcast_to(seeds[:, node.index], (k, S)).copy()
    if isinstance(node, Binary):
        a, da = _eval(node.left, points, seeds, dimension)
        b, db = _eval(node.right, points, seeds, dimension)
        if node.op == "add":
            return a + b, da + db
        if node.op == "sub":
            return a - b, da - db
        if node.op == "mul":
            return a * b, a[:, None] * db + b[:, None] * da
        if np.any(b == 0.0):
            raise _fail("division by zero", node.right, dimension)
        return a / b, (da * b[:, None] - a[:, None] * db) / (b * b)[:, None]
    if isinstance(node, Pow):
        a, da = _eval(node.base, points, seeds, dimension)
        n = node.exponent
        if n == 0:
            return np.ones(k), np.zeros((k, S))
        if n < 0 and np.any(a == 0.0):
            raise _fail("division by zero (negative power of zero)", node.base, dimension)
        value = a**n
        return value, (n * a ** (n - 1))[:, None] * da
    if isinstance(node, Unary):
        a, da = _eval(node.arg, points, seeds, dimension)
        op = node.op
        if op == "neg":
            return -a, -da
        if op == "sin":
            return np.sin(a), np.cos(a)[:, None] * da
        if op == "cos":
            return np.cos(a), -np.sin(a)[:, None] * da
        if op == "exp":
            e = np.exp(a)
            return e, e[:, None] * da
        if op == "sqrt":
            if np.any(a < 0.0):
                raise _fail("sqrt of negative value", node.arg, dimension)
            r = np.sqrt(a)
            zero = r == 0.0
            if np.any(zero & np.any(da != 0.0, axis=1)):
                raise _fail("sqrt is not differentiable at 0", node.arg, dimension)
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.where(zero, 0.0, 0.5 / np.where(zero, 1.0, r))
            return r, scale[:, None] * da
        if op == "abs":
            zero = a == 0.0
            if np.any(zero & np.any(da != 0.0, axis=1)):
                raise _fail("abs is not differentiable at 0", node.arg, dimension)
            return np.abs(a), np.sign(a)[:, None] * da
    raise TypeError(f"not an expression node: {node!r}")


def eval_dual(ast: ExprAst, point, seed) -> DualValue:
    """Value at ``point`` and directional derivative along ``seed``."""
    point = np.asarray(point, dtype=float).reshape(-1)
    seed = np.asarray(seed, dtype=float).reshape(-1)
    if point.shape[0] != ast.dimension or seed.shape[0] != ast.dimension:
        raise ArgumentError(
            f"expected {ast.dimension}-vectors, got point {point.shape[0]} and seed {seed.shape[0]}"
        )
    value, deriv = _eval(ast.root, point[None, :], seed[None, :], ast.dimension)
    return DualValue(float(value[0]), float(deriv[0, 0]))


def evaluate(ast: ExprAst, points) -> np.ndarray:
    """Values at an array of points ``(k, N)``; no derivative bookkeeping."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    value, _ = _eval(ast.root, points, np.zeros((0, ast.dimension)), ast.dimension)
    return value


def value_and_gradient(ast: ExprAst, points):
    """Values ``(k,)`` and gradients ``(k, N)`` via N seed directions at once."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    value, deriv = _eval(ast.root, points, np.eye(ast.dimension), ast.dimension)
    return value, deriv

