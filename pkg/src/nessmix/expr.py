"""A small arithmetic language for user-defined kernels ``g(x, y)`` and profiles ``Φ(r)``.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | ident | ident '(' args ')' | '(' expr ')'

Identifiers are the variables ``x``, ``y``, ``r`` and the functions ``abs``,
``exp``, ``log``, ``min``, ``max`` and ``lgamma`` (alias ``gammaln``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigError, NumericError

__all__ = [
    "ExprSyntaxError",
    "UnknownIdentifier",
    "Undefined",
    "parse",
    "evaluate",
    "evaluate_array",
    "pretty",
    "free_variables",
    "check_symmetry",
]


class ExprSyntaxError(ConfigError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ConfigError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class Undefined(NumericError):
    """Expression value is undefined (log of a negative, 0 to a negative power, ...)."""


# --- AST -------------------------------------------------------------------


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def __repr__(self):
        return f"Const({_num(self.value)})"


@dataclass(frozen=True)
class Var(Node):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True)
class BinOp(Node):
    left: Node
    right: Node
    symbol = "?"

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r},{self.right!r})"


class Add(BinOp):
    symbol = "+"


class Sub(BinOp):
    symbol = "-"


class Mul(BinOp):
    symbol = "*"


class Div(BinOp):
    symbol = "/"


class Pow(BinOp):
    symbol = "^"


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple

    def __repr__(self):
        inner = ",".join(repr(a) for a in self.args)
        return f"{_FUNC_NAMES[self.func]}({inner})"


_ARITY = {"abs": 1, "exp": 1, "log": 1, "min": 2, "max": 2, "lgamma": 1}
_ALIASES = {"gammaln": "lgamma"}
_FUNC_NAMES = {"abs": "Abs", "exp": "Exp", "log": "Log", "min": "Min", "max": "Max", "lgamma": "LGamma"}
VARIABLES = ("x", "y", "r")


def _num(v: float) -> str:
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


# --- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Iterable[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {text!r} overflows", pos)
            return Const(value)
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                name = _ALIASES.get(text, text)
                if name not in _ARITY:
                    raise UnknownIdentifier(text, pos)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != _ARITY[name]:
                    raise ExprSyntaxError(
                        f"{text}() takes {_ARITY[name]} argument(s), got {len(args)}", pos
                    )
                return Call(name, tuple(args))
            if text not in self.variables:
                raise UnknownIdentifier(text, pos)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected a number, name or '(', found {found}", pos)


def parse(src: str, variables: Iterable[str] = VARIABLES) -> Node:
    """Parse ``src`` into an AST; raises ExprSyntaxError / UnknownIdentifier."""
    if not isinstance(src, str):
        raise ExprSyntaxError("expression must be text", 0)
    try:
        return _Parser(src, variables).parse()
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", 0) from None


# --- printing ----------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node):
    if isinstance(node, Const) and node.value < 0:
        return 3
    return _PREC.get(type(node), 5)


def pretty(node: Node) -> str:
    """Canonical text form; ``parse(pretty(t))`` rebuilds ``t``."""
    if isinstance(node, Const):
        return _num(node.value) if node.value >= 0 else f"-{_num(-node.value)}"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = pretty(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 3 else f"-({inner})"
    if isinstance(node, Pow):
        left = pretty(node.left)
        if _prec(node.left) <= 4:
            left = f"({left})"
        right = pretty(node.right)
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    p = _PREC[type(node)]
    left = pretty(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = pretty(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.symbol} {right}"


def free_variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.arg)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    return set().union(*(free_variables(a) for a in node.args))


# --- evaluation --------------------------------------------------------------


def _scalar_pow(base, exp):
    if base == 0 and exp < 0:
        raise Undefined("0 raised to a negative power")
    if base < 0 and exp != int(exp):
        raise Undefined("negative base with non-integer exponent")
    try:
        return math.pow(base, exp)
    except OverflowError:
        return math.inf if base > 0 or int(exp) % 2 == 0 else -math.inf


def _scalar_log(v):
    if v < 0 or math.isnan(v):
        raise Undefined("log of a negative number")
    return -math.inf if v == 0 else math.log(v)


def _scalar_exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _scalar_lgamma(v):
    if v <= 0 and v == int(v):
        raise Undefined("lgamma at a non-positive integer")
    return math.lgamma(v)


_SCALAR_FUNCS = {
    "abs": abs,
    "exp": _scalar_exp,
    "log": _scalar_log,
    "min": min,
    "max": max,
    "lgamma": _scalar_lgamma,
}


def evaluate(node: Node, x: float = 0.0, y: float = 0.0, r: float = 0.0) -> float:
    """IEEE double evaluation; raises :class:`Undefined` on domain errors."""
    env = {"x": float(x), "y": float(y), "r": float(r)}

    def ev(n):
        if isinstance(n, Const):
            return n.value
        if isinstance(n, Var):
            return env[n.name]
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, Call):
            return _SCALAR_FUNCS[n.func](*(ev(a) for a in n.args))
        a, b = ev(n.left), ev(n.right)
        if isinstance(n, Add):
            return a + b
        if isinstance(n, Sub):
            return a - b
        if isinstance(n, Mul):
            return a * b
        if isinstance(n, Div):
            if b == 0:
                raise Undefined("division by zero")
            return a / b
        return _scalar_pow(a, b)

    value = ev(node)
    if math.isnan(value):
        raise Undefined("expression evaluates to NaN")
    return value


def _array_pow(a, b):
    out = np.power(a, b)
    bad = ((a == 0) & (b < 0)) | ((a < 0) & (b != np.floor(b)))
    return np.where(bad, np.nan, out)


def _array_lgamma(v):
    from scipy.special import gammaln

    return np.where((v <= 0) & (v == np.floor(v)), np.nan, gammaln(v))


_ARRAY_FUNCS = {
    "abs": np.abs,
    "exp": np.exp,
    "log": lambda v: np.where(v < 0, np.nan, np.log(np.abs(v))),
    "min": np.minimum,
    "max": np.maximum,
    "lgamma": _array_lgamma,
}


def evaluate_array(node: Node, x=0.0, y=0.0, r=0.0) -> np.ndarray:
    """Vectorized evaluation; undefined entries come back as NaN."""
    env = {"x": np.asarray(x, float), "y": np.asarray(y, float), "r": np.asarray(r, float)}

    def ev(n):
        if isinstance(n, Const):
            return np.asarray(n.value)
        if isinstance(n, Var):
            return env[n.name]
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, Call):
            return _ARRAY_FUNCS[n.func](*(ev(a) for a in n.args))
        a, b = ev(n.left), ev(n.right)
        if isinstance(n, Add):
            return a + b
        if isinstance(n, Sub):
            return a - b
        if isinstance(n, Mul):
            return a * b
        if isinstance(n, Div):
            return np.where(b == 0, np.nan, a / np.where(b == 0, 1.0, b))
        return _array_pow(a, b)

    with np.errstate(all="ignore"):
        out = ev(node)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values()))
        return np.broadcast_to(np.asarray(out, dtype=float), shape)


def check_symmetry(node: Node, probes: int = 20, lo: float = 0.05, hi: float = 5.0) -> bool:
    """Probe-grid test of ``g(x, y) == g(y, x)``.

    Necessary but not sufficient: an asymmetry between probe points goes
    unnoticed.  Undefined values count as failure.
    """
    if not free_variables(node) <= {"x", "y"}:
        return False
    pts = np.geomspace(lo, hi, probes)
    for x in pts:
        for y in pts:
            try:
                u = evaluate(node, x, y)
                v = evaluate(node, y, x)
            except Undefined:
                return False
            if u == v:
                continue
            if not (abs(u - v) < 1e-12 * max(1.0, abs(u))):
                return False
    return True
