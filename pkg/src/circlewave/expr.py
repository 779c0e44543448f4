"""Nonlinearity expressions f(t, u, p) with exact symbolic partial derivatives.

``p`` stands for the spatial derivative u_x.  The language is a small infix
calculator::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' INTEGER)*
    primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Exponents are restricted to non-negative integer literals so that every
expression is smooth and its derivatives stay closed-form.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "ExpressionDomainError",
    "ExpressionAst",
    "parse_nonlinearity",
    "parse_expression",
    "evaluate",
    "differentiate",
    "unparse",
    "is_reflection_symmetric",
]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
}
NONLINEARITY_VARIABLES = ("t", "u", "p")


class ExpressionError(ValueError):
    """Base class for expression failures."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed source text; ``offset`` is the 0-based byte offset."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        self.reason = message
        super().__init__(f"{message} at offset {offset}")

    def diagnostic(self) -> str:
        if not self.source:
            return str(self)
        return f"{self}\n  {self.source}\n  {' ' * self.offset}^"


class ExpressionDomainError(ExpressionError, ArithmeticError):
    """Evaluation outside the domain of an operator (division by zero)."""


# --------------------------------------------------------------------------
# AST nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Node"


Node = Const | Var | Param | Neg | BinOp | Pow | Func


@dataclass(frozen=True)
class ExpressionAst:
    """Parsed expression together with its parameter table.

    Instances are immutable and callable: ``ast(t, u, p)`` evaluates
    elementwise on scalars or numpy arrays.
    """

    root: Node
    params: tuple[tuple[str, float], ...] = ()
    variables: tuple[str, ...] = NONLINEARITY_VARIABLES
    source: str = ""
    _fn: Callable = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        table = dict(self.params)
        for name in _param_names(self.root):
            if name not in table:
                raise ExpressionError(f"parameter {name!r} is not declared")
        object.__setattr__(self, "_fn", _compile(self.root, table, self.variables))

    @property
    def param_table(self) -> dict[str, float]:
        return dict(self.params)

    def __call__(self, *args):
        return self._fn(*args)

    def __reduce__(self):
        # the compiled closure is not picklable; rebuild it on load
        return (ExpressionAst, (self.root, self.params, self.variables, self.source))

    def derivative(self, var: str) -> "ExpressionAst":
        return differentiate(self, var)

    def depends_on(self, var: str) -> bool:
        return var in _var_names(self.root)

    def with_params(self, params: Mapping[str, float]) -> "ExpressionAst":
        """Same tree with some parameter values replaced."""
        table = dict(self.params)
        table.update({k: float(v) for k, v in params.items()})
        return ExpressionAst(self.root, tuple(sorted(table.items())), self.variables, self.source)

    def __str__(self) -> str:
        return unparse(self)


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, params: Mapping[str, float], variables: tuple[str, ...]):
        self.src = src
        self.params = params
        self.variables = variables
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExpressionSyntaxError(message, tok[2], self.src)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] == "end":
            raise self.error(f"expected {text!r}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.primary()
        while self.peek()[1] == "^":
            self.advance()
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        tok = self.peek()
        if tok[1] == "-":
            raise self.error("negative exponent")
        if tok[1] == "(":
            self.advance()
            value = self.exponent()
            self.expect(")")
            return value
        if tok[0] != "num":
            raise self.error("exponent must be a non-negative integer constant")
        self.advance()
        value = float(tok[1])
        if not value.is_integer():
            raise self.error("non-integer exponent", tok)
        return int(value)

    def primary(self) -> Node:
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "name":
            self.advance()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text in self.variables:
                return Var(text)
            if text in self.params:
                return Param(text)
            raise self.error(f"undeclared identifier {text!r}", tok)
        if text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {text!r}")


def parse_expression(
    src: str,
    params: Mapping[str, float] | None = None,
    variables: tuple[str, ...] = NONLINEARITY_VARIABLES,
) -> ExpressionAst:
    """Parse ``src`` over the given free variables and declared parameters."""
    params = {k: float(v) for k, v in (params or {}).items()}
    for name in params:
        if name in variables or name in FUNCTIONS:
            raise ExpressionError(f"parameter {name!r} shadows a variable or function")
    root = _Parser(src, params, tuple(variables)).parse()
    used = _param_names(root)
    table = tuple(sorted((k, v) for k, v in params.items() if k in used))
    return ExpressionAst(root, table, tuple(variables), src)


def parse_nonlinearity(src: str, params: Mapping[str, float] | None = None) -> ExpressionAst:
    """Parse a nonlinearity f(t, u, p)."""
    return parse_expression(src, params, NONLINEARITY_VARIABLES)


# --------------------------------------------------------------------------
# evaluation

def _compile(node: Node, params: Mapping[str, float], variables: tuple[str, ...]) -> Callable:
    index = {name: i for i, name in enumerate(variables)}

    def build(n):
        if isinstance(n, Const):
            v = n.value
            return lambda args: v
        if isinstance(n, Var):
            i = index[n.name]
            return lambda args: args[i]
        if isinstance(n, Param):
            v = params[n.name]
            return lambda args: v
        if isinstance(n, Neg):
            a = build(n.arg)
            return lambda args: -a(args)
        if isinstance(n, Pow):
            b, k = build(n.base), n.exponent
            if k == 0:
                return lambda args: 1.0 + 0.0 * b(args)
            if k == 1:
                return b
            return lambda args: b(args) ** k
        if isinstance(n, Func):
            fn, a = FUNCTIONS[n.name], build(n.arg)
            return lambda args: fn(a(args))
        if isinstance(n, BinOp):
            left, right = build(n.left), build(n.right)
            if n.op == "+":
                return lambda args: left(args) + right(args)
            if n.op == "-":
                return lambda args: left(args) - right(args)
            if n.op == "*":
                return lambda args: left(args) * right(args)

            def divide(args):
                den = right(args)
                if np.any(np.asarray(den) == 0):
                    raise ExpressionDomainError("division by zero")
                return left(args) / den

            return divide
        raise TypeError(f"unknown node {n!r}")

    body = build(node)

    def fn(*args):
        if len(args) != len(variables):
            raise TypeError(f"expected {len(variables)} arguments ({', '.join(variables)})")
        with np.errstate(over="ignore", invalid="ignore"):
            out = body(args)
        if np.ndim(out) == 0 and not any(np.ndim(a) for a in args):
            return float(out)
        return np.broadcast_to(out, np.broadcast(*args).shape).astype(float)

    return fn


def evaluate(ast: ExpressionAst, t, u, p):
    """Value of f(t, u, p); accepts scalars or broadcastable arrays."""
    return ast(t, u, p)


# --------------------------------------------------------------------------
# symbolic differentiation

ZERO, ONE = Const(0.0), Const(1.0)


def _is_const(n, value=None):
    return isinstance(n, Const) and (value is None or n.value == value)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(a, k):
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_const(a):
        return Const(a.value ** k)
    return Pow(a, k)


def _d(n: Node, var: str) -> Node:
    if isinstance(n, (Const, Param)):
        return ZERO
    if isinstance(n, Var):
        return ONE if n.name == var else ZERO
    if isinstance(n, Neg):
        return _neg(_d(n.arg, var))
    if isinstance(n, BinOp):
        da, db = _d(n.left, var), _d(n.right, var)
        if n.op == "+":
            return _add(da, db)
        if n.op == "-":
            return _sub(da, db)
        if n.op == "*":
            return _add(_mul(da, n.right), _mul(n.left, db))
        # quotient rule
        num = _sub(_mul(da, n.right), _mul(n.left, db))
        return _div(num, _pow(n.right, 2))
    if isinstance(n, Pow):
        if n.exponent == 0:
            return ZERO
        inner = _d(n.base, var)
        return _mul(_mul(Const(float(n.exponent)), _pow(n.base, n.exponent - 1)), inner)
    if isinstance(n, Func):
        inner = _d(n.arg, var)
        if _is_const(inner, 0.0):
            return ZERO
        if n.name == "sin":
            outer = Func("cos", n.arg)
        elif n.name == "cos":
            outer = _neg(Func("sin", n.arg))
        elif n.name == "exp":
            outer = n
        else:  # tanh' = 1 - tanh^2
            outer = _sub(ONE, Pow(n, 2))
        return _mul(outer, inner)
    raise TypeError(f"unknown node {n!r}")


def differentiate(ast: ExpressionAst, var: str) -> ExpressionAst:
    """Exact partial derivative of ``ast`` with respect to a free variable."""
    if var not in ast.variables:
        raise ExpressionError(f"{var!r} is not a variable of this expression")
    return ExpressionAst(_d(ast.root, var), ast.params, ast.variables)


# --------------------------------------------------------------------------
# unparsing and helpers

def _unparse(n: Node) -> str:
    if isinstance(n, Const):
        text = repr(float(n.value))
        return f"({text})" if n.value < 0 or text.startswith("-") else text
    if isinstance(n, (Var, Param)):
        return n.name
    if isinstance(n, Neg):
        return f"(-{_unparse(n.arg)})"
    if isinstance(n, BinOp):
        return f"({_unparse(n.left)} {n.op} {_unparse(n.right)})"
    if isinstance(n, Pow):
        return f"({_unparse(n.base)}^{n.exponent})"
    if isinstance(n, Func):
        return f"{n.name}({_unparse(n.arg)})"
    raise TypeError(f"unknown node {n!r}")


def unparse(ast: ExpressionAst) -> str:
    """Fully parenthesised source that parses back to an equivalent tree."""
    return _unparse(ast.root)


def _walk(n: Node):
    yield n
    if isinstance(n, (Neg, Func)):
        yield from _walk(n.arg)
    elif isinstance(n, BinOp):
        yield from _walk(n.left)
        yield from _walk(n.right)
    elif isinstance(n, Pow):
        yield from _walk(n.base)


def _param_names(n: Node) -> set[str]:
    return {m.name for m in _walk(n) if isinstance(m, Param)}


def _var_names(n: Node) -> set[str]:
    return {m.name for m in _walk(n) if isinstance(m, Var)}


def is_reflection_symmetric(
    ast: ExpressionAst,
    samples: int = 100,
    box: float = 2.0,
    period: float | None = None,
    seed: int = 0,
    rtol: float = 1e-12,
) -> bool:
    """Numerically decide whether f(t, u, -p) == f(t, u, p) on random samples."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, period if period else 1.0, samples)
    u = rng.uniform(-box, box, samples)
    p = rng.uniform(-box, box, samples)
    a, b = ast(t, u, p), ast(t, u, -p)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= rtol * scale))


def is_autonomous(ast: ExpressionAst) -> bool:
    return not ast.depends_on("t")
