"""Arithmetic expressions over phase-space coordinates.

Expressions are written with variables ``x0, x1, ...`` and parsed by a small
recursive-descent parser::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := number | 'x'digits | func '(' expr ')' | '(' expr ')'

``^`` is right-associative and ``-x0^2`` reads as ``-(x0^2)``.  Implicit
multiplication is rejected.  Trees can be evaluated, differentiated
symbolically and flattened into a postfix program for the compiled flow
kernel.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Expr",
    "ParseError",
    "EvaluationError",
    "parse",
    "evaluate",
    "vectorize",
    "differentiate",
    "divergence",
    "to_string",
    "max_var_index",
    "compile_program",
    "Program",
    "UNARY_FUNCS",
]

UNARY_FUNCS = ("sin", "cos", "exp", "sqrt", "abs", "log", "sign")
BINARY_OPS = ("+", "-", "*", "/", "^")


class ParseError(ValueError):
    """Malformed expression text; ``position`` is a byte offset into the input."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.message = message
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class EvaluationError(ArithmeticError):
    """Raised when an expression has no real value at the requested point."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of BINARY_OPS
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.advance()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if text == ")":
                raise ParseError("unbalanced ')'", pos, self.text)
            raise ParseError(f"unexpected token {text!r}", pos, self.text)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.factor())
        node = self.base()
        if self.peek()[1] == "^":
            self.advance()
            node = Binary("^", node, self.factor())
        return node

    def base(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            node: Expr = Const(float(text))
        elif kind == "var":
            index = int(text[1:])
            if index >= self.dimension:
                raise ParseError(
                    f"variable {text} out of range for dimension {self.dimension}", pos, self.text
                )
            node = Var(index)
        elif kind == "name":
            if text not in UNARY_FUNCS:
                raise ParseError(f"unknown identifier {text!r}", pos, self.text)
            if self.peek()[1] != "(":
                raise ParseError(f"function {text!r} expects one parenthesized argument", pos, self.text)
            self.advance()
            arg = self.expr()
            if self.peek()[1] == ",":
                raise ParseError(f"function {text!r} takes exactly one argument", self.peek()[2], self.text)
            self.expect(")")
            node = Unary(text, arg)
        elif text == "(":
            node = self.expr()
            if self.peek()[0] == "end":
                raise ParseError("unbalanced '('", pos, self.text)
            self.expect(")")
        elif kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        else:
            raise ParseError(f"unexpected token {text!r}", pos, self.text)
        # "2x0", "3(x1)" and "x0 x1" are implicit products and are rejected
        nxt_kind, nxt_text, nxt_pos = self.peek()
        if nxt_kind in ("num", "var", "name") or nxt_text == "(":
            raise ParseError("implicit multiplication is not allowed", nxt_pos, self.text)
        return node


def parse(text: str, dimension: int) -> Expr:
    """Parse ``text`` into an expression tree over ``dimension`` variables."""
    if dimension < 1:
        raise ValueError("dimension must be positive")
    return _Parser(text, dimension).parse()


# --------------------------------------------------------------------------
# evaluation


def _apply_unary(op: str, a: float) -> float:
    if op == "neg":
        return -a
    if op == "sin":
        return math.sin(a)
    if op == "cos":
        return math.cos(a)
    if op == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise EvaluationError("exp overflow") from None
    if op == "sqrt":
        if a < 0.0:
            raise EvaluationError("sqrt of a negative number")
        return math.sqrt(a)
    if op == "abs":
        return abs(a)
    if op == "log":
        if a <= 0.0:
            raise EvaluationError("log of a non-positive number")
        return math.log(a)
    if op == "sign":
        return (a > 0.0) - (a < 0.0)
    raise ValueError(f"unknown unary operator {op!r}")


def _apply_binary(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise EvaluationError("division by zero")
        return a / b
    if op == "^":
        if a < 0.0 and b != math.floor(b):
            raise EvaluationError("non-integer power of a negative number")
        if a == 0.0 and b < 0.0:
            raise EvaluationError("negative power of zero")
        try:
            return math.pow(a, b)
        except OverflowError:
            raise EvaluationError("power overflow") from None
    raise ValueError(f"unknown binary operator {op!r}")


def evaluate(node: Expr, x: Sequence[float]) -> float:
    """Evaluate ``node`` at the point ``x``.

    Raises :class:`EvaluationError` where the expression has no finite real
    value (division by zero, square root or logarithm out of domain, ...).
    """
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Unary):
        value = _apply_unary(node.op, evaluate(node.arg, x))
    else:
        value = _apply_binary(node.op, evaluate(node.left, x), evaluate(node.right, x))
    if not math.isfinite(value):
        raise EvaluationError("non-finite intermediate value")
    return value


_NP_UNARY = {
    "neg": np.negative, "sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
    "abs": np.abs, "log": np.log, "sign": np.sign,
}
_NP_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


def vectorize(node: Expr):
    """Numpy evaluator ``X -> values`` for ``X`` of shape ``(N, ...)``.

    Out-of-domain inputs give ``nan``/``inf`` instead of raising; intended for
    batch work such as independent reference integrations.
    """
    if isinstance(node, Const):
        v = node.value
        return lambda X: np.full(np.shape(X)[1:], v)
    if isinstance(node, Var):
        i = node.index
        return lambda X: np.asarray(X[i], dtype=float)
    if isinstance(node, Unary):
        fn, arg = _NP_UNARY[node.op], vectorize(node.arg)
        return lambda X: fn(arg(X))
    fn, left, right = _NP_BINARY[node.op], vectorize(node.left), vectorize(node.right)
    return lambda X: fn(left(X), right(X))


# --------------------------------------------------------------------------
# printing


def _fmt_const(value: float) -> str:
    text = repr(float(value) + 0.0)  # -0.0 prints as 0.0
    return f"(-{text[1:]})" if value < 0 else text


def to_string(node: Expr) -> str:
    """Fully parenthesized text that parses back to an equivalent tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_string(node.arg)})"
        return f"{node.op}({to_string(node.arg)})"
    return f"({to_string(node.left)} {node.op} {to_string(node.right)})"


def max_var_index(node: Expr) -> int:
    """Largest variable index in the tree, or -1 for constant expressions."""
    if isinstance(node, Const):
        return -1
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Unary):
        return max_var_index(node.arg)
    return max(max_var_index(node.left), max_var_index(node.right))


def _depends_on(node: Expr, var: int) -> bool:
    if isinstance(node, Const):
        return False
    if isinstance(node, Var):
        return node.index == var
    if isinstance(node, Unary):
        return _depends_on(node.arg, var)
    return _depends_on(node.left, var) or _depends_on(node.right, var)


# --------------------------------------------------------------------------
# differentiation

ZERO = Const(0.0)
ONE = Const(1.0)


def _is(node: Expr, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Binary("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def differentiate(node: Expr, var: int) -> Expr:
    """Exact partial derivative of ``node`` with respect to ``x{var}``.

    ``abs`` differentiates to ``sign`` (valid away from the kink) and ``sign``
    to zero.  Only trivial 0/1 folding is applied to the result.
    """
    if var < 0:
        raise ValueError("variable index must be non-negative")
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == var else ZERO
    if isinstance(node, Unary):
        a = node.arg
        da = differentiate(a, var)
        if _is(da, 0.0):
            return ZERO
        op = node.op
        if op == "neg":
            return _neg(da)
        if op == "sin":
            return _mul(Unary("cos", a), da)
        if op == "cos":
            return _neg(_mul(Unary("sin", a), da))
        if op == "exp":
            return _mul(node, da)
        if op == "sqrt":
            return _div(da, _mul(Const(2.0), node))
        if op == "abs":
            return _mul(Unary("sign", a), da)
        if op == "log":
            return _div(da, a)
        if op == "sign":
            return ZERO
        raise ValueError(f"unknown unary operator {op!r}")

    a, b = node.left, node.right
    da, db = differentiate(a, var), differentiate(b, var)
    op = node.op
    if op == "+":
        return _add(da, db)
    if op == "-":
        return _sub(da, db)
    if op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if op == "/":
        return _div(_sub(_mul(da, b), _mul(a, db)), _mul(b, b))
    if op == "^":
        if not _depends_on(b, var):
            if _is(da, 0.0):
                return ZERO
            return _mul(_mul(b, Binary("^", a, _sub(b, ONE))), da)
        # d(a^b) = a^b * (b' log a + b a'/a)
        return _mul(node, _add(_mul(db, Unary("log", a)), _div(_mul(b, da), a)))
    raise ValueError(f"unknown binary operator {op!r}")


def divergence(components: Sequence[Expr]) -> Expr:
    """Symbolic divergence of a vector field given component-wise."""
    result: Expr = ZERO
    for i, comp in enumerate(components):
        result = _add(result, differentiate(comp, i))
    return result


# --------------------------------------------------------------------------
# postfix programs for the compiled kernel

OPCODES = {
    "const": 0,
    "var": 1,
    "neg": 2,
    "sin": 3,
    "cos": 4,
    "exp": 5,
    "sqrt": 6,
    "abs": 7,
    "log": 8,
    "sign": 9,
    "+": 10,
    "-": 11,
    "*": 12,
    "/": 13,
    "^": 14,
}


@dataclass(frozen=True)
class Program:
    """Several expressions flattened into one postfix instruction stream.

    Output ``k`` is computed by ``ops[starts[k]:starts[k+1]]``.
    """

    ops: np.ndarray  # int32
    args: np.ndarray  # int32
    consts: np.ndarray  # float64
    starts: np.ndarray  # int32, len = n_outputs + 1
    stack_size: int

    @property
    def n_outputs(self) -> int:
        return len(self.starts) - 1


def _emit(node: Expr, ops: list, args: list, consts: list) -> int:
    """Append postfix code for ``node``; return the stack depth it needs."""
    if isinstance(node, Const):
        ops.append(OPCODES["const"])
        args.append(len(consts))
        consts.append(node.value)
        return 1
    if isinstance(node, Var):
        ops.append(OPCODES["var"])
        args.append(node.index)
        return 1
    if isinstance(node, Unary):
        depth = _emit(node.arg, ops, args, consts)
        ops.append(OPCODES[node.op])
        args.append(0)
        return depth
    left = _emit(node.left, ops, args, consts)
    right = _emit(node.right, ops, args, consts)
    ops.append(OPCODES[node.op])
    args.append(0)
    return max(left, right + 1)


def compile_program(nodes: Sequence[Expr]) -> Program:
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []
    starts = [0]
    depth = 1
    for node in nodes:
        depth = max(depth, _emit(node, ops, args, consts))
        starts.append(len(ops))
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts if consts else [0.0], dtype=np.float64),
        starts=np.asarray(starts, dtype=np.int32),
        stack_size=depth,
    )
