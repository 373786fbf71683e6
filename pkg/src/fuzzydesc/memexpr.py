"""Membership-function expressions over a subsystem's local state.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | "+" unary | power ;
    power   = primary [ "^" unary ] ;          (* right associative *)
    primary = number | "pi" | var | func "(" expr ")" | "(" expr ")" ;
    var     = "x" digit { digit } ;            (* x1 .. xN, 1-based *)
    func    = "sin" | "cos" | "tan" | "exp" | "sqrt" | "abs" ;
    number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ]
            | "." digit { digit } [ exponent ] ;

Unary minus binds looser than ``^``, so ``-x1^2`` is ``-(x1^2)``.
Error positions are 1-based character offsets into the source.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ArityError",
    "EvaluationError",
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "MembershipExpr",
    "parse",
    "evaluate",
    "eval_time_derivative",
    "to_source",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class ArityError(ExprError):
    def __init__(self, name: str, got: int, position: int):
        super().__init__(f"function {name!r} takes 1 argument, got {got} (position {position})")
        self.name = name
        self.position = position


class EvaluationError(ExprError, ArithmeticError):
    pass


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Const:
    name: str  # only "pi"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


def _sqrt(a: float) -> float:
    if a < 0:
        raise EvaluationError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


def _exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError as exc:
        raise EvaluationError(f"exp overflow at {a!r}") from exc


_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": _exp,
    "sqrt": _sqrt,
    "abs": abs,
}


def _power(a: float, b: float) -> float:
    if b == int(b) and abs(b) <= 64:
        n = int(b)
        acc = 1.0
        for _ in range(abs(n)):
            acc *= a
        if n < 0:
            if acc == 0.0:
                raise EvaluationError("zero raised to a negative power")
            acc = 1.0 / acc
        return acc
    if a < 0:
        raise EvaluationError(f"negative base {a!r} with non-integer exponent {b!r}")
    if a == 0:
        if b < 0:
            raise EvaluationError("zero raised to a negative power")
        return 0.0
    return _exp(b * math.log(a))


def _divide(a: float, b: float) -> float:
    if b == 0:
        raise EvaluationError("division by zero")
    return a / b


_BINOPS: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
    "^": _power,
}


# -- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int  # 1-based


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), i + 1))
        i = m.end()
    toks.append(_Tok("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, src: str, state_dim: int):
        self.toks = _tokenize(src)
        self.i = 0
        self.state_dim = state_dim

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text:
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.tok.pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            self.advance()
            if t.text in _FUNCS:
                self.expect("(")
                if self.tok.text == ")":
                    raise ArityError(t.text, 0, t.pos)
                arg = self.expr()
                nargs = 1
                while self.tok.text == ",":
                    self.advance()
                    self.expr()
                    nargs += 1
                if nargs != 1:
                    raise ArityError(t.text, nargs, t.pos)
                self.expect(")")
                return Call(t.text, arg)
            if t.text == "pi":
                return Const("pi")
            m = re.fullmatch(r"x([1-9]\d*)", t.text)
            if m and int(m.group(1)) <= self.state_dim:
                return Var(int(m.group(1)) - 1)
            raise UnknownIdentifierError(t.text, t.pos)
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.pos)


def _compile(node: Node) -> Callable[[Sequence[float]], float]:
    if isinstance(node, Num):
        v = node.value
        return lambda x: v
    if isinstance(node, Const):
        return lambda x: math.pi
    if isinstance(node, Var):
        k = node.index
        return lambda x: float(x[k])
    if isinstance(node, Neg):
        f = _compile(node.operand)
        return lambda x: -f(x)
    if isinstance(node, Call):
        fn = _FUNCS[node.func]
        g = _compile(node.arg)
        return lambda x: fn(g(x))
    if isinstance(node, BinOp):
        op = _BINOPS[node.op]
        lf, rf = _compile(node.left), _compile(node.right)
        return lambda x: op(lf(x), rf(x))
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class MembershipExpr:
    """A parsed expression bound to a state dimension."""

    source: str
    ast: Node
    state_dim: int

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.ast))

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate(self, x)

    def is_constant(self) -> bool:
        return not _uses_state(self.ast)


def _uses_state(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _uses_state(node.operand)
    if isinstance(node, Call):
        return _uses_state(node.arg)
    if isinstance(node, BinOp):
        return _uses_state(node.left) or _uses_state(node.right)
    return False


def parse(source: str, state_dim: int) -> MembershipExpr:
    """Parse ``source``; variables ``x1..x{state_dim}`` are allowed."""
    return MembershipExpr(source, _Parser(source, state_dim).parse(), state_dim)


def evaluate(e: MembershipExpr, x: Sequence[float]) -> float:
    if len(x) != e.state_dim:
        raise ValueError(f"state has dimension {len(x)}, expression expects {e.state_dim}")
    try:
        return e._fn(x)
    except OverflowError as exc:
        raise EvaluationError(str(exc)) from exc
    except ValueError as exc:  # math domain errors, e.g. tan overflow
        if isinstance(exc, ExprError):
            raise
        raise EvaluationError(str(exc)) from exc


def eval_time_derivative(e: MembershipExpr, x: Sequence[float], xdot: Sequence[float],
                         h: float = 1e-6) -> float:
    """Central difference of ``e`` along the flow direction ``xdot``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    xp = [xi + h * di for xi, di in zip(x, xdot)]
    xm = [xi - h * di for xi, di in zip(x, xdot)]
    return (evaluate(e, xp) - evaluate(e, xm)) / (2.0 * h)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_source(node: Node | MembershipExpr) -> str:
    """Fully parenthesized source text that reparses to the same tree."""
    if isinstance(node, MembershipExpr):
        node = node.ast
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)}{node.op}{to_source(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")
