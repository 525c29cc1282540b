"""Arithmetic expression language for chart, metric and foliation definitions.

Grammar::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is right
associative.  Exponents must be constant: they may name parameters but not
active coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from . import autodiff as ad


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(ExprError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, BinOp, Neg, Call]

FUNCTIONS = {
    "sin": (1, ad.sin),
    "cos": (1, ad.cos),
    "tan": (1, ad.tan),
    "ln": (1, ad.ln),
    "exp": (1, ad.exp),
    "sqrt": (1, ad.sqrt),
    "abs": (1, ad.absolute),
    "pow": (2, None),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    raw = source.encode("utf-8")
    tokens = []
    pos = 0
    text = source
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", len(text[:start].encode("utf-8")))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", off)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ExprSyntaxError(f"{text} takes {arity} argument(s), got {len(args)}", off)
                return Call(text, tuple(args))
            return Var(text)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", off)


def parse(source: str) -> Expr:
    if source.strip() == "":
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(source)
    node = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {text!r}", off)
    return node


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Num):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return set().union(*(free_vars(a) for a in e.args))


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_string(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_string(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-({to_string(e.operand)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_string(a) for a in e.args)})"
    return f"({to_string(e.left)} {e.op} {to_string(e.right)})"


def _as_constant(x, node: Expr) -> float:
    if isinstance(x, ad.Jet):
        if x.order >= 1 and any(g != 0 for g in x.grad):
            raise ExprEvalError(f"exponent depends on a coordinate: {to_string(node)}")
        return float(x.value)
    return float(x)


def eval_expr(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` over floats or :class:`~killingforms.autodiff.Jet` values."""
    try:
        return _eval(e, env)
    except ad.DomainError as exc:
        raise ExprEvalError(str(exc)) from exc


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        if e.op == "^":
            return _pow(a, _as_constant(_eval(e.right, env), e.right), e)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if ad.value_of(b) == 0:
            raise ExprEvalError(f"division by zero in {to_string(e)}")
        return a / b
    args = [_eval(a, env) for a in e.args]
    if e.func == "pow":
        return _pow(args[0], _as_constant(args[1], e.args[1]), e)
    try:
        return FUNCTIONS[e.func][1](args[0])
    except (ad.DomainError, ValueError) as exc:
        raise ExprEvalError(f"{exc} in {to_string(e)}") from exc


def _pow(base, exponent: float, node: Expr):
    try:
        return ad.power(base, exponent)
    except (ad.DomainError, ValueError) as exc:
        raise ExprEvalError(f"{exc} in {to_string(node)}") from exc


def _powers(e: Expr):
    """Yield (base, exponent) of every ``^`` and ``pow`` node."""
    if isinstance(e, BinOp):
        if e.op == "^":
            yield e.left, e.right
        yield from _powers(e.left)
        yield from _powers(e.right)
    elif isinstance(e, Neg):
        yield from _powers(e.operand)
    elif isinstance(e, Call):
        if e.func == "pow":
            yield e.args[0], e.args[1]
        for a in e.args:
            yield from _powers(a)


def compile_expr(source: str | Expr, names: list[str], params: Mapping[str, float] | None = None):
    """Parse once and return ``f(coords) -> scalar`` binding ``names`` positionally."""
    e = parse(source) if isinstance(source, str) else source
    params = dict(params or {})
    unknown = free_vars(e) - set(names) - set(params)
    if unknown:
        raise ExprError(f"unknown variable(s): {', '.join(sorted(unknown))}")
    for base, exponent in _powers(e):
        if free_vars(exponent) & set(names):
            raise ExprError(f"exponent must not depend on coordinates: {to_string(exponent)}")

    def f(coords):
        env = dict(params)
        env.update(zip(names, coords))
        return eval_expr(e, env)

    f.expr = e
    return f
