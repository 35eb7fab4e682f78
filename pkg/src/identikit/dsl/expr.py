"""Expression trees: parsing, printing, evaluation, differentiation, code generation.

Grammar (lowest to highest binding)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

So ``-x^2`` is ``-(x^2)`` and ``a^b^c`` is ``a^(b^c)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union

from ..errors import DomainError, UnsupportedDerivative, ValidationError

FUNCTIONS = {"sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1, "pow": 2}


class ExprSyntaxError(ValidationError):
    def __init__(self, msg: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{msg} at position {pos}" + (f" in {text!r}" if text else ""))


class UnknownIdentifier(ValidationError):
    pass


# ---------------------------------------------------------------- nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

ZERO, ONE, TWO = Num(0.0), Num(1.0), Num(2.0)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


def _tokenize(text: str):
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos, self.text)

    def fail(self, msg):
        raise ExprSyntaxError(msg, self.peek()[2], self.text)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            v = float(val)
            if not math.isfinite(v):
                raise ExprSyntaxError(f"number {val} out of range", pos, self.text)
            return Num(v)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", pos, self.text)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}",
                                          pos, self.text)
                return Call(val, tuple(args))
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} used without arguments", pos, self.text)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos, self.text)


@lru_cache(maxsize=4096)
def parse(text: str) -> Expr:
    """Parse a single expression; raises ExprSyntaxError with the offending position."""
    if not isinstance(text, str):
        raise ValidationError("expression must be a string")
    p = _Parser(text)
    node = p.expr()
    if p.peek()[0] != "end":
        p.fail(f"unexpected {p.peek()[1]!r}")
    return node


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Num) and (e.value < 0 or math.copysign(1, e.value) < 0)):
        return 3
    return 5


def to_string(e: Expr) -> str:
    """Print with the fewest parentheses that reparse to the same tree."""

    def wrap(sub, need):
        s = to_string(sub)
        return f"({s})" if _prec(sub) < need else s

    if isinstance(e, Num):
        if e.value < 0 or math.copysign(1, e.value) < 0:
            return "-" + _fmt_num(-e.value)
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, 3)
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(to_string(a) for a in e.args)})"
    p = _PREC[e.op]
    if e.op == "^":
        return f"{wrap(e.left, 5)}^{wrap(e.right, 3)}"
    sep = f" {e.op} " if p == 1 else e.op
    return f"{wrap(e.left, p)}{sep}{wrap(e.right, p + 1)}"


# ---------------------------------------------------------------- queries


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables(e.arg)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return set().union(*(variables(a) for a in e.args))


def is_const(e: Expr) -> bool:
    return not variables(e)


# ---------------------------------------------------------------- evaluation helpers


def _is_int(v: float) -> bool:
    return float(v).is_integer()


def pow_const(b: float, c: float) -> float:
    """b^c for a literal exponent: integer exponents allow any sign of b."""
    if _is_int(c):
        if b == 0.0 and c < 0:
            raise DomainError("0 raised to a negative power")
        try:
            return b ** int(c)
        except OverflowError as exc:
            raise DomainError(f"overflow in {b}^{c}") from exc
    if not b > 0:
        raise DomainError(f"non-integer power {c} of nonpositive base {b}")
    return math.exp(c * math.log(b))


def pow_var(b: float, c: float) -> float:
    """b^c for a non-literal exponent, defined as exp(c log b) on b > 0."""
    if not b > 0:
        raise DomainError(f"power with variable exponent needs a positive base, got {b}")
    return safe_exp(c * math.log(b))


def safe_log(v: float) -> float:
    if not v > 0:
        raise DomainError(f"log of nonpositive value {v}")
    return math.log(v)


def safe_sqrt(v: float) -> float:
    if v < 0 or v != v:
        raise DomainError(f"sqrt of negative value {v}")
    return math.sqrt(v)


def safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError as exc:
        raise DomainError(f"exp overflow at {v}") from exc


def safe_div(a: float, b: float) -> float:
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


_CALLS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": safe_exp, "log": safe_log,
          "sqrt": safe_sqrt}


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision; domain violations raise DomainError."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnknownIdentifier(f"unbound identifier {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        vals = [evaluate(a, env) for a in e.args]
        if e.fn == "pow":
            return _eval_pow(e.args[1], vals[0], vals[1])
        return _CALLS[e.fn](vals[0])
    a = evaluate(e.left, env)
    b = evaluate(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return safe_div(a, b)
    return _eval_pow(e.right, a, b)


def _eval_pow(exponent: Expr, b: float, c: float) -> float:
    if isinstance(exponent, Num) or (isinstance(exponent, Neg) and isinstance(exponent.arg, Num)):
        return pow_const(b, c)
    return pow_var(b, c)


# ---------------------------------------------------------------- simplification


def _num(v: float) -> Num:
    return Num(float(v))


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Num) and e.value == v


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    return BinOp("-", a, b)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return _num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(b, c):
    if _is(c, 1):
        return b
    if _is(c, 0):
        return ONE
    return BinOp("^", b, c)


def call(fn, *args):
    return Call(fn, tuple(args))


# ---------------------------------------------------------------- differentiation


def differentiate(e: Expr, var: str, rewrite: bool = True) -> Expr:
    """Symbolic partial derivative with respect to ``var``.

    A power whose base and exponent both depend on ``var`` is rewritten as
    exp(c log b) when ``rewrite`` is true; otherwise UnsupportedDerivative.
    """
    if var not in variables(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var, rewrite))
    if isinstance(e, Call):
        if e.fn == "pow":
            return _d_pow(e.args[0], e.args[1], var, rewrite)
        a = e.args[0]
        da = differentiate(a, var, rewrite)
        if e.fn == "sin":
            outer = call("cos", a)
        elif e.fn == "cos":
            outer = neg(call("sin", a))
        elif e.fn == "tan":
            outer = add(ONE, power(call("tan", a), TWO))
        elif e.fn == "exp":
            outer = e
        elif e.fn == "log":
            return div(da, a)
        else:  # sqrt
            return div(da, mul(TWO, e))
        return mul(outer, da)
    l, r = e.left, e.right
    if e.op == "+":
        return add(differentiate(l, var, rewrite), differentiate(r, var, rewrite))
    if e.op == "-":
        return sub(differentiate(l, var, rewrite), differentiate(r, var, rewrite))
    if e.op == "*":
        return add(mul(differentiate(l, var, rewrite), r), mul(l, differentiate(r, var, rewrite)))
    if e.op == "/":
        dl, dr = differentiate(l, var, rewrite), differentiate(r, var, rewrite)
        if _is(dr, 0):
            return div(dl, r)
        return div(sub(mul(dl, r), mul(l, dr)), power(r, TWO))
    return _d_pow(l, r, var, rewrite)


def _d_pow(b: Expr, c: Expr, var: str, rewrite: bool) -> Expr:
    b_dep, c_dep = var in variables(b), var in variables(c)
    if b_dep and not c_dep:
        # c b^(c-1) b'
        if isinstance(c, Num):
            lowered = _num(c.value - 1)
        else:
            lowered = sub(c, ONE)
        return mul(mul(c, power(b, lowered)), differentiate(b, var, rewrite))
    if c_dep and not b_dep:
        return mul(mul(BinOp("^", b, c), call("log", b)), differentiate(c, var, rewrite))
    if not rewrite:
        raise UnsupportedDerivative(f"power with base and exponent depending on {var!r}: "
                                    f"{to_string(BinOp('^', b, c))}")
    return differentiate(call("exp", mul(c, call("log", b))), var, rewrite)


# ---------------------------------------------------------------- code generation


def to_python(e: Expr, names: Mapping[str, str]) -> str:
    """Python source for ``e``; ``names`` maps identifiers to local variable names."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        try:
            return names[e.name]
        except KeyError:
            raise UnknownIdentifier(f"unknown identifier {e.name!r}") from None
    if isinstance(e, Neg):
        return f"(-{to_python(e.arg, names)})"
    if isinstance(e, Call):
        args = [to_python(a, names) for a in e.args]
        if e.fn == "pow":
            return _py_pow(e.args[1], args[0], args[1])
        fn = {"sin": "_sin", "cos": "_cos", "tan": "_tan", "exp": "_exp", "log": "_log",
              "sqrt": "_sqrt"}[e.fn]
        return f"{fn}({args[0]})"
    a, b = to_python(e.left, names), to_python(e.right, names)
    if e.op == "/":
        return f"_div({a}, {b})"
    if e.op == "^":
        return _py_pow(e.right, a, b)
    return f"({a} {e.op} {b})"


def _py_pow(exponent, a, b):
    if isinstance(exponent, Num) or (isinstance(exponent, Neg) and isinstance(exponent.arg, Num)):
        return f"_powc({a}, {b})"
    return f"_powv({a}, {b})"


CODEGEN_NAMESPACE = {"_sin": math.sin, "_cos": math.cos, "_tan": math.tan, "_exp": safe_exp,
                     "_log": safe_log, "_sqrt": safe_sqrt, "_div": safe_div, "_powc": pow_const,
                     "_powv": pow_var}
