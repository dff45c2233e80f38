"""Expression mini-language for device characteristics.

Grammar (left-associative binary operators, right-associative power):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Identifiers resolve to the circuit variables ``q``, ``phi``, ``i``, ``v``,
``t``, the constant ``pi``, the functions ``sin``, ``cos``, ``exp``, or
names bound through the ``constants`` argument of :func:`parse_expr`.
Power exponents must be constant expressions.

Trees are immutable.  Evaluation is plain recursion; first derivatives are
propagated in forward mode alongside the value, so partials are exact up to
rounding.  A symbolic derivative (:meth:`Expr.diff`) and variable
substitution (:meth:`Expr.subst`) are provided for composing characteristics
such as the hybrid memristor maps.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import EvalDomainError, ExprError

__all__ = [
    "Expr", "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Fun",
    "VARIABLES", "parse_expr",
]

VARIABLES = ("q", "phi", "i", "v", "t")

# Time integrals of charge and flux belong to differential-order-two
# devices, which this package does not model.
_SECOND_ORDER_VARS = ("sigma", "rho")

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base class for expression nodes."""

    def eval(self, env):
        """Value of the expression; ``env`` maps variable names to floats."""
        raise NotImplementedError

    def dual(self, env, wrt):
        """Forward-mode evaluation: returns ``(value, partials)`` where
        ``partials`` is aligned with the variable names in ``wrt``."""
        raise NotImplementedError

    def diff(self, var):
        """Symbolic derivative with respect to ``var``."""
        raise NotImplementedError

    def subst(self, mapping):
        """Replace variables by subtrees; ``mapping`` maps names to Expr."""
        raise NotImplementedError

    def variables(self):
        """Set of variable names appearing in the tree."""
        raise NotImplementedError

    def fmt(self, prec=0):
        raise NotImplementedError

    def __str__(self):
        return self.fmt()


def _num(x):
    return repr(float(x))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def eval(self, env):
        return self.value

    def dual(self, env, wrt):
        return self.value, (0.0,) * len(wrt)

    def diff(self, var):
        return Const(0.0)

    def subst(self, mapping):
        return self

    def variables(self):
        return frozenset()

    def fmt(self, prec=0):
        if self.value < 0:
            text = f"-{_num(-self.value)}"
            return f"({text})" if prec > _PREC_UNARY else text
        return _num(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvalDomainError(f"unbound variable '{self.name}'") from None

    def dual(self, env, wrt):
        grad = tuple(1.0 if w == self.name else 0.0 for w in wrt)
        return self.eval(env), grad

    def diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def subst(self, mapping):
        return mapping.get(self.name, self)

    def variables(self):
        return frozenset((self.name,))

    def fmt(self, prec=0):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, env):
        return -self.arg.eval(env)

    def dual(self, env, wrt):
        value, grad = self.arg.dual(env, wrt)
        return -value, tuple(-g for g in grad)

    def diff(self, var):
        return _neg(self.arg.diff(var))

    def subst(self, mapping):
        return Neg(self.arg.subst(mapping))

    def variables(self):
        return self.arg.variables()

    def fmt(self, prec=0):
        text = f"-{self.arg.fmt(_PREC_UNARY)}"
        return f"({text})" if prec > _PREC_UNARY else text


@dataclass(frozen=True)
class Add(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return self.lhs.eval(env) + self.rhs.eval(env)

    def dual(self, env, wrt):
        va, ga = self.lhs.dual(env, wrt)
        vb, gb = self.rhs.dual(env, wrt)
        return va + vb, tuple(a + b for a, b in zip(ga, gb))

    def diff(self, var):
        return _add(self.lhs.diff(var), self.rhs.diff(var))

    def subst(self, mapping):
        return Add(self.lhs.subst(mapping), self.rhs.subst(mapping))

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def fmt(self, prec=0):
        text = f"{self.lhs.fmt(_PREC_ADD)} + {self.rhs.fmt(_PREC_ADD + 1)}"
        return f"({text})" if prec > _PREC_ADD else text


@dataclass(frozen=True)
class Sub(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return self.lhs.eval(env) - self.rhs.eval(env)

    def dual(self, env, wrt):
        va, ga = self.lhs.dual(env, wrt)
        vb, gb = self.rhs.dual(env, wrt)
        return va - vb, tuple(a - b for a, b in zip(ga, gb))

    def diff(self, var):
        return _sub(self.lhs.diff(var), self.rhs.diff(var))

    def subst(self, mapping):
        return Sub(self.lhs.subst(mapping), self.rhs.subst(mapping))

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def fmt(self, prec=0):
        text = f"{self.lhs.fmt(_PREC_ADD)} - {self.rhs.fmt(_PREC_ADD + 1)}"
        return f"({text})" if prec > _PREC_ADD else text


@dataclass(frozen=True)
class Mul(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return self.lhs.eval(env) * self.rhs.eval(env)

    def dual(self, env, wrt):
        va, ga = self.lhs.dual(env, wrt)
        vb, gb = self.rhs.dual(env, wrt)
        return va * vb, tuple(a * vb + va * b for a, b in zip(ga, gb))

    def diff(self, var):
        return _add(_mul(self.lhs.diff(var), self.rhs),
                    _mul(self.lhs, self.rhs.diff(var)))

    def subst(self, mapping):
        return Mul(self.lhs.subst(mapping), self.rhs.subst(mapping))

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def fmt(self, prec=0):
        text = f"{self.lhs.fmt(_PREC_MUL)}*{self.rhs.fmt(_PREC_MUL + 1)}"
        return f"({text})" if prec > _PREC_MUL else text


@dataclass(frozen=True)
class Div(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        denom = self.rhs.eval(env)
        if denom == 0.0:
            raise EvalDomainError(f"division by zero in '{self}'")
        return self.lhs.eval(env) / denom

    def dual(self, env, wrt):
        va, ga = self.lhs.dual(env, wrt)
        vb, gb = self.rhs.dual(env, wrt)
        if vb == 0.0:
            raise EvalDomainError(f"division by zero in '{self}'")
        value = va / vb
        return value, tuple((a - value * b) / vb for a, b in zip(ga, gb))

    def diff(self, var):
        num = _sub(_mul(self.lhs.diff(var), self.rhs),
                   _mul(self.lhs, self.rhs.diff(var)))
        return Div(num, Mul(self.rhs, self.rhs))

    def subst(self, mapping):
        return Div(self.lhs.subst(mapping), self.rhs.subst(mapping))

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def fmt(self, prec=0):
        text = f"{self.lhs.fmt(_PREC_MUL)}/{self.rhs.fmt(_PREC_MUL + 1)}"
        return f"({text})" if prec > _PREC_MUL else text


def _pow_value(base, exponent, origin):
    if base < 0.0 and exponent != round(exponent):
        raise EvalDomainError(
            f"fractional power of negative base in '{origin}'")
    if base == 0.0 and exponent < 0.0:
        raise EvalDomainError(f"zero raised to negative power in '{origin}'")
    try:
        return base ** exponent
    except OverflowError:
        raise EvalDomainError(f"overflow in '{origin}'") from None


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float

    def eval(self, env):
        return _pow_value(self.base.eval(env), self.exponent, self)

    def dual(self, env, wrt):
        vb, gb = self.base.dual(env, wrt)
        value = _pow_value(vb, self.exponent, self)
        if self.exponent == 0.0:
            return value, (0.0,) * len(wrt)
        factor = self.exponent * _pow_value(vb, self.exponent - 1.0, self)
        return value, tuple(factor * g for g in gb)

    def diff(self, var):
        if self.exponent == 0.0:
            return Const(0.0)
        inner = self.base.diff(var)
        return _mul(_mul(Const(self.exponent),
                         Pow(self.base, self.exponent - 1.0)), inner)

    def subst(self, mapping):
        return Pow(self.base.subst(mapping), self.exponent)

    def variables(self):
        return self.base.variables()

    def fmt(self, prec=0):
        text = f"{self.base.fmt(_PREC_ATOM)}^{_num(self.exponent)}"
        return f"({text})" if prec > _PREC_POW else text


_FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


@dataclass(frozen=True)
class Fun(Expr):
    name: str
    arg: Expr

    def eval(self, env):
        try:
            return _FUNCTIONS[self.name](self.arg.eval(env))
        except OverflowError:
            raise EvalDomainError(f"overflow in '{self}'") from None

    def dual(self, env, wrt):
        va, ga = self.arg.dual(env, wrt)
        try:
            value = _FUNCTIONS[self.name](va)
        except OverflowError:
            raise EvalDomainError(f"overflow in '{self}'") from None
        if self.name == "sin":
            factor = math.cos(va)
        elif self.name == "cos":
            factor = -math.sin(va)
        else:
            factor = value
        return value, tuple(factor * g for g in ga)

    def diff(self, var):
        inner = self.arg.diff(var)
        if self.name == "sin":
            outer = Fun("cos", self.arg)
        elif self.name == "cos":
            outer = _neg(Fun("sin", self.arg))
        else:
            outer = self
        return _mul(outer, inner)

    def subst(self, mapping):
        return Fun(self.name, self.arg.subst(mapping))

    def variables(self):
        return self.arg.variables()

    def fmt(self, prec=0):
        return f"{self.name}({self.arg.fmt(0)})"


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Mul(a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r"|(?P<ws>\s+)"
    r"|(?P<bad>.)"
)


def _tokenize(text):
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        if m.lastgroup == "ws":
            continue
        if m.lastgroup == "bad":
            raise ExprError(f"unexpected character '{m.group()}'", m.start())
        tokens.append((m.lastgroup, m.group(), m.start()))
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, constants):
        self.tokens = tokens
        self.pos = 0
        self.constants = constants

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept_op(self, *ops):
        kind, text, _ = self.peek()
        if kind == "op" and text in ops:
            return self.advance()
        return None

    def expect_op(self, op):
        kind, text, start = self.peek()
        if kind != "op" or text != op:
            raise ExprError(f"expected '{op}'", start)
        return self.advance()

    def expr(self):
        node = self.term()
        while True:
            tok = self.accept_op("+", "-")
            if tok is None:
                return node
            rhs = self.term()
            node = Add(node, rhs) if tok[1] == "+" else Sub(node, rhs)

    def term(self):
        node = self.unary()
        while True:
            tok = self.accept_op("*", "/")
            if tok is None:
                return node
            rhs = self.unary()
            node = Mul(node, rhs) if tok[1] == "*" else Div(node, rhs)

    def unary(self):
        if self.accept_op("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.accept_op("^")
        if tok is None:
            return base
        exponent = self.unary()
        try:
            value = exponent.eval({})
        except EvalDomainError:
            raise ExprError("power exponent must be a constant expression",
                            tok[2]) from None
        return Pow(base, float(value))

    def atom(self):
        kind, text, start = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            if self.accept_op("("):
                if text not in _FUNCTIONS:
                    raise ExprError(f"unknown function '{text}'", start)
                arg = self.expr()
                self.expect_op(")")
                return Fun(text, arg)
            if text in VARIABLES:
                return Var(text)
            if text == "pi":
                return Const(math.pi)
            if text in self.constants:
                return Const(float(self.constants[text]))
            if text in _SECOND_ORDER_VARS:
                raise ExprError(
                    f"variable '{text}' belongs to second-order devices "
                    "(time integrals of charge/flux), which are out of scope",
                    start)
            raise ExprError(f"unknown identifier '{text}'", start)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprError(f"unexpected token '{text or 'end of input'}'", start)


def parse_expr(text, constants=None):
    """Parse ``text`` into an expression tree.

    ``constants`` optionally binds extra identifiers to numeric values;
    they are folded into the tree at parse time.
    """
    parser = _Parser(_tokenize(text), constants or {})
    node = parser.expr()
    kind, trailing, start = parser.peek()
    if kind != "end":
        raise ExprError(f"unexpected token '{trailing}'", start)
    return node
