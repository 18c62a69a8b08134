"""Scalar expressions in chart coordinates.

A tiny expression language for metric entries: parsing, printing, exact
symbolic differentiation, numeric evaluation and compilation to fast Python
callables.  Nodes are immutable and interned, so structurally equal
sub-expressions are usually the same object.
"""

from __future__ import annotations

import math
import weakref
from functools import lru_cache
from typing import Callable, Sequence

UNARY_OPS = ("neg", "sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
FUNCTIONS = tuple(op for op in UNARY_OPS if op != "neg")
NAMED_CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ParseError):
    pass


class NonConstantExponentError(ParseError):
    pass


class SingularityError(ExprError, ArithmeticError):
    """Numeric singularity while evaluating; ``node`` is the offending node."""

    def __init__(self, message: str, node: "Expr | None" = None):
        self.node = node
        super().__init__(message if node is None else f"{message} in {node}")


_INTERN: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


class Expr:
    """Immutable expression node.

    ``op`` is one of ``const``, ``var`` or the unary/binary op names.  For
    ``const`` the value is a float, for ``var`` the coordinate index.
    Build nodes through the module-level constructors, which fold constants
    and apply the 0/1 identities.
    """

    __slots__ = ("op", "args", "value", "_hash", "__weakref__")

    op: str
    args: tuple["Expr", ...]
    value: float | int | None

    def __new__(cls, op: str, args: tuple = (), value=None):
        if op == "const":
            value = float(value)
            # -0.0 and 0.0 are the same node
            if value == 0.0:
                value = 0.0
        key = (op, value, tuple(id(a) for a in args))
        node = _INTERN.get(key)
        if node is not None and node.args == args:
            return node
        node = object.__new__(cls)
        object.__setattr__(node, "op", op)
        object.__setattr__(node, "args", args)
        object.__setattr__(node, "value", value)
        object.__setattr__(node, "_hash", hash((op, value, tuple(hash(a) for a in args))))
        _INTERN[key] = node
        return node

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self.op == other.op and self.value == other.value and self.args == other.args

    def __reduce__(self):
        return (Expr, (self.op, self.args, self.value))

    def __repr__(self) -> str:
        if self.op == "const":
            return f"const({self.value!r})"
        if self.op == "var":
            return f"var{self.value}"
        return f"{self.op}({', '.join(repr(a) for a in self.args)})"

    def __str__(self) -> str:
        return to_string(self)

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    # arithmetic sugar, used by the catalogue builders
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def const(value: float) -> Expr:
    return Expr("const", (), value)


def var(index: int) -> Expr:
    if index < 0:
        raise ValueError("variable index must be non-negative")
    return Expr("var", (), int(index))


ZERO = const(0.0)
ONE = const(1.0)


def _is(e: Expr, v: float) -> bool:
    return e.op == "const" and e.value == v


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def add(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if b.op == "neg":
        return sub(a, b.args[0])
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if a is b:
        return ZERO
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if b.op == "const":
        a, b = b, a
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        raise SingularityError("division by constant zero", b)
    if a.op == "const" and b.op == "const":
        return const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Expr("div", (a, b))


def power(a: Expr, exponent) -> Expr:
    if isinstance(exponent, Expr):
        if exponent.op != "const":
            raise ExprError("pow exponent must be a constant")
        exponent = exponent.value
    c = float(exponent)
    if c == 0.0:
        return ONE
    if c == 1.0:
        return a
    if a.op == "const":
        return const(_pow_value(a.value, c, None))
    if a.op == "pow":
        base, inner = a.args
        if float(inner.value).is_integer() and c.is_integer():
            return power(base, inner.value * c)
    return Expr("pow", (a, const(c)))


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if a.op == "const":
        return const(_apply_unary(name, a.value, None))
    return Expr(name, (a,))


def sin(a):
    return func("sin", as_expr(a))


def cos(a):
    return func("cos", as_expr(a))


def tan(a):
    return func("tan", as_expr(a))


def sinh(a):
    return func("sinh", as_expr(a))


def cosh(a):
    return func("cosh", as_expr(a))


def tanh(a):
    return func("tanh", as_expr(a))


def exp(a):
    return func("exp", as_expr(a))


def log(a):
    return func("log", as_expr(a))


def sqrt(a):
    return func("sqrt", as_expr(a))


# ---------------------------------------------------------------- evaluation


def _pow_value(x: float, c: float, node) -> float:
    if x == 0.0 and c < 0:
        raise SingularityError("zero to a negative power", node)
    if x < 0.0 and not c.is_integer():
        raise SingularityError("negative base with fractional exponent", node)
    try:
        return x**c
    except OverflowError:
        raise SingularityError("overflow in pow", node) from None


def _apply_unary(op: str, x: float, node) -> float:
    if op == "neg":
        return -x
    if op == "log":
        if x <= 0.0:
            raise SingularityError("log of non-positive value", node)
        return math.log(x)
    if op == "sqrt":
        if x < 0.0:
            raise SingularityError("sqrt of negative value", node)
        return math.sqrt(x)
    if op == "tan":
        if math.cos(x) == 0.0:
            raise SingularityError("tan pole", node)
        return math.tan(x)
    try:
        return getattr(math, op)(x)
    except OverflowError:
        raise SingularityError(f"overflow in {op}", node) from None


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at the coordinate tuple ``point``.

    Raises SingularityError (with the offending node) on division by zero,
    log/sqrt outside their domain, or overflow.
    """
    cache: dict[int, float] = {}

    def ev(node: Expr) -> float:
        key = id(node)
        if key in cache:
            return cache[key]
        op = node.op
        if op == "const":
            val = node.value
        elif op == "var":
            if node.value >= len(point):
                raise ExprError(f"variable index {node.value} outside point of length {len(point)}")
            val = float(point[node.value])
        elif op in UNARY_OPS:
            val = _apply_unary(op, ev(node.args[0]), node)
        else:
            x, y = ev(node.args[0]), ev(node.args[1])
            if op == "add":
                val = x + y
            elif op == "sub":
                val = x - y
            elif op == "mul":
                val = x * y
            elif op == "div":
                if y == 0.0:
                    raise SingularityError("division by zero", node)
                val = x / y
            else:
                val = _pow_value(x, y, node)
        if math.isnan(val) or math.isinf(val):
            raise SingularityError("non-finite value", node)
        cache[key] = val
        return val

    return ev(e)


# ---------------------------------------------------------- differentiation


@lru_cache(maxsize=None)
def differentiate(e: Expr, i: int) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to coordinate ``i``."""
    op = e.op
    if op == "const":
        return ZERO
    if op == "var":
        return ONE if e.value == i else ZERO
    if op in UNARY_OPS:
        (u,) = e.args
        du = differentiate(u, i)
        if _is(du, 0.0):
            return ZERO
        if op == "neg":
            return neg(du)
        if op == "sin":
            return mul(cos(u), du)
        if op == "cos":
            return neg(mul(sin(u), du))
        if op == "tan":
            return div(du, power(cos(u), 2))
        if op == "sinh":
            return mul(cosh(u), du)
        if op == "cosh":
            return mul(sinh(u), du)
        if op == "tanh":
            return div(du, power(cosh(u), 2))
        if op == "exp":
            return mul(e, du)
        if op == "log":
            return div(du, u)
        if op == "sqrt":
            return div(du, mul(const(2.0), e))
    u, v = e.args
    du = differentiate(u, i)
    if op == "pow":
        c = v.value
        if _is(du, 0.0):
            return ZERO
        return mul(mul(const(c), power(u, c - 1.0)), du)
    dv = differentiate(v, i)
    if op == "add":
        return add(du, dv)
    if op == "sub":
        return sub(du, dv)
    if op == "mul":
        return add(mul(du, v), mul(u, dv))
    if op == "div":
        if _is(dv, 0.0):
            return div(du, v)
        return div(sub(mul(du, v), mul(u, dv)), power(v, 2))
    raise ExprError(f"unknown op {op}")  # pragma: no cover


def partial(e: Expr, indices: Sequence[int]) -> Expr:
    """Repeated partial derivative, e.g. ``partial(e, (0, 1))`` = d0 d1 e."""
    for i in sorted(indices):
        e = differentiate(e, i)
    return e


def variables(e: Expr) -> frozenset[int]:
    """Indices of the coordinates ``e`` depends on."""
    return _variables(e)


@lru_cache(maxsize=None)
def _variables(e: Expr) -> frozenset[int]:
    if e.op == "var":
        return frozenset((e.value,))
    out: frozenset[int] = frozenset()
    for a in e.args:
        out |= _variables(a)
    return out


def substitute(e: Expr, mapping: dict[int, Expr]) -> Expr:
    """Replace variables by expressions; unmapped variables stay as they are."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if node.op == "const":
            out = node
        elif node.op == "var":
            out = mapping.get(node.value, node)
        elif node.op == "neg":
            out = neg(go(node.args[0]))
        elif node.op in FUNCTIONS:
            out = func(node.op, go(node.args[0]))
        elif node.op == "pow":
            out = power(go(node.args[0]), node.args[1].value)
        else:
            a, b = go(node.args[0]), go(node.args[1])
            out = {"add": add, "sub": sub, "mul": mul, "div": div}[node.op](a, b)
        memo[key] = out
        return out

    return go(e)


def shift_variables(e: Expr, offset: int) -> Expr:
    """Re-index every variable ``k`` as ``k + offset``."""
    return substitute(e, {k: var(k + offset) for k in variables(e)})


# ---------------------------------------------------------------- printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _fmt_number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_string(e: Expr, coords: Sequence[str] | None = None) -> str:
    """Canonical text form; ``parse`` reads it back to an equal-valued tree."""

    def name(k: int) -> str:
        return coords[k] if coords is not None else f"x{k}"

    def go(node: Expr) -> tuple[str, int]:
        op = node.op
        if op == "const":
            s = _fmt_number(node.value)
            # negative literals are printed as a unary minus
            return (s, 3) if node.value < 0 else (s, 5)
        if op == "var":
            return name(node.value), 5
        if op in FUNCTIONS:
            return f"{op}({go(node.args[0])[0]})", 5
        if op == "neg":
            s, p = go(node.args[0])
            return "-" + (s if p >= 4 else f"({s})"), 3
        if op == "pow":
            s, p = go(node.args[0])
            base = s if p >= 5 else f"({s})"
            return f"{base}^{_fmt_number(node.args[1].value)}", 4
        prec = _PREC[op]
        ls, lp = go(node.args[0])
        rs, rp = go(node.args[1])
        if lp < prec:
            ls = f"({ls})"
        # left-associative: right operand of equal precedence needs parentheses
        if rp <= prec:
            rs = f"({rs})"
        return f"{ls} {_SYMBOL[op]} {rs}", prec

    return go(e)[0]


# ------------------------------------------------------------------ parsing


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.src = source
        self.coords = {name: k for k, name in enumerate(coords)}
        self.tokens = list(self._tokenize(source))
        self.pos = 0

    def _tokenize(self, s: str):
        i = 0
        while i < len(s):
            c = s[i]
            if c.isspace():
                i += 1
            elif c.isdigit() or (c == "." and i + 1 < len(s) and s[i + 1].isdigit()):
                j = i
                while j < len(s) and (s[j].isdigit() or s[j] == "."):
                    j += 1
                if j < len(s) and s[j] in "eE":
                    k = j + 1
                    if k < len(s) and s[k] in "+-":
                        k += 1
                    if k < len(s) and s[k].isdigit():
                        j = k
                        while j < len(s) and s[j].isdigit():
                            j += 1
                text = s[i:j]
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(f"bad number {text!r}", i, s) from None
                yield ("num", value, i)
                i = j
            elif c.isalpha() or c == "_":
                j = i
                while j < len(s) and (s[j].isalnum() or s[j] == "_"):
                    j += 1
                yield ("ident", s[i:j], i)
                i = j
            elif c in "+-*/^()":
                yield (c, c, i)
                i += 1
            else:
                raise ParseError(f"unexpected character {c!r}", i, s)
        yield ("end", None, len(s))

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {kind!r}, found {what}", tok[2], self.src)
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], self.src)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] in "+-":
            op = self.take()[0]
            rhs = self.term()
            e = Expr("add", (e, rhs)) if op == "+" else Expr("sub", (e, rhs))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            e = Expr("mul", (e, rhs)) if op == "*" else Expr("div", (e, rhs))
        return e

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.take()
            return Expr("neg", (self.unary(),))
        return self.power()

    def power(self) -> Expr:
        base = self.base()
        if self.peek()[0] == "^":
            self.take()
            start = self.peek()[2]
            c = self.exponent(start)
            base = Expr("pow", (base, const(c)))
        return base

    def exponent(self, start: int) -> float:
        # right-associative: 2^3^2 = 2^(3^2); exponents must fold to constants
        sign = 1.0
        while self.peek()[0] == "-":
            self.take()
            sign = -sign
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            c = tok[1]
        elif tok[0] == "(":
            inner = self.base()
            if variables(inner):
                raise NonConstantExponentError("non-constant exponent", start, self.src)
            c = evaluate(inner, ())
        elif tok[0] == "ident":
            if tok[1] in NAMED_CONSTANTS:
                self.take()
                c = NAMED_CONSTANTS[tok[1]]
            else:
                raise NonConstantExponentError("non-constant exponent", tok[2], self.src)
        else:
            raise ParseError("expected exponent", tok[2], self.src)
        if self.peek()[0] == "^":
            self.take()
            c = c ** self.exponent(self.peek()[2])
        return sign * c

    def base(self) -> Expr:
        tok = self.take()
        kind = tok[0]
        if kind == "num":
            return const(tok[1])
        if kind == "(":
            e = self.expr()
            self.take(")")
            return e
        if kind == "-":
            return Expr("neg", (self.base(),))
        if kind == "ident":
            name = tok[1]
            if name in self.coords:
                return var(self.coords[name])
            if name in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Expr(name, (arg,))
            if name in NAMED_CONSTANTS:
                return const(NAMED_CONSTANTS[name])
            raise UnknownIdentifierError(f"unknown identifier {name!r}", tok[2], self.src)
        what = "end of input" if kind == "end" else repr(tok[1])
        raise ParseError(f"unexpected {what}", tok[2], self.src)


def parse(source: str, coords: Sequence[str]) -> Expr:
    """Parse ``source`` into an expression over the named coordinates.

    The tree is returned as written (no folding), so ``parse("x1*x2", ...)``
    is ``mul(var0, var1)``.  Use :func:`simplify` for the folded form.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0, source)
    coords = list(coords)
    if not coords:
        raise ValueError("coordinate list must be non-empty")
    if len(set(coords)) != len(coords):
        raise ValueError("coordinate names must be distinct")
    return _Parser(source, coords).parse()


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` through the folding constructors."""
    return substitute(e, {})


# -------------------------------------------------------------- compilation

_PY_FUNCS = {op: f"_m.{op}" for op in FUNCTIONS}


def compile_exprs(exprs: Sequence[Expr], n: int) -> Callable[[Sequence[float]], list[float]]:
    """Compile a batch of expressions into one Python function of a point.

    Shared sub-expressions are evaluated once.  Numeric failures inside the
    compiled code are re-raised as SingularityError by re-evaluating the
    offending expression on the slow path, which names the bad node.
    """
    lines: list[str] = []
    names: dict[Expr, str] = {}

    def emit(node: Expr) -> str:
        hit = names.get(node)
        if hit is not None:
            return hit
        op = node.op
        if op == "const":
            return repr(node.value)
        if op == "var":
            if node.value >= n:
                raise ExprError(f"variable index {node.value} >= dimension {n}")
            return f"p[{node.value}]"
        if op in FUNCTIONS:
            code = f"{_PY_FUNCS[op]}({emit(node.args[0])})"
        elif op == "neg":
            code = f"-({emit(node.args[0])})"
        elif op == "pow":
            c = node.args[1].value
            if c.is_integer():
                code = f"({emit(node.args[0])}) ** {int(c)!r}"
            else:
                code = f"_m.pow({emit(node.args[0])}, {c!r})"
        else:
            sym = _SYMBOL[op]
            code = f"({emit(node.args[0])}) {sym} ({emit(node.args[1])})"
        name = f"t{len(names)}"
        lines.append(f"    {name} = {code}")
        names[node] = name
        return name

    outs = [emit(e) for e in exprs]
    src = "def _f(p):\n" + "\n".join(lines) + f"\n    return [{', '.join(outs)}]\n"
    namespace: dict = {"_m": math}
    exec(compile(src, "<tractorkit-expr>", "exec"), namespace)
    fast = namespace["_f"]
    exprs = list(exprs)

    def f(p):
        p = [float(v) for v in p]
        try:
            return fast(p)
        except (ZeroDivisionError, ValueError, OverflowError):
            for e in exprs:
                evaluate(e, p)
            raise SingularityError("numeric failure") from None

    return f
