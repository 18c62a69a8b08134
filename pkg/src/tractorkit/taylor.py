"""Truncated multivariate Taylor arithmetic.

A jet of degree ``D`` at a point ``p`` stores the Taylor coefficients
``c[alpha]`` of ``f(p + h) = sum_alpha c[alpha] h^alpha`` for all multi-indices
with ``|alpha| <= D``.  Tensor-valued jets are arrays whose last axis runs over
multi-indices.  Coefficients are ordered by total degree, so truncating to
degree ``d`` is a prefix slice.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import expr as ex


class JetSpace:
    """Multi-index bookkeeping for jets in ``n`` variables up to degree ``degree``."""

    def __init__(self, n: int, degree: int):
        self.n = n
        self.degree = degree
        idx: list[tuple[int, ...]] = []
        for d in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(n), d):
                alpha = [0] * n
                for k in combo:
                    alpha[k] += 1
                idx.append(tuple(alpha))
        self.multi = idx
        self.index = {a: i for i, a in enumerate(idx)}
        self.size = len(idx)
        self.deg = np.array([sum(a) for a in idx])
        # prefix sizes: number of coefficients of degree <= d
        self.count = [int(np.sum(self.deg <= d)) for d in range(degree + 1)]
        self._pairs: dict[int, tuple] = {}
        self._shift = [self._derivative_table(k) for k in range(n)]

    def _derivative_table(self, k: int):
        # d/dh_k: coefficient of h^beta is (beta_k + 1) c[beta + e_k]
        dst, src, fac = [], [], []
        for i, beta in enumerate(self.multi):
            if sum(beta) >= self.degree:
                continue
            up = list(beta)
            up[k] += 1
            dst.append(i)
            src.append(self.index[tuple(up)])
            fac.append(beta[k] + 1)
        return np.array(dst, dtype=int), np.array(src, dtype=int), np.array(fac, dtype=float)

    def degree_of(self, x: np.ndarray) -> int:
        """Degree of validity implied by the width of the last axis."""
        try:
            return self.count.index(x.shape[-1])
        except ValueError:
            raise ValueError(f"array width {x.shape[-1]} is not a jet width") from None

    def pairs(self, d: int):
        """Index arrays (a, b) and scatter matrix for products truncated at degree d."""
        if d not in self._pairs:
            ia, ib, ic = [], [], []
            nd = self.count[d]
            for a in range(nd):
                da = self.deg[a]
                alpha = self.multi[a]
                for b in range(self.count[d - da]):
                    beta = self.multi[b]
                    ia.append(a)
                    ib.append(b)
                    ic.append(self.index[tuple(x + y for x, y in zip(alpha, beta))])
            ia = np.array(ia, dtype=int)
            ib = np.array(ib, dtype=int)
            ic = np.array(ic, dtype=int)
            scatter = sp.csr_matrix(
                (np.ones(len(ic)), (ic, np.arange(len(ic)))), shape=(nd, len(ic))
            )
            self._pairs[d] = (ia, ib, scatter)
        return self._pairs[d]

    # ------------------------------------------------------------ creation

    def constant(self, value, shape=(), d: int | None = None) -> np.ndarray:
        d = self.degree if d is None else d
        out = np.zeros(tuple(shape) + (self.count[d],))
        out[..., 0] = value
        return out

    def variable(self, k: int, value: float) -> np.ndarray:
        out = np.zeros(self.size)
        out[0] = value
        if self.degree >= 1:
            e = [0] * self.n
            e[k] = 1
            out[self.index[tuple(e)]] = 1.0
        return out

    # ---------------------------------------------------------- arithmetic

    def _scatter(self, prod: np.ndarray, scatter) -> np.ndarray:
        shape = prod.shape[:-1]
        flat = prod.reshape(-1, prod.shape[-1])
        return np.asarray(scatter @ flat.T).T.reshape(shape + (scatter.shape[0],))

    def _deg(self, d, *xs) -> int:
        top = min(self.degree_of(x) for x in xs)
        return top if d is None else min(d, top)

    def mul(self, x: np.ndarray, y: np.ndarray, d: int | None = None) -> np.ndarray:
        """Elementwise (broadcast) product of tensor jets, truncated at degree d."""
        d = self._deg(d, x, y)
        ia, ib, scatter = self.pairs(d)
        return self._scatter(x[..., ia] * y[..., ib], scatter)

    def contract(self, subscripts: str, x: np.ndarray, y: np.ndarray, d: int | None = None) -> np.ndarray:
        """``np.einsum(subscripts, x, y)`` for jets; do not use the letter 'z'."""
        d = self._deg(d, x, y)
        ia, ib, scatter = self.pairs(d)
        lhs, out_idx = subscripts.split("->")
        sx, sy = lhs.split(",")
        prod = np.einsum(f"{sx}z,{sy}z->{out_idx}z", x[..., ia], y[..., ib], optimize=True)
        return self._scatter(prod, scatter)

    def matmul(self, x: np.ndarray, y: np.ndarray, d: int | None = None) -> np.ndarray:
        return self.contract("...ij,...jk->...ik", x, y, d)

    def bracket(self, x: np.ndarray, y: np.ndarray, d: int | None = None) -> np.ndarray:
        """Matrix commutator over the axes just before the jet axis."""
        return self.matmul(x, y, d) - self.matmul(y, x, d)

    def ddx(self, x: np.ndarray, k: int) -> np.ndarray:
        """Partial derivative along variable k; the result is one degree shorter."""
        d = self.degree_of(x)
        if d == 0:
            raise ValueError("cannot differentiate a degree-0 jet")
        dst, src, fac = self._shift[k]
        w = self.count[d - 1]
        keep = dst < w
        out = np.zeros(x.shape[:-1] + (w,))
        out[..., dst[keep]] = x[..., src[keep]] * fac[keep]
        return out

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Stack of partials; the new derivative axis is placed first."""
        return np.stack([self.ddx(x, k) for k in range(self.n)])

    def truncate(self, x: np.ndarray, d: int) -> np.ndarray:
        return x[..., : self.count[d]].copy()

    def compose(self, derivs: list[float], x: np.ndarray, d: int | None = None) -> np.ndarray:
        """Apply a scalar function given its derivatives at x's constant term."""
        d = self._deg(d, x)
        delta = self.truncate(x, d)
        delta[..., 0] = 0.0
        out = self.constant(derivs[d] / math.factorial(d), x.shape[:-1], d)
        for k in range(d - 1, -1, -1):
            out = self.mul(out, delta, d)
            out[..., 0] += derivs[k] / math.factorial(k)
        return out

    def reciprocal(self, x: np.ndarray, d: int | None = None) -> np.ndarray:
        c = x[..., 0]
        if np.any(c == 0.0):
            raise ex.SingularityError("division by zero in jet")
        d = self._deg(d, x)
        return self.compose(_pow_derivs(c, -1.0, d), x, d)

    def inverse_matrix(self, g: np.ndarray, d: int | None = None) -> np.ndarray:
        """Jet of the matrix inverse via a truncated Neumann series."""
        d = self._deg(d, g)
        g = self.truncate(g, d)
        g0inv = np.linalg.inv(g[..., 0])
        delta = g.copy()
        delta[..., 0] = 0.0
        # g^{-1} = sum_k (-g0^{-1} delta)^k g0^{-1}
        m = -np.einsum("ij,jkz->ikz", g0inv, delta)
        base = self.constant(0.0, g.shape[:-1], d)
        base[..., 0] = g0inv
        out = base.copy()
        term = base
        for _ in range(d):
            term = self.matmul(m, term, d)
            out = out + term
        return out

    def value(self, x: np.ndarray) -> np.ndarray:
        return x[..., 0]

    def derivative_at(self, x: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        """Partial derivative d^alpha x at the expansion point."""
        fac = np.prod([math.factorial(a) for a in alpha])
        return x[..., self.index[tuple(alpha)]] * fac


@lru_cache(maxsize=None)
def jet_space(n: int, degree: int) -> JetSpace:
    return JetSpace(n, degree)


# ------------------------------------------------------------ scalar rules


def _pow_derivs(c, a: float, d: int) -> list:
    out = []
    coeff = 1.0
    for k in range(d + 1):
        out.append(coeff * c ** (a - k))
        coeff *= a - k
    return out


def _unary_derivs(op: str, c: float, d: int) -> list[float]:
    if op == "exp":
        v = math.exp(c)
        return [v] * (d + 1)
    if op in ("sin", "cos"):
        s, co = math.sin(c), math.cos(c)
        cyc = [s, co, -s, -co] if op == "sin" else [co, -s, -co, s]
        return [cyc[k % 4] for k in range(d + 1)]
    if op in ("sinh", "cosh"):
        s, co = math.sinh(c), math.cosh(c)
        cyc = [s, co] if op == "sinh" else [co, s]
        return [cyc[k % 2] for k in range(d + 1)]
    if op == "log":
        if c <= 0.0:
            raise ex.SingularityError("log of non-positive value")
        return [math.log(c)] + [(-1) ** (k - 1) * math.factorial(k - 1) / c**k for k in range(1, d + 1)]
    if op == "sqrt":
        if c <= 0.0:
            raise ex.SingularityError("sqrt at non-positive value")
        return _pow_derivs(c, 0.5, d)
    raise ValueError(op)  # pragma: no cover


def expression_jets(exprs, point, degree: int) -> np.ndarray:
    """Taylor jets of a list of expressions at ``point``; shape (len, size)."""
    n = len(point)
    js = jet_space(n, degree)
    memo: dict[int, np.ndarray] = {}

    def go(node: ex.Expr) -> np.ndarray:
        key = id(node)
        if key in memo:
            return memo[key]
        op = node.op
        if op == "const":
            out = js.constant(node.value)
        elif op == "var":
            out = js.variable(node.value, float(point[node.value]))
        elif op == "neg":
            out = -go(node.args[0])
        elif op == "add":
            out = go(node.args[0]) + go(node.args[1])
        elif op == "sub":
            out = go(node.args[0]) - go(node.args[1])
        elif op == "mul":
            a, b = node.args
            if a.op == "const":
                out = a.value * go(b)
            else:
                out = js.mul(go(a), go(b))
        elif op == "div":
            a, b = node.args
            if b.op == "const":
                out = go(a) / b.value
            else:
                out = js.mul(go(a), js.reciprocal(go(b)))
        elif op == "pow":
            u = go(node.args[0])
            c = node.args[1].value
            base = u[0]
            if c.is_integer() and c > 0:
                # exact repeated products; fine at zero base
                out = u
                for _ in range(int(c) - 1):
                    out = js.mul(out, u)
            else:
                if base == 0.0 or (base < 0 and not c.is_integer()):
                    raise ex.SingularityError("pow singular at expansion point", node)
                out = js.compose(_pow_derivs(base, c, degree), u)
        elif op in ("tan", "tanh"):
            u = go(node.args[0])
            s = js.compose(_unary_derivs("sin" if op == "tan" else "sinh", u[0], degree), u)
            c = js.compose(_unary_derivs("cos" if op == "tan" else "cosh", u[0], degree), u)
            out = js.mul(s, js.reciprocal(c))
        else:
            u = go(node.args[0])
            try:
                out = js.compose(_unary_derivs(op, u[0], degree), u)
            except ex.SingularityError as err:
                raise ex.SingularityError(str(err), node) from None
        memo[key] = out
        return out

    return np.array([go(e) for e in exprs])
