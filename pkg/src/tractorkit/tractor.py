"""The standard tractor bundle in the splitting of a fixed metric.

Components are ordered ``u = (x, Y^1, ..., Y^n, z)``.  The connection is
``nabla_k = d_k + A_k`` with

    A_k[0, 1+j]   = -g_kj
    A_k[1+i, 1+j] = Gamma^i_kj
    A_k[1+i, n+1] = delta^i_k
    A_k[1+i, 0]   = -g^{il} P_kl
    A_k[n+1, 1+j] = P_kj

so parallel transport solves ``du/dt = -A(xdot) u``.  In a coordinate frame
the matrices satisfy ``G A_k + A_k^T G = d_k G`` for the tractor metric
``G = [[0, 0, 1], [0, g, 0], [1, 0, 0]]``; they are exactly skew wherever the
metric has vanishing first derivatives.  Curvature values and covariant
derivatives of curvature are skew with respect to ``G(p)``.

Changing the metric to ``exp(2f) g`` acts on components by
``C = diag(e^f, e^-f I, e^-f) @ S(df)`` where ``S`` is the change of
splitting; connection matrices transform as ``C A C^-1 - (dC) C^-1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .curvature import CurvaturePack, curvature_pack
from .geometry import (
    ConformalRescale,
    DomainError,
    GeometryError,
    MetricSpec,
    _fill,
    check_domain,
    metric_at,
    metric_jets,
)
from .taylor import JetSpace, jet_space


class TransportError(GeometryError):
    pass


@dataclass(frozen=True)
class TractorVec:
    x: float
    Y: tuple[float, ...]
    z: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "Y", tuple(float(c) for c in self.Y))
        object.__setattr__(self, "z", float(self.z))
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("tractor components must be finite")

    @classmethod
    def from_array(cls, a) -> "TractorVec":
        a = np.asarray(a, dtype=float)
        return cls(a[0], tuple(a[1:-1]), a[-1])

    def as_array(self) -> np.ndarray:
        return np.array((self.x,) + self.Y + (self.z,))

    @property
    def n(self) -> int:
        return len(self.Y)


def as_components(u) -> np.ndarray:
    return u.as_array() if isinstance(u, TractorVec) else np.asarray(u, dtype=float)


def tractor_metric(g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    G = np.zeros((n + 2, n + 2))
    G[0, n + 1] = G[n + 1, 0] = 1.0
    G[1 : n + 1, 1 : n + 1] = g
    return G


def tractor_inner(u, v, m: MetricSpec, p) -> float:
    """``x z' + x' z + g(Y, Y')`` with g evaluated at p."""
    a, b = as_components(u), as_components(v)
    return float(a @ tractor_metric(metric_at(m, p)) @ b)


def skew_residual(B: np.ndarray, G: np.ndarray) -> float:
    """``max |G B + B^T G|``: zero iff B is in so(G)."""
    return float(np.abs(G @ B + B.T @ G).max())


# ----------------------------------------------------------- connection


def connection_matrices(m: MetricSpec, p, pack: CurvaturePack | None = None) -> np.ndarray:
    """``A[k]`` for each coordinate direction, shape (n, n+2, n+2)."""
    if pack is None:
        pack = curvature_pack(m, p, with_derivatives=False)
    return _connection_from(pack.g, pack.ginv, pack.christoffel, pack.schouten)


def _connection_from(g, ginv, G, P) -> np.ndarray:
    n = g.shape[0]
    N = n + 2
    A = np.zeros((n, N, N))
    A[:, 0, 1 : n + 1] = -g
    A[:, 1 : n + 1, 1 : n + 1] = np.swapaxes(G, 0, 1)
    A[np.arange(n), 1 + np.arange(n), n + 1] = 1.0
    A[:, 1 : n + 1, 0] = -P @ ginv
    A[:, n + 1, 1 : n + 1] = P
    return A


def levi_civita_matrices(m: MetricSpec, p, pack: CurvaturePack | None = None) -> np.ndarray:
    """``A[k][i, j] = Gamma^i_kj``."""
    if pack is None:
        pack = curvature_pack(m, p, with_derivatives=False)
    return np.swapaxes(pack.christoffel, 0, 1).copy()


class ConnectionField:
    """Fast pointwise evaluation of connection matrices along curves."""

    def __init__(self, m: MetricSpec, kind: str = "tractor"):
        if kind not in ("tractor", "metric"):
            raise ValueError("kind must be 'tractor' or 'metric'")
        if kind == "tractor" and m.n < 3:
            raise GeometryError("tractor connection needs dimension >= 3")
        self.m = m
        self.kind = kind
        self.n = m.n
        self.size = m.n + 2 if kind == "tractor" else m.n
        self._orders = (0, 1, 2) if kind == "tractor" else (0, 1)
        for k in self._orders:
            m.evaluator(k)

    def _derivs(self, x):
        out = []
        for k in self._orders:
            try:
                vals = self.m.evaluator(k)(x)
            except ex.SingularityError as err:
                raise GeometryError(f"singular metric at {tuple(x)}: {err}") from None
            out.append(_fill(self.m, vals, k))
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        derivs = self._derivs(x)
        g, dg = derivs[0], derivs[1]
        ginv = np.linalg.inv(g)
        Gl = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
        G = np.einsum("kl,lij->kij", ginv, Gl)
        if self.kind == "metric":
            return np.swapaxes(G, 0, 1)
        ddg = derivs[2]
        dginv = -(ginv @ dg @ ginv)
        dGl = 0.5 * (np.einsum("aijl->alij", ddg) + np.einsum("ajil->alij", ddg) - ddg)
        dG = np.einsum("akl,lij->akij", dginv, Gl) + np.einsum("kl,alij->akij", ginv, dGl)
        # Ric_jl = d_i G^i_lj - d_l G^i_ij + G^i_im G^m_lj - G^i_lm G^m_ij
        ric = (
            np.einsum("iilj->jl", dG)
            - np.einsum("liij->jl", dG)
            + np.einsum("iim,mlj->jl", G, G)
            - np.einsum("ilm,mij->jl", G, G)
        )
        R = float(np.sum(ginv * ric))
        P = -(ric - R / (2.0 * n - 2.0) * g) / (n - 2.0)
        return _connection_from(g, ginv, G, P)

    def along(self, x, v) -> np.ndarray:
        """``A(v) = sum_k v^k A_k`` at x."""
        return np.tensordot(v, self(x), axes=1)


# -------------------------------------------------------- jets of fields


@dataclass
class ConnectionJets:
    """Taylor jets of a connection at a point.

    ``A`` has shape (n, N, N, w) valid to degree ``degree``; ``Gamma`` is the
    Christoffel jet (n, n, n, w') valid to ``degree`` or above.
    """

    space: JetSpace
    A: np.ndarray
    Gamma: np.ndarray
    degree: int
    kind: str


def connection_jets(m: MetricSpec, p, degree: int, kind: str = "tractor") -> ConnectionJets:
    """Exact Taylor expansion of the connection matrices to ``degree``."""
    x = check_domain(m, p)
    n = m.n
    extra = 2 if kind == "tractor" else 1
    D = degree + extra
    js = jet_space(n, D)
    try:
        gj = metric_jets(m, x, D)
    except ex.SingularityError as err:
        raise GeometryError(f"singular metric at {tuple(x)}: {err}") from None
    ginv = js.inverse_matrix(gj)
    dg = js.grad(gj)                                  # [a, i, j], degree D-1
    Gl = 0.5 * (np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg)
    G = js.contract("kl,lij->kij", ginv, Gl)           # degree D-1
    if kind == "metric":
        A = np.swapaxes(G, 0, 1)
        return ConnectionJets(js, js.truncate(A, degree), G, degree, kind)
    dG = js.grad(G)                                    # [a, k, i, j], degree D-2
    ric = (
        np.einsum("iilj...->jl...", dG)
        - np.einsum("liij...->jl...", dG)
        + js.contract("iim,mlj->jl", G, G, D - 2)
        - js.contract("ilm,mij->jl", G, G, D - 2)
    )
    ginv_d = js.truncate(ginv, D - 2)
    R = js.contract("jl,jl->", ginv_d, ric)
    g_d = js.truncate(gj, D - 2)
    P = -(ric - js.mul(R[None, None], g_d) / (2.0 * n - 2.0)) / (n - 2.0)
    N = n + 2
    w = js.count[degree]
    A = np.zeros((n, N, N, w))
    A[:, 0, 1 : n + 1] = -g_d
    A[:, 1 : n + 1, 1 : n + 1] = np.swapaxes(js.truncate(G, degree), 0, 1)
    A[np.arange(n), 1 + np.arange(n), n + 1, 0] = 1.0
    PgI = js.contract("kl,li->ki", P, ginv_d)
    A[:, 1 : n + 1, 0] = -PgI
    A[:, n + 1, 1 : n + 1] = P
    return ConnectionJets(js, A, js.truncate(G, degree + 1), degree, kind)


def curvature_jets(cj: ConnectionJets) -> np.ndarray:
    """``Omega[i, j] = d_i A_j - d_j A_i + [A_i, A_j]``, one degree shorter."""
    js, A = cj.space, cj.A
    dA = js.grad(A)                                    # [i, j, a, b]
    Ad = js.truncate(A, cj.degree - 1)
    AA = js.contract("iab,jbc->ijac", Ad, Ad)
    return dA - np.swapaxes(dA, 0, 1) + AA - np.swapaxes(AA, 0, 1)


def covariant_derivative_jets(cj: ConnectionJets, T: np.ndarray, nslots: int) -> np.ndarray:
    """``nabla_l T`` for an endomorphism-valued tensor with ``nslots`` lower slots.

    Result has the derivative slot first and is one degree shorter.
    """
    js = cj.space
    d = js.degree_of(T) - 1
    dT = js.grad(T)
    A = js.truncate(cj.A, d)
    Td = js.truncate(T, d)
    # [A_l, T]
    lead = "".join("pqrstuvw"[:nslots])
    AT = js.contract(f"lab,{lead}bc->l{lead}ac", A, Td)
    TA = js.contract(f"{lead}ab,lbc->l{lead}ac", Td, A)
    out = dT + AT - TA
    Gam = js.truncate(cj.Gamma, d)
    for s in range(nslots):
        src = list(lead)
        src[s] = "m"
        # Gamma^m_{l a_s}
        out = out - js.contract(f"ml{lead[s]},{''.join(src)}ab->l{lead}ab", Gam, Td)
    return out


def curvature_derivatives(m: MetricSpec, p, max_order: int, kind: str = "tractor") -> list[np.ndarray]:
    """Values at p of ``Omega, nabla Omega, ..., nabla^max_order Omega``.

    Entry r has shape ``(n,)*(r+2) + (N, N)``; derivative slots come first,
    the 2-form slots last.
    """
    if not 0 <= max_order <= 3:
        raise ValueError("max_order must be between 0 and 3")
    cj = connection_jets(m, p, max_order + 1, kind)
    T = curvature_jets(cj)
    out = [T[..., 0].copy()]
    for r in range(1, max_order + 1):
        T = covariant_derivative_jets(cj, T, r + 1)
        out.append(T[..., 0].copy())
    return out


def connection_derivatives(m: MetricSpec, p, kind: str = "tractor") -> tuple[np.ndarray, np.ndarray]:
    """``(A, dA)`` at p with ``dA[l, k] = d_l A_k``."""
    cj = connection_jets(m, p, 1, kind)
    dA = cj.space.grad(cj.A)
    return cj.A[..., 0].copy(), dA[..., 0].copy()


# -------------------------------------------------------- tractor curvature


def tractor_curvature(m: MetricSpec, p, pack: CurvaturePack | None = None) -> np.ndarray:
    """``Omega[i, j]`` assembled from the Weyl and Cotton-York tensors.

    Blocks: x row zero, middle block ``W^a_b(d_i, d_j)``, z row ``CY_ij.``,
    x column ``-CY_ij^.`` (raised).
    """
    if pack is None:
        pack = curvature_pack(m, p)
    n = pack.n
    N = n + 2
    Om = np.zeros((n, n, N, N))
    Om[:, :, 1 : n + 1, 1 : n + 1] = np.einsum("abij->ijab", pack.weyl_mixed)
    cy = pack.cotton_york
    Om[:, :, n + 1, 1 : n + 1] = cy
    Om[:, :, 1 : n + 1, 0] = -np.einsum("al,ijl->ija", pack.ginv, cy)
    return Om


def tractor_curvature_commutator(m: MetricSpec, p) -> np.ndarray:
    """``d_i A_j - d_j A_i + [A_i, A_j]`` from exact Taylor jets."""
    return curvature_derivatives(m, p, 0)[0]


def metric_curvature_matrices(m: MetricSpec, p, pack: CurvaturePack | None = None) -> np.ndarray:
    """``out[k, l] = R(d_k, d_l)`` as n x n matrices ``R^i_jkl``."""
    if pack is None:
        pack = curvature_pack(m, p, with_derivatives=False)
    return np.einsum("ijkl->klij", pack.riemann)


# ------------------------------------------------------ splitting changes


def splitting_matrix(upsilon, g) -> np.ndarray:
    """Matrix of ``(x, Y, z) -> (x, Y + x Ups#, z - Ups(Y) - |Ups|^2 x / 2)``."""
    ups = np.asarray(upsilon, dtype=float)
    n = ups.size
    sharp = np.linalg.solve(g, ups)
    S = np.eye(n + 2)
    S[1 : n + 1, 0] = sharp
    S[n + 1, 1 : n + 1] = -ups
    S[n + 1, 0] = -0.5 * float(ups @ sharp)
    return S


def change_of_splitting(u, upsilon, m: MetricSpec, p) -> TractorVec:
    a = as_components(u)
    return TractorVec.from_array(splitting_matrix(upsilon, metric_at(m, p)) @ a)


def gauge_matrix(m: MetricSpec, rs: ConformalRescale, p) -> np.ndarray:
    """Component map from the splitting of g to that of ``exp(2f) g`` at p.

    Change of splitting with ``upsilon = df`` followed by the weight factors
    ``e^f`` on x and ``e^-f`` on Y and z.  This orientation is the one
    under which connection matrices transform covariantly.
    """
    x = check_domain(m, p)
    try:
        fv = ex.evaluate(rs.f, x)
        ups = np.array([ex.evaluate(e, x) for e in rs.upsilon])
    except ex.SingularityError as err:
        raise GeometryError(f"conformal factor singular at {tuple(x)}: {err}") from None
    n = m.n
    D = np.diag([np.exp(fv)] + [np.exp(-fv)] * n + [np.exp(-fv)])
    return D @ splitting_matrix(ups, metric_at(m, x))


# ---------------------------------------------------------------- transport


@dataclass(frozen=True)
class TransportResult:
    u: np.ndarray
    propagator: np.ndarray
    drift: float
    richardson: float | None
    steps: int
    length: float

    @property
    def vec(self) -> TractorVec:
        return TractorVec.from_array(self.u)


def coord_rectangle(m: MetricSpec, i: int, j: int, s: float, base=None) -> list[np.ndarray]:
    """Closed s x s loop in the (i, j) coordinate plane, first along i."""
    if i == j or not (0 <= i < m.n and 0 <= j < m.n):
        raise ValueError("need two distinct coordinate indices")
    p = np.asarray(m.basepoint.coords if base is None else base, dtype=float)
    ei = np.zeros(m.n)
    ej = np.zeros(m.n)
    ei[i] = s
    ej[j] = s
    return [p, p + ei, p + ei + ej, p + ej, p.copy()]


def _segments(curve, steps: int):
    pts = [np.asarray(c, dtype=float) for c in curve]
    lengths = np.array([np.linalg.norm(b - a) for a, b in zip(pts[:-1], pts[1:])])
    total = float(lengths.sum())
    if total == 0.0:
        return pts, [], 0.0
    raw = steps * lengths / total
    counts = np.where(lengths > 0, np.maximum(1, np.round(raw)), 0).astype(int)
    return pts, counts, total


def _rk4(field: ConnectionField, curve, steps: int) -> np.ndarray:
    pts, counts, total = _segments(curve, steps)
    U = np.eye(field.size)
    if total == 0.0:
        return U
    for a, b, k in zip(pts[:-1], pts[1:], counts):
        if k == 0:
            continue
        v = b - a
        h = 1.0 / k
        A1 = field.along(a, v)
        for s in range(k):
            t0 = s * h
            # the end of one step is the start of the next
            A0 = A1
            Am = field.along(a + (t0 + 0.5 * h) * v, v)
            A1 = field.along(a + (t0 + h) * v, v)
            k1 = -A0 @ U
            k2 = -Am @ (U + 0.5 * h * k1)
            k3 = -Am @ (U + 0.5 * h * k2)
            k4 = -A1 @ (U + h * k3)
            U = U + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return U


def propagator(m: MetricSpec, curve, steps: int, kind: str = "tractor",
               field: ConnectionField | None = None) -> np.ndarray:
    """Transport matrix along a piecewise-linear curve (fixed-step RK4)."""
    if steps < 4:
        raise TransportError("need at least 4 RK4 steps")
    if len(curve) < 1:
        raise TransportError("curve needs at least one waypoint")
    for c in curve:
        try:
            check_domain(m, c)
        except DomainError as err:
            raise TransportError(f"curve leaves the chart domain: {err}") from None
    field = field or ConnectionField(m, kind)
    return _rk4(field, curve, steps)


def transport(m: MetricSpec, curve: Sequence, u0, steps: int = 1000, kind: str = "tractor",
              richardson: bool = True, field: ConnectionField | None = None) -> TransportResult:
    """Parallel-transport u0 along the waypoints of ``curve``."""
    field = field or ConnectionField(m, kind)
    U = propagator(m, curve, steps, kind, field)
    a0 = as_components(u0)
    if a0.shape != (field.size,):
        raise ValueError(f"expected {field.size} components")
    u = U @ a0
    start, end = np.asarray(curve[0], float), np.asarray(curve[-1], float)
    if kind == "tractor":
        G0, G1 = tractor_metric(metric_at(m, start)), tractor_metric(metric_at(m, end))
    else:
        G0, G1 = metric_at(m, start), metric_at(m, end)
    drift = abs(float(u @ G1 @ u - a0 @ G0 @ a0))
    delta = None
    if richardson and steps >= 8:
        Uh = _rk4(field, curve, steps // 2)
        delta = float(np.abs(Uh @ a0 - u).max())
    _, _, length = _segments(curve, steps)
    return TransportResult(u=u, propagator=U, drift=drift, richardson=delta, steps=steps, length=length)


# -------------------------------------------------------- Einstein tractors


def einstein_tractor(lam: float, n: int) -> TractorVec:
    """``(1, 0, -lambda/(2n-2))``: parallel for an Einstein metric with constant lambda."""
    return TractorVec(1.0, (0.0,) * n, -lam / (2.0 * n - 2.0))


def parallel_residual(m: MetricSpec, p, u) -> float:
    """Max over slots and directions of ``nabla_k`` of the constant section u."""
    A = connection_matrices(m, p)
    a = as_components(u)
    return float(np.abs(A @ a).max())


@dataclass(frozen=True)
class ParallelTractor:
    vector: TractorVec
    norm: float
    sign: int


def detect_parallel_tractors(m: MetricSpec, max_order: int = 2, tol: float = 1e-7,
                             basis=None) -> list[ParallelTractor]:
    """Common kernel of the tractor holonomy algebra at the basepoint."""
    from .holonomy import fixed_vectors, infinitesimal_algebra

    if basis is None:
        basis = infinitesimal_algebra(m, m.basepoint, max_order=max_order, tol=tol)
    G = tractor_metric(metric_at(m, m.basepoint))
    out = []
    for v, norm, sign in fixed_vectors(basis, G, tol):
        out.append(ParallelTractor(TractorVec.from_array(v), norm, sign))
    return out
