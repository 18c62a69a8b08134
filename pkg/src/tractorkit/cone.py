"""Metric cones over positive Einstein bases.

For a base with ``Ric = lambda g`` the cone metric on ``(t_lo, t_hi) x M`` is
``dt^2 / mu + t^2 g`` with ``mu = lambda / (n - 1)``.  Coordinates are
``(t, base coordinates)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .curvature import christoffel, curvature_pack, einstein_constant
from .geometry import GeometryError, MetricSpec, Point, make_metric, sample_points
from .holonomy import classify, infinitesimal_algebra, metric_algebra

T_LO = 0.1
T_HI = 4.0


class NotEinsteinError(GeometryError):
    pass


@dataclass(frozen=True)
class ConeSpec:
    base: MetricSpec
    lam: float
    mu: float
    spread: float
    metric: MetricSpec

    @property
    def n(self) -> int:
        return self.base.n


def fit_einstein(m: MetricSpec, points: int = 20, seed: int = 0, spread_tol: float = 1e-6):
    """(lambda, spread); raises if the metric is not Einstein within spread_tol."""
    pts = sample_points(m, points, seed) + [np.asarray(m.basepoint.coords)]
    lam, spread = einstein_constant(m, pts)
    if spread > spread_tol:
        raise NotEinsteinError(f"{m.label!r} is not Einstein (relative spread {spread:.3g})")
    return lam, spread


def build_cone(base: MetricSpec, points: int = 20, seed: int = 0, t_range=(T_LO, T_HI)) -> ConeSpec:
    """Cone over an Einstein base with lambda > 0."""
    lam, spread = fit_einstein(base, points, seed)
    if lam <= 1e-9:
        raise NotEinsteinError(f"cone needs lambda > 0, got {lam:.6g}")
    n = base.n
    mu = lam / (n - 1)
    # snap to the nearest short decimal so manifests stay readable
    mu_c = float(f"{mu:.12g}")
    N = n + 1
    t = ex.var(0)
    entries = [[None] * N for _ in range(N)]
    entries[0][0] = ex.const(1.0 / mu_c)
    for i in range(N):
        for j in range(i, N):
            if i == 0 and j == 0:
                continue
            if i == 0:
                entries[i][j] = ex.ZERO
            else:
                gij = ex.shift_variables(base.g[i - 1][j - 1], 1)
                entries[i][j] = ex.ZERO if gij == ex.ZERO else ex.mul(ex.power(t, 2), gij)
    name = "t"
    while name in base.coords:
        name += "_"
    cone = make_metric(
        entries,
        (name,) + base.coords,
        (tuple(t_range),) + base.domain,
        (1.0,) + base.basepoint.coords,
        label=f"cone({base.label})",
    )
    return ConeSpec(base=base, lam=lam, mu=mu_c, spread=spread, metric=cone)


def cone_point(c: ConeSpec, t: float, x=None) -> np.ndarray:
    x = c.base.basepoint.coords if x is None else x
    return np.concatenate([[t], np.asarray(x, dtype=float)])


def verify_cone_christoffels(c: ConeSpec, p) -> dict:
    """Residuals of the four radial/tangential Levi-Civita identities at p."""
    p = np.asarray(p, dtype=float)
    t = p[0]
    n = c.n
    G = christoffel(c.metric, p)
    Gb = christoffel(c.base, p[1:])
    g = c.base
    from .geometry import metric_at

    gb = metric_at(g, p[1:])
    eye = np.zeros((n + 1, n))
    eye[1:, :] = np.eye(n)
    res = {
        "nabla_T_T": float(np.abs(G[:, 0, 0]).max()),
        "nabla_X_T": float(np.abs(G[:, 1:, 0] - eye / t).max()),
        "nabla_T_X": float(np.abs(G[:, 0, 1:] - eye / t).max()),
        "nabla_X_X": float(max(np.abs(G[1:, 1:, 1:] - Gb).max(),
                               np.abs(G[0, 1:, 1:] + t * c.mu * gb).max())),
    }
    res["max"] = max(res.values())
    return res


def verify_ricci_flat(c: ConeSpec, points: int = 20, seed: int = 0) -> float:
    """Largest |Ric| component of the cone over seeded points."""
    worst = 0.0
    for p in sample_points(c.metric, points, seed):
        pk = curvature_pack(c.metric, p, with_derivatives=False)
        worst = max(worst, float(np.abs(pk.ricci).max()))
    return worst


def radial_curvature(c: ConeSpec, points: int = 5, seed: int = 0) -> float:
    """Max of ``R(T, .)`` and ``R(., .) T`` components over seeded points."""
    worst = 0.0
    for p in sample_points(c.metric, points, seed):
        R = curvature_pack(c.metric, p, with_derivatives=False).riemann
        worst = max(worst, float(np.abs(R[:, :, 0, :]).max()), float(np.abs(R[:, 0, :, :]).max()))
    return worst


def radial_transport_check(c: ConeSpec, v0, t0: float = 0.5, t1: float = 2.0,
                           steps: int = 400) -> float:
    """Transport along a radial segment; compare with the profile ``(a, Y t0 / t)``."""
    from .tractor import transport

    v0 = np.asarray(v0, dtype=float)
    x = np.asarray(c.base.basepoint.coords)
    worst = 0.0
    for t in np.linspace(t0, t1, 5)[1:]:
        curve = [cone_point(c, t0, x), cone_point(c, t, x)]
        r = transport(c.metric, curve, v0, steps, kind="metric", richardson=False)
        expect = np.concatenate([[v0[0]], v0[1:] * t0 / t])
        worst = max(worst, float(np.abs(r.u - expect).max()))
    return worst


@dataclass
class IsomorphismReport:
    base_dim: int
    cone_dim: int
    agree: bool
    base_label: str | None
    cone_label: str | None
    classification_suppressed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_holonomy_isomorphism(base: MetricSpec, tol: float = 1e-7, max_order: int = 2,
                                cone: ConeSpec | None = None) -> IsomorphismReport:
    """Compare base tractor algebra with the cone's Levi-Civita algebra."""
    c = cone or build_cone(base)
    cb = metric_algebra(c.metric, Point(cone_point(c, 1.0)), max_order, tol)
    if base.n < 3:
        # no tractor connection in the Moebius sense here; compare dimensions of the cone only
        return IsomorphismReport(0, cb.dim, cb.dim == 0, None, None, True)
    tb = infinitesimal_algebra(base, base.basepoint, max_order, tol)
    bl = classify(tb).label
    cl = classify(cb).label
    same = tb.dim == cb.dim and (tb.dim == 0 or bl == cl)
    return IsomorphismReport(tb.dim, cb.dim, same, bl, cl, False)
