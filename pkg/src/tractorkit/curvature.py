"""Levi-Civita curvature and its conformal pieces at a point.

All tensors are plain numpy arrays in coordinate components.

Index layouts
-------------
``christoffel[k, i, j]``      Gamma^k_ij
``riemann[i, j, k, l]``       R^i_jkl, the component along d_i of R(d_k, d_l) d_j
``ricci[j, l]``               R^i_jil
``weyl[i, j, k, l]``          fully covariant, with (i, j) the 2-form slots and
                              ``riemann_lowered`` in the same arrangement
``weyl_mixed[a, b, i, j]``    g^{al} weyl[i, j, b, l], laid out like ``riemann``
``cotton_york[i, j, k]``      nabla_i P_jk - nabla_j P_ik

Schouten sign: ``P = -(Ric - R g / (2n - 2)) / (n - 2)``, so the unit sphere
has ``P = -g/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .geometry import (
    ConformalRescale,
    GeometryError,
    MetricSpec,
    check_domain,
    inverse_metric_at,
    metric_at,
    metric_derivs_at,
)


class CurvatureError(GeometryError):
    pass


@dataclass(frozen=True)
class CurvaturePack:
    """Curvature data of one metric at one point."""

    point: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray          # dg[a, i, j] = d_a g_ij
    christoffel: np.ndarray
    dchristoffel: np.ndarray  # dchristoffel[a, k, i, j] = d_a Gamma^k_ij
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray | None
    weyl: np.ndarray | None
    weyl_mixed: np.ndarray | None
    cotton_york: np.ndarray | None
    nabla_schouten: np.ndarray | None  # [i, j, k] = nabla_i P_jk

    @property
    def n(self) -> int:
        return self.g.shape[0]


# --------------------------------------------------------------- formulas


def _christoffel_lower(dg):
    # Gamma_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    return 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)


def _d_christoffel_lower(ddg):
    # ddg[a, b, i, j] = d_a d_b g_ij; result [a, l, i, j] = d_a Gamma_lij
    return 0.5 * (
        np.einsum("aijl->alij", ddg) + np.einsum("ajil->alij", ddg) - np.einsum("alij->alij", ddg)
    )


def _dd_christoffel_lower(dddg):
    # result [a, b, l, i, j] = d_a d_b Gamma_lij
    return 0.5 * (
        np.einsum("abijl->ablij", dddg) + np.einsum("abjil->ablij", dddg) - dddg
    )


def _riemann_from(G, dG):
    # R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj
    lin = np.einsum("kilj->ijkl", dG) - np.einsum("likj->ijkl", dG)
    quad = np.einsum("ikm,mlj->ijkl", G, G)
    return lin + quad - np.einsum("ijkl->ijlk", quad)


def _d_riemann_from(G, dG, ddG):
    # ddG[a, b, k, i, j] = d_a d_b G^k_ij ; result [a, i, j, k, l] = d_a R^i_jkl
    lin = np.einsum("akilj->aijkl", ddG) - np.einsum("alikj->aijkl", ddG)
    quad = np.einsum("aikm,mlj->aijkl", dG, G) + np.einsum("ikm,amlj->aijkl", G, dG)
    return lin + quad - np.einsum("aijkl->aijlk", quad)


def schouten_from(ricci: np.ndarray, scalar: float, g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    if n < 3:
        raise CurvatureError("Schouten tensor needs dimension >= 3")
    return -(ricci - scalar / (2.0 * n - 2.0) * g) / (n - 2.0)


def schouten_general(ricci: np.ndarray, scalar: float, g: np.ndarray) -> np.ndarray:
    """Schouten formula for a possibly non-symmetric Ricci tensor.

    Weights ``1/n`` on ``Ric_ij`` and ``(n-1)/n`` on ``Ric_ji``; reduces to
    :func:`schouten_from` when Ricci is symmetric.
    """
    n = g.shape[0]
    if n < 3:
        raise CurvatureError("Schouten tensor needs dimension >= 3")
    return -(ricci / n + (n - 1.0) / n * ricci.T - scalar / (2.0 * n - 2.0) * g) / (n - 2.0)


def lower_riemann(riemann: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Covariant curvature with the 2-form slots first: ``out[i,j,k,l] = g_lm R^m_kij``."""
    return np.einsum("lm,mkij->ijkl", g, riemann)


def weyl_from(riemann_lowered: np.ndarray, P: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Subtract the Schouten part from the lowered curvature."""
    # antisymmetrisations carry weight 1/2
    gP = np.einsum("ki,jl->ijkl", g, P)
    term1 = gP - np.einsum("ijkl->jikl", gP)            # 2 g_k[i P_j]l
    gPk = np.einsum("li,jk->ijkl", g, P)
    term2 = gPk - np.einsum("ijkl->jikl", gPk)          # 2 g_l[i P_j]k
    term3 = np.einsum("ij,kl->ijkl", P - P.T, g)          # 2 P_[ij] g_kl
    return riemann_lowered - term1 + term2 + term3


def reconstruct_riemann(W: np.ndarray, P: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Inverse of :func:`weyl_from`: R = W + (Schouten part)."""
    return W + _schouten_part(P, g)


def _schouten_part(P, g):
    gP = np.einsum("ki,jl->ijkl", g, P)
    gPk = np.einsum("li,jk->ijkl", g, P)
    return (
        gP - np.einsum("ijkl->jikl", gP)
        - (gPk - np.einsum("ijkl->jikl", gPk))
        - np.einsum("ij,kl->ijkl", P - P.T, g)
    )


def weyl_raise(W: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """``out[a, b, i, j] = g^{al} W[i, j, b, l]``."""
    return np.einsum("al,ijbl->abij", ginv, W)


# ------------------------------------------------------------ entry points


def curvature_pack(m: MetricSpec, p, with_derivatives: bool = True) -> CurvaturePack:
    """Everything at p; Cotton-York uses third metric derivatives."""
    x = check_domain(m, p)
    n = m.n
    g = metric_at(m, x)
    ginv = inverse_metric_at(m, x)
    order = 3 if (with_derivatives and n >= 3) else 2
    derivs = metric_derivs_at(m, x, order)
    dg, ddg = derivs[0], derivs[1]

    Gl = _christoffel_lower(dg)
    G = np.einsum("kl,lij->kij", ginv, Gl)
    dginv = -np.einsum("ki,aij,jl->akl", ginv, dg, ginv)
    dGl = _d_christoffel_lower(ddg)
    dG = np.einsum("akl,lij->akij", dginv, Gl) + np.einsum("kl,alij->akij", ginv, dGl)
    riem = _riemann_from(G, dG)
    ric = np.einsum("ijil->jl", riem)
    R = float(np.einsum("jl,jl->", ginv, ric))

    P = W = Wm = CY = nP = None
    if n >= 3:
        P = schouten_from(ric, R, g)
        W = weyl_from(lower_riemann(riem, g), P, g)
        Wm = weyl_raise(W, ginv)
        if with_derivatives:
            dddg = derivs[2]
            # d_a d_b g^{kl}
            ddginv = (
                np.einsum("ki,bij,jm,amn,nl->abkl", ginv, dg, ginv, dg, ginv)
                + np.einsum("ki,aij,jm,bmn,nl->abkl", ginv, dg, ginv, dg, ginv)
                - np.einsum("ki,abij,jl->abkl", ginv, ddg, ginv)
            )
            ddGl = _dd_christoffel_lower(dddg)
            ddG = (
                np.einsum("abkl,lij->abkij", ddginv, Gl)
                + np.einsum("akl,blij->abkij", dginv, dGl)
                + np.einsum("bkl,alij->abkij", dginv, dGl)
                + np.einsum("kl,ablij->abkij", ginv, ddGl)
            )
            dR = _d_riemann_from(G, dG, ddG)
            dric = np.einsum("aijil->ajl", dR)
            dscal = np.einsum("ajl,jl->a", dginv, ric) + np.einsum("jl,ajl->a", ginv, dric)
            dP = -(dric - np.einsum("a,jl->ajl", dscal, g) / (2.0 * n - 2.0)
                   - R / (2.0 * n - 2.0) * dg) / (n - 2.0)
            nP = dP - np.einsum("mij,mk->ijk", G, P) - np.einsum("mik,jm->ijk", G, P)
            CY = nP - np.einsum("ijk->jik", nP)

    return CurvaturePack(
        point=x, g=g, ginv=ginv, dg=dg, christoffel=G, dchristoffel=dG,
        riemann=riem, ricci=ric, scalar=R, schouten=P, weyl=W, weyl_mixed=Wm,
        cotton_york=CY, nabla_schouten=nP,
    )


def christoffel(m: MetricSpec, p) -> np.ndarray:
    x = check_domain(m, p)
    ginv = inverse_metric_at(m, x)
    (dg,) = metric_derivs_at(m, x, 1)
    return np.einsum("kl,lij->kij", ginv, _christoffel_lower(dg))


def riemann(m: MetricSpec, p) -> np.ndarray:
    return curvature_pack(m, p, with_derivatives=False).riemann


def ricci(m: MetricSpec, p) -> np.ndarray:
    return curvature_pack(m, p, with_derivatives=False).ricci


def scalar(m: MetricSpec, p) -> float:
    return curvature_pack(m, p, with_derivatives=False).scalar


def _require3(m: MetricSpec):
    if m.n < 3:
        raise CurvatureError("conformal curvature needs dimension >= 3")


def schouten(m: MetricSpec, p) -> np.ndarray:
    _require3(m)
    return curvature_pack(m, p, with_derivatives=False).schouten


def weyl(m: MetricSpec, p) -> np.ndarray:
    _require3(m)
    return curvature_pack(m, p, with_derivatives=False).weyl


def weyl_mixed(m: MetricSpec, p) -> np.ndarray:
    _require3(m)
    return curvature_pack(m, p, with_derivatives=False).weyl_mixed


def cotton_york(m: MetricSpec, p) -> np.ndarray:
    _require3(m)
    return curvature_pack(m, p).cotton_york


# ------------------------------------------------------- conformal change


def transform_schouten(P, upsilon, nabla_upsilon, g, ginv) -> np.ndarray:
    """Schouten tensor of ``exp(2f) g`` from that of g, with ``upsilon = df``.

    ``nabla_upsilon[i, j] = nabla_i upsilon_j`` (symmetric since upsilon is
    exact).  In this sign convention the law reads
    ``P' = P + nabla Y - Y Y + |Y|^2 g / 2``; it coincides with the bracket
    form ``P - nabla U + [U, [U, .]] / 2`` for ``U = -df``.
    """
    ups = np.asarray(upsilon, dtype=float)
    n2 = float(ups @ ginv @ ups)
    return P + nabla_upsilon.T - np.outer(ups, ups) + 0.5 * n2 * g


def rescale_data(m: MetricSpec, rs: ConformalRescale, p) -> tuple[np.ndarray, np.ndarray]:
    """``(upsilon, nabla upsilon)`` at p, from exact derivatives of f."""
    x = check_domain(m, p)
    n = m.n
    try:
        ups = np.array([ex.evaluate(e, x) for e in rs.upsilon])
        hess = np.array([[ex.evaluate(ex.differentiate(rs.upsilon[j], i), x) for j in range(n)]
                         for i in range(n)])
    except ex.SingularityError as err:
        raise GeometryError(f"conformal factor singular at {tuple(x)}: {err}") from None
    G = christoffel(m, x)
    return ups, hess - np.einsum("kij,k->ij", G, ups)


def transformed_schouten(m: MetricSpec, rs: ConformalRescale, p) -> np.ndarray:
    """Predicted Schouten tensor of the rescaled metric at p."""
    pack = curvature_pack(m, p, with_derivatives=False)
    ups, nups = rescale_data(m, rs, p)
    return transform_schouten(pack.schouten, ups, nups, pack.g, pack.ginv)


# ------------------------------------------------------------- utilities


def einstein_constant(m: MetricSpec, points) -> tuple[float, float]:
    """Least-squares fit ``Ric = lambda g`` over points; returns (lambda, spread).

    ``spread`` is the largest residual ``|Ric - lambda g|`` relative to
    ``max(1, |lambda|)``.
    """
    num = den = 0.0
    data = []
    for p in points:
        pack = curvature_pack(m, p, with_derivatives=False)
        num += float(np.sum(pack.ricci * pack.g))
        den += float(np.sum(pack.g * pack.g))
        data.append((pack.ricci, pack.g))
    lam = num / den
    spread = max(float(np.abs(r - lam * g).max()) for r, g in data) / max(1.0, abs(lam))
    return lam, spread


def second_bianchi_residual(m: MetricSpec, p, h: float = 1e-5) -> float:
    """Max of the cyclic sum of nabla R, with d R by central differences."""
    x = check_domain(m, p)
    n = m.n
    pack = curvature_pack(m, x, with_derivatives=False)
    G, R = pack.christoffel, pack.riemann
    dR = np.empty((n,) + R.shape)
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        dR[a] = (riemann(m, x + e) - riemann(m, x - e)) / (2 * h)
    nR = (
        dR
        + np.einsum("iam,mjkl->aijkl", G, R)
        - np.einsum("maj,imkl->aijkl", G, R)
        - np.einsum("mak,ijml->aijkl", G, R)
        - np.einsum("mal,ijkm->aijkl", G, R)
    )
    cyc = nR + np.einsum("kijla->aijkl", nR) + np.einsum("lijak->aijkl", nR)
    return float(np.abs(cyc).max())
