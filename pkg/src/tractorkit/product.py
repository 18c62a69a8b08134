"""Products of Einstein metrics and conformal decomposition.

For a product of Einstein factors of dimensions l and n - l the tractor
bundle splits into K and its orthogonal complement exactly when
``(n - l - 1) lambda_1 = (1 - l) lambda_2``.  In the product splitting

    K      = span{(1, 0, f)}  + (0, T N_1, 0)
    K_perp = span{(1, 0, -f)} + (0, T N_2, 0)

with ``f = ((2n - 2 - l) lambda_1 + (l - n) lambda_2) / ((n - 2)(2n - 2))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .cone import fit_einstein
from .curvature import curvature_pack
from .geometry import MetricSpec, product, sample_points
from .holonomy import classify, infinitesimal_algebra


@dataclass(frozen=True)
class RelationCheck:
    holds: bool
    residual: float
    lhs: float
    rhs: float


def check_relation(lam1: float, l: int, lam2: float, n: int) -> RelationCheck:
    """Test ``(n - l - 1) lambda_1 = (1 - l) lambda_2``."""
    if l < 1 or n <= l:
        raise ValueError("need 1 <= l < n")
    lhs = (n - l - 1) * lam1
    rhs = (1 - l) * lam2
    res = abs(lhs - rhs)
    return RelationCheck(res <= 1e-9 * max(abs(lam1), abs(lam2), 1.0), res, lhs, rhs)


def factor_schouten(pack, lam: float) -> np.ndarray:
    """Schouten tensor of an Einstein factor; in dimension 2 use ``-Ric/2``."""
    if pack.n >= 3:
        return pack.schouten
    return -0.5 * pack.ricci


def einstein_f(lam1: float, l: int, lam2: float, n: int) -> float:
    return ((2 * n - 2 - l) * lam1 + (l - n) * lam2) / ((n - 2) * (2 * n - 2))


def predicted_p_coefficients(lam1: float, l: int, lam2: float, n: int) -> tuple[float, float]:
    """Coefficients c_i with ``P|_block_i - P_{N_i} = c_i h_i``."""
    d = (n - l - 1) * lam1 - (1 - l) * lam2
    return (d * (n - l) / ((l - 1) * (n - 2) * (2 * n - 2)) if l > 1 else float("nan"),
            d * l / ((l - 1) * (n - 2) * (2 * n - 2)) if l > 1 else float("nan"))


@dataclass
class PRestriction:
    residual: float
    predicted: float
    lam1: float
    lam2: float
    relation: RelationCheck


def verify_p_restriction(m1: MetricSpec, m2: MetricSpec, points: int = 10, seed: int = 0) -> PRestriction:
    """Max ``|P(product) on each block - P(factor)|`` over sample points."""
    lam1, _ = fit_einstein(m1)
    lam2, _ = fit_einstein(m2)
    m = product(m1, m2)
    l, n = m1.n, m.n
    rel = check_relation(lam1, l, lam2, n)
    c1, c2 = predicted_p_coefficients(lam1, l, lam2, n)
    worst = pred = 0.0
    for p in sample_points(m, points, seed):
        P = curvature_pack(m, p, with_derivatives=False).schouten
        pk1 = curvature_pack(m1, p[:l], with_derivatives=False)
        pk2 = curvature_pack(m2, p[l:], with_derivatives=False)
        d1 = P[:l, :l] - factor_schouten(pk1, lam1)
        d2 = P[l:, l:] - factor_schouten(pk2, lam2)
        worst = max(worst, float(np.abs(d1).max()), float(np.abs(d2).max()))
        if l > 1:
            pred = max(pred, abs(c1) * float(np.abs(pk1.g).max()), abs(c2) * float(np.abs(pk2.g).max()))
    return PRestriction(worst, pred, lam1, lam2, rel)


def scalar_additivity(m1: MetricSpec, m2: MetricSpec, points: int = 5, seed: int = 0) -> float:
    """``|R(product) - (l lambda_1 + (n - l) lambda_2)|`` maximised over points."""
    lam1, _ = fit_einstein(m1)
    lam2, _ = fit_einstein(m2)
    m = product(m1, m2)
    expect = m1.n * lam1 + m2.n * lam2
    return max(abs(curvature_pack(m, p, with_derivatives=False).scalar - expect)
               for p in sample_points(m, points, seed))


def splitting_subspaces(lam1: float, l: int, lam2: float, n: int):
    """Columns spanning K and K_perp, plus v1, v2, in the product splitting."""
    f = einstein_f(lam1, l, lam2, n)
    N = n + 2
    v1 = np.zeros(N)
    v1[0], v1[-1] = 1.0, f
    v2 = np.zeros(N)
    v2[0], v2[-1] = 1.0, -f
    eye = np.eye(N)
    K = np.column_stack([v1] + [eye[:, 1 + i] for i in range(l)])
    Kp = np.column_stack([v2] + [eye[:, 1 + i] for i in range(l, n)])
    return K, Kp, v1, v2


@dataclass
class BlockReport:
    relation: RelationCheck
    dim: int
    label: str
    k_rank: int
    k_leak: float
    k_perp_leak: float
    k_nondegenerate: bool
    block_dims: tuple[int, int] | None
    factor_dims: tuple[int | None, int | None]
    v1_residual: float
    v2_residual: float
    orthogonality: float
    decomposes: bool

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["relation"] = dict(self.relation.__dict__)
        return d


def _leak(Q, mats):
    return la.is_invariant(la.orth(Q), mats) if mats else 0.0


def _block_rank(mats, Q, G, nondeg: bool, tol: float) -> int:
    if not mats:
        return 0
    if nondeg:
        acts = [la.restrict_action(B, Q, G) for B in mats]
    else:
        # K meets K_perp in a null line; G-projection is unavailable
        pinv = np.linalg.pinv(Q)
        acts = [pinv @ B @ Q for B in mats]
    return la.span(acts, tol).rank


def verify_block_holonomy(m1: MetricSpec, m2: MetricSpec, tol: float = 1e-7, max_order: int = 2) -> BlockReport:
    """Tractor holonomy of the product and its block structure along K."""
    lam1, _ = fit_einstein(m1)
    lam2, _ = fit_einstein(m2)
    m = product(m1, m2)
    l, n = m1.n, m.n
    rel = check_relation(lam1, l, lam2, n)
    basis = infinitesimal_algebra(m, m.basepoint, max_order, tol)
    cls = classify(basis)
    mats = basis.elements
    G = basis.metric
    K, Kp, v1, v2 = splitting_subspaces(lam1, l, lam2, n)
    kl, kpl = _leak(K, mats), _leak(Kp, mats)
    nondeg = la.signature(la.orth(K).T @ G @ la.orth(K))[2] == 0
    invariant = max(kl, kpl) < 10 * tol
    blocks = None
    if invariant:
        blocks = tuple(_block_rank(mats, Q, G, nondeg, tol) for Q in (K, Kp))

    def factor_dim(f):
        return infinitesimal_algebra(f, f.basepoint, max_order, tol).dim if f.n >= 3 else None

    fdims = (factor_dim(m1), factor_dim(m2))
    vres = [max((float(np.abs(B @ v).max()) for B in mats), default=0.0) for v in (v1, v2)]
    orth_ = abs(float(v1 @ G @ v2))
    decomposes = bool(
        rel.holds and blocks is not None
        and all(fd is None or fd == bd for fd, bd in zip(fdims, blocks))
        and (sum(blocks) == basis.dim or not nondeg)
    )
    return BlockReport(rel, basis.dim, cls.label, K.shape[1], kl, kpl, nondeg, blocks, fdims,
                       vres[0], vres[1], orth_, decomposes)
