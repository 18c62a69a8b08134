"""Holonomy algebras at a point and their classification.

The infinitesimal method spans the curvature values and covariant
derivatives of curvature at the basepoint and closes the span under
brackets.  The loop method spans matrix logarithms of transports around
small coordinate rectangles.  Both work for the tractor connection (in the
splitting of the given metric) and for the Levi-Civita connection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .curvature import curvature_pack
from .geometry import GeometryError, MetricSpec, check_domain, metric_at
from .tractor import (
    ConnectionField,
    coord_rectangle,
    curvature_derivatives,
    propagator,
    tractor_metric,
)

LABEL_G2 = "g2"
LABEL_SPIN7 = "spin7"
CONF_HIGH = "high"
CONF_DIM_ONLY = "dimension+irreducibility evidence only"
CONF_INDETERMINATE = "indeterminate rank"

_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def _rn(n: int) -> str:
    return "ℝ" + str(n).translate(_SUPERSCRIPT)


@dataclass
class AlgebraBasis:
    """Orthonormal basis of a matrix Lie algebra at a point."""

    elements: list[np.ndarray]
    singular_values: np.ndarray
    tol: float
    gap: float
    kind: str                    # "tractor" or "metric"
    n: int
    metric: np.ndarray           # invariant inner product the elements are skew for
    generator_rank: int = 0
    log: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.elements)

    @property
    def size(self) -> int:
        return self.metric.shape[0]

    @property
    def indeterminate(self) -> bool:
        return self.gap < 1e2

    def skew_residual(self) -> float:
        G = self.metric
        return max((float(np.abs(G @ B + B.T @ G).max()) for B in self.elements), default=0.0)

    def closure_residual(self) -> float:
        return la.closure_residual(self.elements)


@dataclass
class FixedVector:
    vector: np.ndarray
    norm: float
    sign: int


@dataclass
class Classification:
    label: str
    dim: int
    n: int
    kind: str
    fixed: list[FixedVector]
    invariant_ranks: list[int]
    confidence: str
    evidence: dict


def _sign(x: float, tol: float) -> int:
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def _finish(mats, tol, kind, n, metric, generator_rank=0, log=None) -> AlgebraBasis:
    res = la.bracket_closure(mats, tol=tol)
    basis = AlgebraBasis(
        elements=res.basis,
        singular_values=res.singular_values,
        tol=tol,
        gap=res.gap,
        kind=kind,
        n=n,
        metric=metric,
        generator_rank=generator_rank,
        log=list(log or []),
    )
    return basis


def _generators(derivs: list[np.ndarray], n: int) -> list[np.ndarray]:
    mats = []
    for r, T in enumerate(derivs):
        for idx in itertools.product(range(n), repeat=r):
            for i in range(n):
                for j in range(i + 1, n):
                    mats.append(T[idx + (i, j)])
    return mats


def infinitesimal_algebra(m: MetricSpec, p=None, max_order: int = 2, tol: float = 1e-7,
                          kind: str = "tractor") -> AlgebraBasis:
    """Span of curvature and its covariant derivatives to ``max_order``, bracket-closed."""
    p = m.basepoint if p is None else p
    x = check_domain(m, p)
    if kind == "tractor" and m.n < 3:
        raise GeometryError("tractor holonomy needs dimension >= 3")
    derivs = curvature_derivatives(m, x, max_order, kind)
    gens = _generators(derivs, m.n)
    g = metric_at(m, x)
    metric = tractor_metric(g) if kind == "tractor" else g
    first = la.span(gens, tol)
    log = [f"generators={len(gens)} span={first.rank} gap={first.gap:.3g}"]
    basis = _finish(gens, tol, kind, m.n, metric, first.rank, log)
    basis.log.append(f"closed dim={basis.dim} gap={basis.gap:.3g}")
    # an unclear cut in either stage makes the rank indeterminate
    basis.gap = min(basis.gap, first.gap) if first.rank else basis.gap
    return basis


def metric_algebra(m: MetricSpec, p=None, max_order: int = 2, tol: float = 1e-7) -> AlgebraBasis:
    """Levi-Civita holonomy algebra by the infinitesimal method."""
    return infinitesimal_algebra(m, p, max_order, tol, kind="metric")


def loop_logs(m: MetricSpec, sizes, steps: int = 400, kind: str = "tractor", p=None,
              planes=None) -> dict:
    """``{(i, j, s): log(Hol)}`` for s x s coordinate rectangles at p."""
    p = np.asarray(m.basepoint.coords if p is None else p, dtype=float)
    field_ = ConnectionField(m, kind)
    planes = planes or [(i, j) for i in range(m.n) for j in range(i + 1, m.n)]
    out = {}
    for s in sizes:
        for i, j in planes:
            loop = coord_rectangle(m, i, j, s, p)
            H = propagator(m, loop, steps, kind, field_)
            out[(i, j, s)] = la.logm_near_identity(H)
    return out


def loop_algebra(m: MetricSpec, p=None, sizes=(0.2, 0.1, 0.05), steps: int = 400,
                 tol: float = 1e-7, kind: str = "tractor") -> AlgebraBasis:
    """Span of logarithms of small-rectangle holonomies, bracket-closed."""
    p = np.asarray(m.basepoint.coords if p is None else p, dtype=float)
    check_domain(m, p)
    logs = loop_logs(m, sizes, steps, kind, p)
    g = metric_at(m, p)
    metric = tractor_metric(g) if kind == "tractor" else g
    # normalise per size so the smallest loops are not cut by the threshold
    gens = [L / (s * s) for (i, j, s), L in logs.items()]
    first = la.span(gens, tol)
    basis = _finish(gens, tol, kind, m.n, metric, first.rank,
                    [f"loops={len(gens)} span={first.rank} gap={first.gap:.3g}"])
    basis.gap = min(basis.gap, first.gap) if first.rank else basis.gap
    return basis


def loop_convergence(m: MetricSpec, i: int, j: int, sizes=(0.2, 0.1, 0.05), steps: int = 800,
                     kind: str = "metric", p=None) -> tuple[list[float], float]:
    """Errors ``|log Hol(s) + s^2 R_ij|`` and the fitted order in s.

    The rectangle runs along coordinate i first, so for the convention
    ``du/dt = -A u`` the holonomy is ``exp(-s^2 R(d_i, d_j) + O(s^3))``.
    """
    p = np.asarray(m.basepoint.coords if p is None else p, dtype=float)
    if kind == "metric":
        from .tractor import metric_curvature_matrices
        R = metric_curvature_matrices(m, p)[i, j]
    else:
        from .tractor import tractor_curvature
        R = tractor_curvature(m, p)[i, j]
    logs = loop_logs(m, sizes, steps, kind, p, planes=[(i, j)])
    errs = [float(np.linalg.norm(logs[(i, j, s)] + s * s * R)) for s in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(errs), 1)[0])
    return errs, slope


# --------------------------------------------------------- classification


def fixed_vectors(basis: AlgebraBasis, G: np.ndarray | None = None, tol: float | None = None):
    """Common kernel as (vector, norm, sign) triples, in a G-adapted basis."""
    G = basis.metric if G is None else G
    tol = basis.tol if tol is None else tol
    K = la.common_kernel(basis.elements, basis.size, tol)
    if K.shape[1] == 0:
        return []
    # diagonalise the induced form so that norm signs are meaningful
    S = K.T @ G @ K
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    out = []
    for k in range(w.size):
        v = K @ V[:, k]
        # normalise the first nonzero slot for readability
        piv = np.argmax(np.abs(v) > 1e-9)
        v = v / v[piv] if abs(v[piv]) > 0 else v
        nrm = float(v @ G @ v)
        out.append((v, nrm, _sign(nrm, 1e-9 * max(1.0, float(v @ v)))))
    return out


def _dim_so(k: int) -> int:
    return k * (k - 1) // 2


def _span_dim(mats, tol) -> int:
    return la.span(mats, tol).rank if mats else 0


def _classify_definite(mats: list[np.ndarray], k: int, tol: float, ctx_n: int | None = None):
    """Label a subalgebra of so(k) acting on a definite k-space.

    Returns (label, confidence, evidence)."""
    d = _span_dim(mats, tol)
    ev = {"dim": d, "rank": k}
    if d == 0:
        return "0", CONF_HIGH, ev
    subs = la.invariant_subspaces(mats, tol=tol)
    ev["invariant_ranks"] = sorted({Q.shape[1] for Q in subs})
    if subs:
        Q = subs[0]
        Qc = la.metric_complement(Q, np.eye(k))
        parts = []
        for block in (Q, Qc):
            bm = [block.T @ B @ block for B in mats]
            lab, _, _ = _classify_definite(bm, block.shape[1], tol)
            parts.append(lab)
        return "decomposable(" + " ⊕ ".join(parts) + ")", CONF_HIGH, ev
    comm = la.commutant(mats, k, tol)
    J = la.complex_structure(comm)
    ev["commutant_dim"] = len(comm)
    ev["complex_structure"] = J is not None
    if d == _dim_so(k):
        return f"so({k})", CONF_HIGH, ev
    if k % 2 == 0 and d == (k // 2) ** 2 - 1 and J is not None:
        m_ = k // 2
        if m_ == 2:
            ev["alias"] = "sp(1)"
        return f"su({m_})", CONF_HIGH, ev
    if k % 4 == 0 and d == (k // 4) * (2 * (k // 4) + 1) and len(comm) == 4:
        return f"sp({k // 4})", CONF_HIGH, ev
    if k == 7 and d == 14:
        return LABEL_G2, CONF_DIM_ONLY, ev
    if k == 8 and d == 21:
        return LABEL_SPIN7, CONF_DIM_ONLY, ev
    return "unknown", "low", ev


def _orthonormal_frame(Q: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Columns spanning span(Q), orthonormal for a definite restriction of G."""
    S = Q.T @ G @ Q
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    sgn = 1.0 if w.min() > 0 else -1.0
    return Q @ V @ np.diag(1.0 / np.sqrt(sgn * w))


def _coords(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Left inverse of F that annihilates the G-orthogonal complement of span(F)."""
    return np.linalg.solve(F.T @ G @ F, F.T @ G)


def _block_label(mats, Q, G, tol) -> str:
    """Label the restriction of the algebra to an invariant non-degenerate subspace."""
    k = Q.shape[1]
    pos, neg, _ = la.signature(Q.T @ G @ Q)
    if neg == 0 or pos == 0:
        F = _orthonormal_frame(Q, G)
        bm = [_coords(F, G) @ B @ F for B in mats]
        bm = [0.5 * (b - b.T) for b in bm]
        return _classify_definite(bm, k, tol)[0]
    restricted = [la.restrict_action(B, Q, G) for B in mats]
    d = _span_dim(restricted, tol)
    if d == 0:
        return "0"
    if d == _dim_so(k):
        return f"so({pos},{neg})"
    return f"dim {d} in so({pos},{neg})"


def classify(basis: AlgebraBasis, seed: int = 0) -> Classification:
    """Decision procedure over fixed vectors and invariant subspaces."""
    n, kind, tol = basis.n, basis.kind, basis.tol
    mats = basis.elements
    G = basis.metric
    d = basis.dim
    conf = CONF_INDETERMINATE if basis.indeterminate else CONF_HIGH
    ev: dict = {"dim": d, "gap": basis.gap}
    if kind == "metric":
        if d == 0:
            return Classification("trivial (flat)", 0, n, kind, [], [], conf, ev)
        F = _orthonormal_frame(np.eye(n), G)
        bm = [0.5 * (b - b.T) for b in (np.linalg.solve(F, B @ F) for B in mats)]
        label, c2, ev2 = _classify_definite(bm, n, tol)
        ev.update(ev2)
        return Classification(label, d, n, kind, [], ev2.get("invariant_ranks", []),
                              c2 if conf == CONF_HIGH else conf, ev)

    N = n + 2
    if d == 0:
        fv = fixed_vectors(basis)
        return Classification("trivial (conformally flat)", 0, n, kind,
                              [FixedVector(*f) for f in fv], [], conf, ev)
    fixed = [FixedVector(*f) for f in fixed_vectors(basis)]
    ev["fixed_count"] = len(fixed)
    ev["fixed_signs"] = [f.sign for f in fixed]
    subs = la.invariant_subspaces(mats, G, tol, seed)
    ranks = sorted({Q.shape[1] for Q in subs})
    ev["invariant_ranks"] = ranks

    def nondegenerate(Q):
        return la.signature(Q.T @ G @ Q)[2] == 0

    def decomposable(Q):
        Qc = la.metric_complement(Q, G)
        parts = [_block_label(mats, Q, G, tol), _block_label(mats, Qc, G, tol)]
        dims = []
        for B in (Q, Qc):
            dims.append(_span_dim([la.restrict_action(M, B, G) for M in mats], tol))
        ev["block_ranks"] = [Q.shape[1], Qc.shape[1]]
        ev["block_dims"] = dims
        ev["direct_sum"] = sum(dims) == d
        return Classification("decomposable(" + " ⊕ ".join(parts) + ")", d, n, kind, fixed,
                              ranks, conf, ev)

    if len(fixed) >= 2:
        Fq = la.orth(np.column_stack([f.vector for f in fixed]))
        if nondegenerate(Fq):
            return decomposable(Fq)
        return Classification("unknown", d, n, kind, fixed, ranks, "low", ev)

    if len(fixed) == 1:
        s = fixed[0]
        if s.sign != 0:
            Q = la.metric_complement(s.vector[:, None], G)
            restricted = [la.restrict_action(B, Q, G) for B in mats]
            inner = la.invariant_subspaces(restricted, Q.T @ G @ Q, tol, seed)
            inner_nd = [W for W in inner if la.signature(W.T @ (Q.T @ G @ Q) @ W)[2] == 0]
            if inner_nd:
                return decomposable(Q @ inner_nd[0])
            if s.sign < 0:
                F = _orthonormal_frame(Q, G)
                bm = [0.5 * (b - b.T) for b in (_coords(F, G) @ B @ F for B in mats)]
                label, c2, ev2 = _classify_definite(bm, n + 1, tol)
                ev.update({k: v for k, v in ev2.items() if k != "dim"})
                if conf == CONF_HIGH:
                    conf = c2
                return Classification(label, d, n, kind, fixed, ranks, conf, ev)
            if d == _dim_so(n + 1):
                return Classification(f"so({n},1)", d, n, kind, fixed, ranks, conf, ev)
            return Classification("unknown", d, n, kind, fixed, ranks, "low", ev)
        return _ricci_flat_branch(basis, s, fixed, ranks, conf, ev)

    nd = [Q for Q in subs if nondegenerate(Q)]
    if nd:
        return decomposable(nd[0])
    if not subs:
        full = (N * (N - 1)) // 2
        if d == full:
            return Classification(f"full so({n + 1},1)", d, n, kind, fixed, ranks, conf, ev)
        return Classification("unknown", d, n, kind, fixed, ranks, "low", ev)
    return Classification("unknown", d, n, kind, fixed, ranks, "low", ev)


def _ricci_flat_branch(basis, s, fixed, ranks, conf, ev) -> Classification:
    n, tol, G, mats = basis.n, basis.tol, basis.metric, basis.elements
    v = s.vector
    # a null partner w with <v, w> = 1
    Gv = G @ v
    rng = np.random.default_rng(3)
    y = rng.standard_normal(v.size)
    y = y / (y @ Gv)
    w = y - 0.5 * (y @ G @ y) * v
    screen = la.common_kernel([np.vstack([Gv, G @ w])], v.size, 1e-10)
    F = _orthonormal_frame(screen, G)
    proj = _coords(F, G)
    hmats = [0.5 * (h - h.T) for h in (proj @ B @ F for B in mats)]
    label_h, c2, ev2 = _classify_definite(hmats, n, tol)
    dh = ev2["dim"]
    ev["screen_algebra"] = label_h
    ev["screen_dim"] = dh
    ev.update({k: val for k, val in ev2.items() if k not in ("dim",)})
    if dh + n == basis.dim and label_h not in ("unknown",) and not label_h.startswith("decomposable"):
        h = "0" if dh == 0 else label_h
        label = _rn(n) if dh == 0 else f"{h}⋉{_rn(n)}"
        if conf == CONF_HIGH:
            conf = c2
        return Classification(label, basis.dim, n, basis.kind, fixed, ranks, conf, ev)
    return Classification("unknown", basis.dim, n, basis.kind, fixed, ranks, "low", ev)


def projection_check(tractor_basis: AlgebraBasis, metric_basis: AlgebraBasis, m: MetricSpec | None = None,
                     p=None, tol: float | None = None) -> bool:
    """Whether the middle blocks of the tractor algebra span exactly the metric algebra.

    Only meaningful in a Ricci-flat gauge; a non-Ricci-flat metric is refused.
    """
    tol = tractor_basis.tol if tol is None else tol
    if m is not None:
        pk = curvature_pack(m, m.basepoint if p is None else p, with_derivatives=False)
        if np.abs(pk.ricci).max() > 1e-8:
            raise GeometryError("projection check needs a Ricci-flat metric")
    n = tractor_basis.n
    blocks = [B[1 : n + 1, 1 : n + 1] for B in tractor_basis.elements]
    pb = la.span(blocks, tol)
    if pb.rank != metric_basis.dim:
        return False
    a = la.span_contains(metric_basis.elements, pb.basis)
    b = la.span_contains(pb.basis, metric_basis.elements)
    return max(a, b) < 10 * tol


def algebra_report(basis: AlgebraBasis, cls: Classification) -> dict:
    return {
        "dim": basis.dim,
        "singular_values": [float(x) for x in basis.singular_values],
        "gap": basis.gap,
        "tol": basis.tol,
        "fixed_vectors": [
            {"components": [float(c) for c in f.vector], "norm": f.norm, "norm_sign": f.sign}
            for f in cls.fixed
        ],
        "label": cls.label,
        "confidence": cls.confidence,
        "evidence": cls.evidence,
        "log": basis.log,
    }
