"""Numerical linear algebra for matrix Lie algebras.

Spans and ranks by singular values with an attached spectrum, bracket
closure, common kernels, invariant subspaces, commutants and a matrix
logarithm for elements near the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RankError(ValueError):
    pass


class LogError(ArithmeticError):
    pass


@dataclass
class SpanResult:
    basis: list[np.ndarray]
    singular_values: np.ndarray
    rank: int
    gap: float            # sigma_rank / sigma_{rank+1}; inf when nothing is cut
    threshold: float

    @property
    def indeterminate(self) -> bool:
        return self.gap < 1e2


def _gap(s: np.ndarray, r: int, ref: float) -> float:
    if r >= s.size or s[r] == 0.0:
        return float("inf")
    if r == 0:
        return float(ref / s[0])
    return float(s[r - 1] / s[r])


def span(mats, tol: float = 1e-7, scale: float = 1.0) -> SpanResult:
    """Orthonormal (Frobenius) basis of the span of ``mats``.

    Singular values above ``tol * max(sigma_max, scale)`` count towards the
    rank; ``scale`` is an absolute floor so that pure round-off is not
    mistaken for a nonzero element.
    """
    mats = [np.asarray(a, dtype=float) for a in mats]
    if not mats:
        return SpanResult([], np.zeros(0), 0, float("inf"), tol * scale)
    shape = mats[0].shape
    M = np.stack([a.ravel() for a in mats])
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    thr = tol * max(float(s[0]) if s.size else 0.0, scale)
    r = int(np.sum(s > thr))
    basis = [vt[k].reshape(shape) for k in range(r)]
    return SpanResult(basis, s, r, _gap(s, r, thr / tol), thr)


def span_contains(basis: list[np.ndarray], mats, tol: float = 1e-7) -> float:
    """Largest relative residual of projecting ``mats`` onto an orthonormal basis."""
    if not len(mats):
        return 0.0
    worst = 0.0
    if basis:
        Q = np.stack([b.ravel() for b in basis])
    for a in mats:
        v = np.asarray(a, dtype=float).ravel()
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        res = v - Q.T @ (Q @ v) if basis else v
        worst = max(worst, float(np.linalg.norm(res) / max(nv, 1.0)))
    return worst


def bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def bracket_closure(mats, tol: float = 1e-7, scale: float = 1.0, max_rounds: int = 20) -> SpanResult:
    """Smallest bracket-closed span containing ``mats``."""
    res = span(mats, tol, scale)
    for _ in range(max_rounds):
        B = res.basis
        new = [bracket(B[i], B[j]) for i in range(len(B)) for j in range(i + 1, len(B))]
        nxt = span(B + new, tol, 1.0)
        if nxt.rank == res.rank:
            return nxt
        res = nxt
    raise RankError("bracket closure did not stabilise")


def closure_residual(basis: list[np.ndarray]) -> float:
    brackets = [bracket(a, b) for i, a in enumerate(basis) for b in basis[i + 1 :]]
    return span_contains(basis, brackets)


# ------------------------------------------------------------ subspaces


def orth(vectors: np.ndarray, tol: float = 1e-9, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the column span."""
    V = np.asarray(vectors, dtype=float)
    if V.size == 0:
        return np.zeros((V.shape[0], 0))
    u, s, _ = np.linalg.svd(V, full_matrices=False)
    ref = max(float(s[0]) if s.size else 0.0, scale if scale is not None else 0.0)
    if ref == 0.0:
        return np.zeros((V.shape[0], 0))
    r = int(np.sum(s > tol * ref))
    return u[:, :r]


def common_kernel(mats, dim: int, tol: float = 1e-7) -> np.ndarray:
    """Orthonormal columns spanning ``{v : B v = 0 for all B}``."""
    if not mats:
        return np.eye(dim)
    M = np.vstack(mats)
    _, s, vt = np.linalg.svd(M)
    ref = max(float(s[0]), 1.0)
    s_full = np.zeros(dim)
    s_full[: s.size] = s
    keep = s_full <= tol * ref
    return vt[keep].T


def is_invariant(Q: np.ndarray, mats, tol: float = 1e-7) -> float:
    """Largest relative leakage ``|(I - QQ^T) B Q|`` over the generators."""
    if Q.shape[1] == 0:
        return 0.0
    P = np.eye(Q.shape[0]) - Q @ Q.T
    worst = 0.0
    for B in mats:
        worst = max(worst, float(np.abs(P @ B @ Q).max() / max(np.abs(B).max(), 1e-300)))
    return worst


def cyclic_subspace(vectors: np.ndarray, mats, tol: float = 1e-7) -> np.ndarray:
    """Smallest subspace containing ``vectors`` and invariant under ``mats``."""
    W = orth(vectors, tol)
    while True:
        if W.shape[1] == W.shape[0]:
            return W
        grown = np.hstack([W] + [B @ W for B in mats])
        W2 = orth(grown, tol, scale=1.0)
        if W2.shape[1] == W.shape[1]:
            return W2
        W = W2


def metric_complement(Q: np.ndarray, G: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal columns spanning the G-orthogonal complement of span(Q)."""
    if Q.shape[1] == 0:
        return np.eye(G.shape[0])
    return common_kernel([Q.T @ G], G.shape[0], tol)


def restricted_metric(Q: np.ndarray, G: np.ndarray) -> np.ndarray:
    return Q.T @ G @ Q


def signature(S: np.ndarray, tol: float = 1e-9) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts."""
    if S.size == 0:
        return (0, 0, 0)
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    ref = max(np.abs(w).max(), 1.0)
    return (int(np.sum(w > tol * ref)), int(np.sum(w < -tol * ref)), int(np.sum(np.abs(w) <= tol * ref)))


def restrict_action(B: np.ndarray, Q: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Matrix of B on the invariant non-degenerate subspace span(Q) (G-projection)."""
    S = Q.T @ G @ Q
    return np.linalg.solve(S, Q.T @ G @ B @ Q)


def commutant(mats, dim: int, tol: float = 1e-7) -> list[np.ndarray]:
    """Basis of ``{X : [B, X] = 0 for all B}`` (orthonormal, Frobenius)."""
    if not mats:
        return [e.reshape(dim, dim) for e in np.eye(dim * dim)]
    I = np.eye(dim)
    rows = [np.kron(B, I) - np.kron(I, B.T) for B in mats]
    M = np.vstack(rows)
    _, s, vt = np.linalg.svd(M)
    ref = max(float(s[0]), 1.0)
    s_full = np.zeros(dim * dim)
    s_full[: s.size] = s
    return [v.reshape(dim, dim) for v in vt[s_full <= tol * ref]]


def complex_structure(comm: list[np.ndarray], tol: float = 1e-6) -> np.ndarray | None:
    """A J in the commutant with ``J^2 = -I``, or None."""
    if not comm:
        return None
    dim = comm[0].shape[0]
    I = np.eye(dim)
    for X in comm:
        X0 = X - np.trace(X) / dim * I
        sq = -np.trace(X0 @ X0) / dim
        if sq <= tol:
            continue
        J = X0 / np.sqrt(sq)
        if np.abs(J @ J + I).max() < tol * 10:
            return J
    # a generic traceless combination (for quaternionic commutants)
    rng = np.random.default_rng(7)
    X = sum(c * A for c, A in zip(rng.standard_normal(len(comm)), comm))
    X0 = X - np.trace(X) / dim * I
    sq = -np.trace(X0 @ X0) / dim
    if sq > tol:
        J = X0 / np.sqrt(sq)
        if np.abs(J @ J + I).max() < tol * 10:
            return J
    return None


def _eigen_groups(X: np.ndarray, tol: float = 1e-6) -> list[np.ndarray]:
    """Real invariant subspaces of X from clusters of its eigenvalues."""
    w, V = np.linalg.eig(X)
    dim = X.shape[0]
    used = np.zeros(w.size, dtype=bool)
    scale = max(np.abs(w).max(), 1.0)
    out = []
    for k in range(w.size):
        if used[k]:
            continue
        cluster = np.abs(w - w[k]) <= tol * scale
        conj = np.abs(w - np.conj(w[k])) <= tol * scale
        sel = cluster | conj
        used |= sel
        # generalized eigenspace: kernel of (X - a)^m (X - conj a)^m, real form
        m = int(sel.sum())
        a = w[k]
        if abs(a.imag) <= tol * scale:
            Mk = np.linalg.matrix_power(X - a.real * np.eye(dim), m)
        else:
            quad = X @ X - 2 * a.real * X + (abs(a) ** 2) * np.eye(dim)
            Mk = np.linalg.matrix_power(quad, max(1, m // 2))
        _, s, vt = np.linalg.svd(Mk)
        ref = max(float(s[0]), 1.0)
        s_full = np.zeros(dim)
        s_full[: s.size] = s
        Q = vt[s_full <= 1e-8 * ref].T
        if 0 < Q.shape[1] < dim:
            out.append(Q)
    return out


def invariant_subspaces(mats, G: np.ndarray | None = None, tol: float = 1e-7,
                        seed: int = 0) -> list[np.ndarray]:
    """Proper nonzero subspaces found invariant under every matrix in ``mats``.

    Candidates come from cyclic spans of eigenvectors of a generic element,
    from eigenspaces of a generic element of the commutant, and (when G is
    given) from G-orthogonal complements.  Each is verified.
    """
    if not mats:
        return []
    dim = mats[0].shape[0]
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []

    def add(Q):
        if not (0 < Q.shape[1] < dim):
            return
        if is_invariant(Q, mats) > 10 * tol:
            return
        P = Q @ Q.T
        for R in found:
            if R.shape[1] == Q.shape[1] and np.abs(R @ R.T - P).max() < 1e-6:
                return
        found.append(Q)

    B = sum(c * A for c, A in zip(rng.standard_normal(len(mats)), mats))
    w, V = np.linalg.eig(B)
    for k in range(w.size):
        v = V[:, k]
        add(cyclic_subspace(np.column_stack([v.real, v.imag]), mats, tol))
    for Q in _eigen_groups(B):
        # eigenspaces of B itself are usually not invariant; seed cyclic spans
        for _ in range(2):
            c = Q @ rng.standard_normal(Q.shape[1])
            add(cyclic_subspace(c[:, None], mats, tol))
    comm = commutant(mats, dim, tol)
    if len(comm) > 1:
        X = sum(c * A for c, A in zip(rng.standard_normal(len(comm)), comm))
        for Q in _eigen_groups(X):
            add(Q)
    if G is not None:
        for Q in list(found):
            add(metric_complement(Q, G))
    found.sort(key=lambda Q: Q.shape[1])
    return found


# ----------------------------------------------------------- logarithm


def _sqrtm_db(A: np.ndarray, iters: int = 60) -> np.ndarray:
    """Principal square root by the Denman-Beavers iteration."""
    Y = A.copy()
    Z = np.eye(A.shape[0])
    for _ in range(iters):
        Yn = 0.5 * (Y + np.linalg.inv(Z))
        Zn = 0.5 * (Z + np.linalg.inv(Y))
        if np.abs(Yn - Y).max() < 1e-15 * max(1.0, np.abs(Yn).max()):
            return Yn
        Y, Z = Yn, Zn
    return Y


def logm_near_identity(H: np.ndarray, max_norm: float = 0.5) -> np.ndarray:
    """Principal logarithm for ``|H - I| < max_norm`` (inverse scaling and squaring)."""
    H = np.asarray(H, dtype=float)
    I = np.eye(H.shape[0])
    if np.linalg.norm(H - I, 2) >= max_norm:
        raise LogError(f"|H - I| = {np.linalg.norm(H - I, 2):.3g} too large for the series logarithm")
    X = H
    k = 0
    while np.linalg.norm(X - I, 2) > 0.05:
        X = _sqrtm_db(X)
        k += 1
        if k > 20:
            raise LogError("square-root reduction did not converge")
    E = X - I
    out = np.zeros_like(E)
    term = I.copy()
    for j in range(1, 200):
        term = term @ E
        out += ((-1) ** (j + 1) / j) * term
        if np.abs(term).max() / j < 1e-18:
            break
    else:  # pragma: no cover
        raise LogError("logarithm series did not converge")
    return out * (2.0**k)
