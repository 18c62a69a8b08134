import numpy as np
import pytest
import scipy.linalg
from scipy.linalg import expm

from tractorkit import linalg as la


def _so(k, rng, count):
    out = []
    for _ in range(count):
        a = rng.normal(size=(k, k))
        out.append(a - a.T)
    return out


def test_span_rank_and_gap():
    rng = np.random.default_rng(0)
    basis = _so(5, rng, 3)
    mats = [sum(c * b for c, b in zip(rng.normal(size=3), basis)) for _ in range(8)]
    r = la.span(mats, 1e-7)
    assert r.rank == 3 and r.gap > 1e8 and not r.indeterminate
    assert la.span_contains(r.basis, basis) < 1e-10
    assert la.span([np.zeros((3, 3))]).rank == 0


def test_span_indeterminate_when_no_gap():
    mats = [np.diag([1.0, 0, 0]), np.diag([0, 5e-7, 0]), np.diag([0, 0, 5e-8])]
    assert la.span(mats, 1e-7).indeterminate


def test_bracket_closure_generates_so3():
    e = np.zeros((3, 3))
    a, b = e.copy(), e.copy()
    a[0, 1], a[1, 0] = 1, -1
    b[1, 2], b[2, 1] = 1, -1
    r = la.bracket_closure([a, b])
    assert r.rank == 3
    assert la.closure_residual(r.basis) < 1e-12


def test_common_kernel_and_invariance():
    J = np.zeros((4, 4))
    J[0, 1], J[1, 0] = -1, 1
    K = la.common_kernel([J], 4)
    assert K.shape[1] == 2
    assert la.is_invariant(np.eye(4)[:, :2], [J]) < 1e-14
    assert la.is_invariant(np.eye(4)[:, 1:3], [J]) > 0.1


def test_signature_and_complement():
    G = np.diag([1.0, 1.0, -1.0])
    assert la.signature(G) == (2, 1, 0)
    Q = np.array([[1.0], [0.0], [1.0]])
    assert la.signature(la.restricted_metric(Q, G))[2] == 1
    C = la.metric_complement(np.eye(3)[:, :1], G)
    assert np.abs(np.eye(3)[:, :1].T @ G @ C).max() < 1e-14 and C.shape[1] == 2


def test_commutant_complex_structure():
    # u(2) acting on R^4 commutes with a complex structure
    rng = np.random.default_rng(1)
    mats = []
    for _ in range(4):
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = h - h.conj().T
        mats.append(np.block([[h.real, -h.imag], [h.imag, h.real]]))
    comm = la.commutant(mats, 4)
    assert len(comm) == 2
    J = la.complex_structure(comm)
    assert J is not None and np.abs(J @ J + np.eye(4)).max() < 1e-8


def test_invariant_subspaces_block():
    rng = np.random.default_rng(2)
    mats = []
    for _ in range(3):
        B = np.zeros((5, 5))
        a = rng.normal(size=(2, 2))
        c = rng.normal(size=(3, 3))
        B[:2, :2] = a - a.T
        B[2:, 2:] = c - c.T
        mats.append(B)
    subs = la.invariant_subspaces(mats, np.eye(5))
    ranks = sorted(Q.shape[1] for Q in subs)
    assert 2 in ranks and 3 in ranks


def test_logm_against_scipy():
    rng = np.random.default_rng(3)
    for k in (3, 6, 10):
        for scale in (0.01, 0.1, 0.3):
            X = rng.normal(size=(k, k))
            X *= scale / np.linalg.norm(X, 2)
            H = expm(X)
            L = la.logm_near_identity(H)
            assert np.abs(L - scipy.linalg.logm(H).real).max() < 1e-12
            assert np.abs(L - X).max() < 1e-12


def test_logm_rejects_far_from_identity():
    with pytest.raises(la.LogError):
        la.logm_near_identity(-np.eye(3))
