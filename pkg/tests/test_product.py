import numpy as np

from tractorkit import geometry as geo
from tractorkit import product as pr
from tractorkit.tractor import tractor_metric


def test_check_relation_examples():
    assert pr.check_relation(0.0, 2, 0.0, 4).holds
    r = pr.check_relation(3.0, 4, -3.0, 8)
    assert r.holds and r.lhs == 9.0 and r.rhs == 9.0
    r = pr.check_relation(1.0, 2, 1.0, 4)
    assert not r.holds and r.residual == 2.0


def test_p_restriction():
    r = pr.verify_p_restriction(geo.sphere(4), geo.hyperbolic(4))
    assert r.relation.holds and r.residual < 1e-8
    r = pr.verify_p_restriction(geo.sphere(2), geo.sphere(2))
    assert not r.relation.holds and r.residual > 1e-3
    # the displayed proportionality constant, evaluated independently: n=4, l=2, lambda=1
    n, l, lam1, lam2 = 4, 2, 1.0, 1.0
    coeff = ((n - l - 1) * lam1 - (1 - l) * lam2) * (n - l) / ((l - 1) * (n - 2) * (2 * n - 2))
    assert abs(coeff - 1.0 / 3.0) < 1e-15
    assert abs(r.residual - coeff) < 1e-10
    assert pr.verify_p_restriction(geo.flat(2), geo.flat(3)).residual == 0


def test_scalar_additivity():
    assert pr.scalar_additivity(geo.sphere(4), geo.hyperbolic(4)) < 1e-9
    assert pr.scalar_additivity(geo.sphere(3, 2.0), geo.sphere(2)) < 1e-9


def test_einstein_vectors_orthogonal_and_null_split():
    lam1, l, lam2, n = 1.0, 4, -2.0 / 3.0, 7
    K, Kp, v1, v2 = pr.splitting_subspaces(lam1, l, lam2, n)
    G = tractor_metric(np.eye(n))
    assert abs(v1 @ G @ v2) < 1e-15
    assert np.abs(K.T @ G @ Kp).max() < 1e-15
    assert v1 @ G @ v1 > 0 > v2 @ G @ v2


def test_block_holonomy_conformally_flat_product():
    r = pr.verify_block_holonomy(geo.sphere(4), geo.hyperbolic(4))
    assert r.relation.holds and r.dim == 0 and r.decomposes
    assert r.block_dims == (0, 0) and r.factor_dims == (0, 0)


def test_block_holonomy_nontrivial_decomposition():
    # S^2 x S^2 (lambda 1) times H^3 of curvature -1/3 satisfies the relation
    r = pr.verify_block_holonomy(geo.product(geo.sphere(2), geo.sphere(2)), geo.hyperbolic(3, -1.0 / 3.0))
    assert r.relation.holds
    assert r.dim == 10 and r.block_dims == (10, 0) and r.factor_dims == (10, 0)
    assert max(r.k_leak, r.k_perp_leak) < 1e-9 and r.k_nondegenerate
    assert r.v2_residual < 1e-9 and r.orthogonality < 1e-15
    assert r.decomposes


def test_block_holonomy_relation_fails():
    r = pr.verify_block_holonomy(geo.sphere(2), geo.sphere(2, 2.0))
    assert not r.relation.holds and r.dim == 15 and not r.decomposes


def test_block_holonomy_degenerate_control():
    r = pr.verify_block_holonomy(geo.flat(2), geo.flat(2))
    assert r.relation.holds and not r.k_nondegenerate
    assert r.block_dims == (0, 0) and r.decomposes
