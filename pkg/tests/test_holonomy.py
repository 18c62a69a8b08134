import numpy as np
import pytest

from tractorkit import expr as ex
from tractorkit import geometry as geo
from tractorkit import holonomy as hol
from tractorkit.geometry import GeometryError


def test_flat_dims():
    m = geo.flat(4)
    assert hol.infinitesimal_algebra(m).dim == 0
    assert hol.metric_algebra(m).dim == 0
    assert hol.loop_algebra(geo.flat(3), steps=50).dim == 0
    cls = hol.classify(hol.infinitesimal_algebra(m))
    assert cls.label == "trivial (conformally flat)"


def test_metric_algebra_sphere_is_so4():
    b = hol.metric_algebra(geo.sphere(4))
    assert b.dim == 6
    assert hol.classify(b).label == "so(4)"


def test_eguchi_hanson_metric_and_projection():
    m = geo.eguchi_hanson()
    mb = hol.metric_algebra(m)
    assert mb.dim == 3
    assert hol.classify(mb).label in ("su(2)", "sp(1)")
    tb = hol.infinitesimal_algebra(m)
    assert hol.projection_check(tb, mb, m)


def test_projection_check_flat_and_refusal():
    m = geo.flat(4)
    assert hol.projection_check(hol.infinitesimal_algebra(m), hol.metric_algebra(m), m)
    s = geo.sphere(4)
    with pytest.raises(GeometryError):
        hol.projection_check(hol.infinitesimal_algebra(s), hol.metric_algebra(s), s)


def test_basis_invariants():
    m = geo.product(geo.sphere(2), geo.sphere(2, 2.0))
    b = hol.infinitesimal_algebra(m)
    assert b.skew_residual() < 1e-8
    assert b.closure_residual() < 10 * b.tol
    assert len(b.singular_values) >= b.dim


def test_order_monotonic_and_stable():
    m = geo.product(geo.sphere(2), geo.sphere(2, 2.0))
    dims = [hol.infinitesimal_algebra(m, max_order=k).dim for k in range(4)]
    assert dims == sorted(dims)
    assert dims[2] == dims[3] == 15


def test_fixed_vectors_satisfy_kernel_bound():
    m = geo.product(geo.sphere(3), geo.sphere(3))
    b = hol.infinitesimal_algebra(m)
    cls = hol.classify(b)
    assert len(cls.fixed) == 1
    for f in cls.fixed:
        v = f.vector
        for B in b.elements:
            assert np.linalg.norm(B @ v) <= b.tol * np.linalg.norm(B) * np.linalg.norm(v)


def test_positive_norm_branch_hyperbolic_product():
    # H^3 x H^3 is Einstein with negative constant: a fixed vector of positive norm
    m = geo.product(geo.hyperbolic(3), geo.hyperbolic(3))
    cls = hol.classify(hol.infinitesimal_algebra(m))
    assert cls.label == "so(6,1)"
    assert [f.sign for f in cls.fixed] == [1]


def test_rescale_keeps_label():
    m = geo.product(geo.sphere(3), geo.sphere(3))
    mr, _ = geo.rescale(m, ex.parse("0.1*theta1 - 0.05*phi_2^2", m.coords))
    a = hol.classify(hol.infinitesimal_algebra(m, max_order=1))
    b = hol.classify(hol.infinitesimal_algebra(mr, max_order=3))
    assert a.label == b.label == "so(7)"


def test_definite_classifier_on_synthetic_bases():
    # su(2) acting on C^2 = R^4: dim 3 with a complex structure in the commutant
    Eye = np.eye(4)
    J1 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
    J2 = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], float)
    J3 = J1 @ J2
    b = hol.AlgebraBasis([J1 / 2, J2 / 2, J3 / 2], np.ones(3), 1e-7, 1e15, "metric", 4, Eye)
    assert hol.classify(b).label in ("su(2)", "sp(1)")
    so3 = []
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        e = np.zeros((3, 3))
        e[i, j], e[j, i] = -1, 1
        so3.append(e / np.sqrt(2))
    b = hol.AlgebraBasis(so3, np.ones(3), 1e-7, 1e15, "metric", 3, np.eye(3))
    assert hol.classify(b).label == "so(3)"


def test_loop_convergence_order():
    m = geo.product(geo.sphere(2), geo.sphere(2, 2.0))
    errs, slope = hol.loop_convergence(m, 0, 1)
    assert errs[0] > errs[1] > errs[2]
    assert slope >= 2.5


def test_report_fields():
    b = hol.infinitesimal_algebra(geo.product(geo.sphere(3), geo.sphere(3)))
    rep = hol.algebra_report(b, hol.classify(b))
    for key in ("dim", "singular_values", "fixed_vectors", "label", "confidence", "evidence"):
        assert key in rep
    assert rep["fixed_vectors"][0]["norm_sign"] == -1
