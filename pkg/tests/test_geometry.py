import math

import numpy as np
import pytest

from tractorkit import expr as ex
from tractorkit import geometry as geo
from tractorkit.curvature import curvature_pack
from tractorkit.taylor import expression_jets, jet_space

CATALOGUE = [geo.flat(3), geo.sphere(2), geo.sphere(4), geo.hyperbolic(4), geo.eguchi_hanson(),
             geo.product(geo.sphere(2), geo.sphere(2, 2.0))]


def test_metric_at_examples():
    assert np.array_equal(geo.metric_at(geo.sphere(2), (math.pi / 2, 0.0)), np.eye(2))
    assert np.array_equal(geo.metric_at(geo.flat(3), (0.5, -1.0, 2.0)), np.eye(3))
    assert np.allclose(geo.metric_at(geo.hyperbolic(2), (0.0, 2.0)), np.eye(2) / 4, atol=1e-15)


def test_inverse_metric():
    inv = geo.inverse_metric_at(geo.sphere(2), (math.pi / 3, 0.0))
    assert np.allclose(inv, np.diag([1.0, 4.0 / 3.0]), atol=1e-14)
    for m in CATALOGUE:
        for p in geo.sample_points(m, 5, 1):
            assert np.abs(geo.metric_at(m, p) @ geo.inverse_metric_at(m, p) - np.eye(m.n)).max() < 1e-12


def test_metric_derivatives():
    d = geo.metric_derivs_at(geo.flat(3), (0.1, 0.2, 0.3), 3)
    assert all(np.all(a == 0) for a in d)
    dg, = geo.metric_derivs_at(geo.sphere(2), (math.pi / 4, 0.0), 1)
    assert abs(dg[0, 1, 1] - 1.0) < 1e-12
    m = geo.eguchi_hanson()
    for p in geo.sample_points(m, 3, 2):
        dg, ddg, dddg = geo.metric_derivs_at(m, p, 3)
        assert np.abs(ddg - ddg.transpose(1, 0, 2, 3)).max() < 1e-10
        assert np.abs(dddg - dddg.transpose(0, 2, 1, 3, 4)).max() < 1e-10
        assert np.abs(dg - dg.transpose(0, 2, 1)).max() == 0
        # first derivatives against central differences
        h = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd = (geo.metric_at(m, p + e) - geo.metric_at(m, p - e)) / (2 * h)
            assert np.abs(fd - dg[k]).max() < 1e-7


def test_errors():
    m = geo.sphere(2)
    with pytest.raises(geo.DomainError):
        geo.metric_at(m, (0.05, 0.0))
    with pytest.raises(geo.DomainError):
        geo.metric_at(m, (1.0,))
    with pytest.raises(geo.NotPositiveDefiniteError):
        geo.diagonal_metric([1.0, ex.parse("x", ["x", "y"])], ["x", "y"], [(-1, 1), (-1, 1)], [-0.5, 0.0])
    m2 = geo.diagonal_metric([1.0, ex.parse("x", ["x", "y"])], ["x", "y"], [(-1, 1), (-1, 1)], [0.5, 0.0])
    with pytest.raises(geo.NotPositiveDefiniteError):
        geo.metric_at(m2, (-0.5, 0.0))
    with pytest.raises(geo.GeometryError):
        geo.make_metric([[1.0]], ["x"], [(-1, 1)], [0.0])


def test_product_block_diagonal():
    m1, m2 = geo.sphere(2), geo.hyperbolic(3)
    m = geo.product(m1, m2)
    assert len(set(m.coords)) == m.n == 5
    for p in geo.sample_points(m, 20, 4):
        g = geo.metric_at(m, p)
        assert np.array_equal(g[:2, :2], geo.metric_at(m1, p[:2]))
        assert np.array_equal(g[2:, 2:], geo.metric_at(m2, p[2:]))
        assert np.all(g[:2, 2:] == 0)


def test_rescale():
    m = geo.flat(2)
    same, rs = geo.rescale(m, ex.ZERO)
    assert same.g == m.g and all(u == ex.ZERO for u in rs.upsilon)
    m4, rs = geo.rescale(m, ex.const(math.log(2.0)))
    assert np.allclose(geo.metric_at(m4, (0.3, 0.1)), 4 * np.eye(2), atol=1e-14)
    assert all(u == ex.ZERO for u in rs.upsilon)
    f = ex.parse("0.3*x1*x2", ["x1", "x2"])
    _, rs = geo.rescale(m, f)
    assert rs.upsilon == (ex.differentiate(f, 0), ex.differentiate(f, 1))


def test_stereographic_rescale_constant_curvature():
    n = 3
    xs = geo.flat(n).coords
    f = ex.parse("-log(1 + (x1^2 + x2^2 + x3^2)/4)", xs)
    m, _ = geo.rescale(geo.flat(n), f)
    # e^{2f} delta is the unit sphere in stereographic form: Ric = (n-1) g
    for p in geo.sample_points(m, 10, 0):
        pk = curvature_pack(m, p, with_derivatives=False)
        assert np.abs(pk.ricci - (n - 1) * pk.g).max() < 1e-9


def test_restrict():
    m = geo.sphere(3)
    r = geo.restrict(m, {2: 0.0})
    assert r.n == 2
    assert np.allclose(geo.metric_at(r, (1.0, 1.2)), geo.metric_at(m, (1.0, 1.2, 0.0))[:2, :2])


def test_catalogue_keys():
    assert geo.from_catalogue("sphere:3*sphere:3").n == 6
    assert geo.from_catalogue("hyperbolic:4:-2").n == 4
    assert geo.from_catalogue("eguchi_hanson").n == 4
    with pytest.raises(geo.GeometryError):
        geo.from_catalogue("torus:2")


def test_manifest_round_trip():
    for m in CATALOGUE + [geo.product(geo.sphere(3), geo.hyperbolic(2))]:
        back = geo.parse_manifest(geo.format_manifest(m))
        assert back.coords == m.coords and back.domain == m.domain
        for p in geo.sample_points(m, 100, 9):
            assert np.abs(geo.metric_at(back, p) - geo.metric_at(m, p)).max() <= 1e-12


def test_manifest_errors_carry_line():
    text = "dimension = 2\ncoords = x, y\nmetric[0][0] = 1\nmetric[1][1] = 1 + q\nbasepoint = 0, 0\n"
    with pytest.raises(geo.ManifestError) as err:
        geo.parse_manifest(text + "domain[0] = -1, 1\ndomain[1] = -1, 1\n")
    assert err.value.line == 4
    with pytest.raises(geo.ManifestError):
        geo.parse_manifest("dimension = 2\ncoords = x\n")
    ok = geo.parse_manifest("# comment\ndimension = 2\ncoords = x, y\nmetric[0][0] = 1\n"
                            "metric[1][1] = exp(2*x)\ndomain[0] = -1, 1\ndomain[1] = -1, 1\n"
                            "basepoint = 0.1, 0.2\nlabel = demo\n")
    assert ok.label == "demo" and ok.g[0][1] == ex.ZERO


def test_sample_points_deterministic_and_inside():
    m = geo.hyperbolic(3)
    a = geo.sample_points(m, 10, 5)
    b = geo.sample_points(m, 10, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    for p in a:
        geo.check_domain(m, p)


def test_jets_match_symbolic_derivatives():
    m = geo.eguchi_hanson()
    p = np.array(m.basepoint.coords)
    e = m.g[1][1]
    J = expression_jets([e], p, 3)[0]
    S = jet_space(4, 3)
    for idx in [(0,), (1,), (0, 0), (0, 1), (0, 0, 1), (1, 2, 3)]:
        alpha = tuple(idx.count(k) for k in range(4))
        assert abs(S.derivative_at(J, alpha) - ex.evaluate(ex.partial(e, idx), p)) < 1e-11
