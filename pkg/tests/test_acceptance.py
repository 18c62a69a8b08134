"""Acceptance criteria, one test per criterion at its stated tolerance."""

import time

import numpy as np
import pytest

from tractorkit import cone as cn
from tractorkit import curvature as cv
from tractorkit import expr as ex
from tractorkit import geometry as geo
from tractorkit import holonomy as hol
from tractorkit import product as pr
from tractorkit import tractor as tr


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _random_f(m, rng):
    a, b, c = rng.uniform(-0.3, 0.3, size=3)
    x = m.coords
    return ex.parse(f"{a:.4f}*{x[0]} + {b:.4f}*{x[1]}^2 + {c:.4f}*{x[0]}*{x[-1]}", x)


def test_c01_conformally_flat_examples(record):
    for key in ("flat:4", "sphere:4", "hyperbolic:4"):
        m = geo.from_catalogue(key)
        t0 = time.perf_counter()
        worst = max(float(np.abs(tr.tractor_curvature(m, p)).max()) for p in geo.sample_points(m, 20, 0))
        label = hol.classify(hol.infinitesimal_algebra(m)).label
        dt = time.perf_counter() - t0
        ok = worst < 1e-8 and label.startswith("trivial") and dt < 10
        record(f"1 {key}", ok, f"curvature {worst:.2e}, label {label!r}, {dt:.1f}s")
        assert ok


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_c02_einstein_parallel_tractor(record, n):
    m = geo.sphere(n)
    pts = geo.sample_points(m, 20, 1)
    lam, spread = cv.einstein_constant(m, pts)
    s = tr.einstein_tractor(lam, n)
    nabla = max(tr.parallel_residual(m, p, s) for p in pts)
    rng = np.random.default_rng(n)
    base = np.array(m.basepoint.coords)
    loop_err = 0.0
    field = tr.ConnectionField(m)
    for _ in range(5):
        offs = rng.uniform(-0.3, 0.3, size=(3, n))
        loop = [base, *(base + o for o in offs), base]
        r = tr.transport(m, loop, s, steps=2000, richardson=False, field=field)
        loop_err = max(loop_err, float(np.abs(r.u - s.as_array()).max()))
    norm = tr.tractor_inner(s, s, m, base)
    norm_err = abs(norm + lam / (n - 1))
    ok = nabla < 1e-9 and loop_err < 1e-6 and norm_err < 1e-9 and np.sign(norm) == -np.sign(lam)
    record(f"2 S^{n}", ok, f"nabla {nabla:.1e}, loops {loop_err:.1e}, <s,s> {norm:.12f} (lambda {lam:g})")
    assert ok


def test_c03_so7(record):
    m = geo.from_catalogue("sphere:3*sphere:3")
    (b, cls), dt = _timed(lambda: (lambda b: (b, hol.classify(b)))(hol.infinitesimal_algebra(m, tol=1e-7)))
    signs = [f.sign for f in cls.fixed]
    ok = b.dim == 21 and b.gap >= 1e3 and signs == [-1] and cls.label == "so(7)" and dt < 120
    record("3 S3xS3", ok, f"dim {b.dim}, gap {b.gap:.2e}, fixed signs {signs}, label {cls.label!r}, {dt:.1f}s")
    assert ok


def test_c04_full_holonomy(record):
    m = geo.from_catalogue("sphere:2*sphere:2:2")
    b = hol.infinitesimal_algebra(m)
    cls = hol.classify(b)
    ok1 = b.dim == 15 and not cls.fixed and "full" in cls.label
    record("4 S2xS2(2)", ok1, f"dim {b.dim}, fixed {len(cls.fixed)}, label {cls.label!r}")
    b2 = hol.infinitesimal_algebra(geo.from_catalogue("sphere:4*flat:4"))
    ok2 = b2.dim == 45
    record("4 S4xR4", ok2, f"dim {b2.dim}")
    assert ok1 and ok2


def test_c05_cone_ricci_flat_and_holonomy(record):
    base = geo.from_catalogue("sphere:3*sphere:3")
    c = cn.build_cone(base)
    ric = cn.verify_ricci_flat(c, 20)
    iso = cn.verify_holonomy_isomorphism(base, cone=c)
    ok1 = ric < 1e-8 and iso.cone_dim == 21 == iso.base_dim
    record("5 cone(S3xS3)", ok1, f"Ric {ric:.1e}, cone metric dim {iso.cone_dim}, base tractor dim {iso.base_dim}")
    c3 = cn.build_cone(geo.sphere(3))
    flat = max(float(np.abs(cv.riemann(c3.metric, p)).max()) for p in geo.sample_points(c3.metric, 20, 0))
    ok2 = flat < 1e-9
    record("5 cone(S3) flat", ok2, f"Riemann {flat:.1e}")
    assert ok1 and ok2


def test_c06_cone_christoffel_identities(record):
    worst = 0.0
    for base in (geo.sphere(3), geo.from_catalogue("sphere:3*sphere:3")):
        c = cn.build_cone(base)
        for t in (0.5, 1.0, 2.0):
            worst = max(worst, cn.verify_cone_christoffels(c, cn.cone_point(c, t))["max"])
    ok = worst < 1e-10
    record("6 cone connection identities", ok, f"max residual {worst:.1e}")
    assert ok


def test_c07_decomposition_relation(record):
    s4, h4 = geo.sphere(4), geo.hyperbolic(4)
    rel = pr.check_relation(3.0, 4, -3.0, 8)
    m = geo.product(s4, h4)
    curv = max(float(np.abs(tr.tractor_curvature(m, p)).max()) for p in geo.sample_points(m, 20, 0))
    pres = pr.verify_p_restriction(s4, h4)
    ok1 = rel.holds and rel.lhs == rel.rhs == 9.0 and curv < 1e-8 and pres.relation.holds and pres.residual < 1e-8
    record("7 S4xH4", ok1, f"relation {rel.lhs:g} = {rel.rhs:g}, curvature {curv:.1e}, P residual {pres.residual:.1e}")
    bad = pr.verify_p_restriction(geo.sphere(2), geo.sphere(2))
    ok2 = not bad.relation.holds and bad.residual > 1e-3
    record("7 S2xS2", ok2, f"relation holds {bad.relation.holds}, P residual {bad.residual:.3e}")
    assert ok1 and ok2


def test_c08_eguchi_hanson(record):
    t0 = time.perf_counter()
    m = geo.from_catalogue("eguchi_hanson")
    mb = hol.metric_algebra(m)
    tb = hol.infinitesimal_algebra(m)
    cls = hol.classify(tb)
    proj = hol.projection_check(tb, mb, m)
    dt = time.perf_counter() - t0
    signs = [f.sign for f in cls.fixed]
    ok = mb.dim == 3 and tb.dim == 7 and 0 in signs and proj and cls.label == "su(2)⋉ℝ⁴" and dt < 300
    record("8 Eguchi-Hanson", ok,
           f"metric dim {mb.dim}, tractor dim {tb.dim}, fixed signs {signs}, projection {proj}, "
           f"label {cls.label!r}, {dt:.1f}s")
    assert ok


GAUGE_CASES = ["sphere:3", "hyperbolic:4", "sphere:2*sphere:2:2", "sphere:3*sphere:3", "eguchi_hanson"]


@pytest.mark.parametrize("seed", range(5))
def test_c09_gauge_covariance(record, seed):
    key = GAUGE_CASES[seed]
    m = geo.from_catalogue(key)
    rng = np.random.default_rng(100 + seed)
    mr, rs = geo.rescale(m, _random_f(m, rng))
    p0 = np.array(m.basepoint.coords)
    p1 = p0 + rng.uniform(-0.2, 0.2, size=m.n)
    p2 = p0 + rng.uniform(-0.2, 0.2, size=m.n)
    curve = [p0, p1, p2]
    U = tr.propagator(m, curve, 1000)
    Ur = tr.propagator(mr, curve, 1000)
    C0, C2 = tr.gauge_matrix(m, rs, p0), tr.gauge_matrix(m, rs, p2)
    err = float(np.abs(Ur - C2 @ U @ np.linalg.inv(C0)).max())
    la = hol.classify(hol.infinitesimal_algebra(m)).label
    lb = hol.classify(hol.infinitesimal_algebra(mr)).label
    ok = err < 1e-6 and la == lb
    record(f"9 gauge {key}", ok, f"transport mismatch {err:.1e}, labels {la!r} / {lb!r}")
    assert ok


P_CASES = ["flat:4", "sphere:3", "sphere:2*sphere:2:2", "eguchi_hanson", "hyperbolic:5"]


@pytest.mark.parametrize("seed", range(5))
def test_c10_schouten_transformation(record, seed):
    key = P_CASES[seed]
    m = geo.from_catalogue(key)
    rng = np.random.default_rng(200 + seed)
    mr, rs = geo.rescale(m, _random_f(m, rng))
    p = geo.sample_points(m, 1, seed)[0]
    direct = cv.schouten(mr, p)
    err = float(np.abs(cv.transformed_schouten(m, rs, p) - direct).max())
    ok = err < 1e-8
    record(f"10 P law {key}", ok, f"max difference {err:.1e}")
    assert ok


CROSS = ["flat:4", "sphere:4", "hyperbolic:4", "sphere:3*sphere:3", "sphere:2*sphere:2:2",
         "sphere:4*flat:4", "sphere:4*hyperbolic:4", "eguchi_hanson"]


@pytest.mark.parametrize("key", CROSS)
def test_c11_loop_vs_infinitesimal(record, key):
    m = geo.from_catalogue(key)
    a = hol.infinitesimal_algebra(m)
    b = hol.loop_algebra(m)
    ok = a.dim == b.dim
    record(f"11 dims {key}", ok, f"infinitesimal {a.dim}, loop {b.dim}")
    assert ok


@pytest.mark.parametrize("kind", ["metric", "tractor"])
def test_c11_loop_convergence_order(record, kind):
    m = geo.from_catalogue("sphere:2*sphere:2:2")
    errs, slope = hol.loop_convergence(m, 0, 1, sizes=(0.2, 0.1, 0.05), kind=kind)
    ok = slope >= 2.5
    record(f"11 loop order ({kind})", ok, f"errors {', '.join(f'{e:.2e}' for e in errs)}, order {slope:.2f}")
    assert ok
