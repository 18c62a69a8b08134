"""Command-line front end: ``tractorkit <command> ...``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cone as cn
from . import geometry as geo
from . import holonomy as hol
from . import product as pr
from .curvature import curvature_pack, reconstruct_riemann, lower_riemann
from .expr import ExprError
from .report import to_json, to_text
from .tractor import coord_rectangle, tractor_curvature, transport


class CliError(Exception):
    pass


def load(arg: str) -> geo.MetricSpec:
    """A manifest path, or a catalogue key when no such file exists."""
    if os.path.exists(arg):
        return geo.load_manifest(arg)
    return geo.from_catalogue(arg)


def _points(m, count: int, seed: int):
    return [np.asarray(m.basepoint.coords)] + geo.sample_points(m, count, seed)


# ------------------------------------------------------------- commands


def cmd_curvature(m: geo.MetricSpec, points: int = 5, seed: int = 0) -> dict:
    pts = _points(m, points, seed)
    rows = []
    ric_num = g_num = p_num = 0.0
    weyl_max = cy_max = trace_max = recon = 0.0
    packs = [curvature_pack(m, p, with_derivatives=m.n >= 3) for p in pts]
    for pk in packs:
        ric_num += float(np.sum(pk.ricci * pk.g))
        g_num += float(np.sum(pk.g * pk.g))
        row = {"point": pk.point, "ricci": pk.ricci, "scalar": pk.scalar}
        if pk.schouten is not None:
            row["schouten"] = pk.schouten
            p_num += float(np.sum(pk.schouten * pk.g))
            weyl_max = max(weyl_max, float(np.abs(pk.weyl).max()))
            cy_max = max(cy_max, float(np.abs(pk.cotton_york).max()))
            trace_max = max(trace_max, float(np.abs(np.einsum("aaij->ij", pk.weyl_mixed)).max()))
            recon = max(recon, float(np.abs(
                reconstruct_riemann(pk.weyl, pk.schouten, pk.g) - lower_riemann(pk.riemann, pk.g)).max()))
        rows.append(row)
    lam = ric_num / g_num
    spread = max(float(np.abs(pk.ricci - lam * pk.g).max()) for pk in packs) / max(1.0, abs(lam))
    out = {
        "metric": m.label,
        "n": m.n,
        "seed": seed,
        "lambda": lam,
        "einstein_spread": spread,
        "einstein": spread < 1e-6,
        "points": rows,
    }
    if m.n >= 3:
        out.update({
            "P_coeff": p_num / g_num,
            "weyl_max": weyl_max,
            "cotton_york_max": cy_max,
            "invariants": {"weyl_trace_max": trace_max, "riemann_reconstruction": recon},
        })
    return out


def cmd_classify(m: geo.MetricSpec, order: int = 2, tol: float = 1e-7, kind: str = "tractor",
                 method: str = "infinitesimal", steps: int = 400, seed: int = 0) -> dict:
    if method == "loop":
        basis = hol.loop_algebra(m, m.basepoint, steps=steps, tol=tol, kind=kind)
    else:
        basis = hol.infinitesimal_algebra(m, m.basepoint, order, tol, kind)
    cls = hol.classify(basis, seed=seed)
    out = hol.algebra_report(basis, cls)
    out.update({"metric": m.label, "kind": kind, "method": method,
                "skew_residual": basis.skew_residual(), "closure_residual": basis.closure_residual()})
    if kind == "tractor" and cls.fixed and any(f.sign == 0 for f in cls.fixed):
        try:
            mb = hol.metric_algebra(m, m.basepoint, order, tol)
            out["metric_dim"] = mb.dim
            out["projection_check"] = hol.projection_check(basis, mb, m)
        except geo.GeometryError as err:
            out["projection_check"] = f"refused: {err}"
    return out


def parse_curve(m: geo.MetricSpec, spec: str) -> list[np.ndarray]:
    """``coord-rectangle i j s`` or ``x1,x2,..;y1,y2,..;...`` waypoints."""
    words = spec.split()
    if words and words[0] == "coord-rectangle":
        if len(words) != 4:
            raise CliError("coord-rectangle needs i j s")
        return coord_rectangle(m, int(words[1]), int(words[2]), float(words[3]))
    pts = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if chunk == "base":
            pts.append(np.asarray(m.basepoint.coords))
            continue
        vals = [float(v) for v in chunk.split(",")]
        if len(vals) != m.n:
            raise CliError(f"waypoint {chunk!r} has {len(vals)} coordinates, expected {m.n}")
        pts.append(np.array(vals))
    if not pts:
        raise CliError("empty curve")
    return pts


def cmd_transport(m: geo.MetricSpec, curve: str, components: str, steps: int = 1000,
                  kind: str = "tractor") -> dict:
    pts = parse_curve(m, curve)
    u0 = np.array([float(v) for v in components.split(",")])
    r = transport(m, pts, u0, steps, kind=kind)
    return {
        "metric": m.label,
        "kind": kind,
        "steps": steps,
        "waypoints": pts,
        "initial": u0,
        "final": r.u,
        "change": float(np.abs(r.u - u0).max()),
        "norm_drift": r.drift,
        "richardson": r.richardson,
        "length": r.length,
    }


def cmd_cone(m: geo.MetricSpec, points: int = 20, seed: int = 0, order: int = 2,
             tol: float = 1e-7, holonomy: bool = True) -> tuple[dict, str]:
    c = cn.build_cone(m, points, seed)
    mid = [cn.verify_cone_christoffels(c, cn.cone_point(c, t))["max"] for t in (0.5, 1.0, 2.0)]
    rep = {
        "base": m.label,
        "lambda": c.lam,
        "mu": c.mu,
        "einstein_spread": c.spread,
        "christoffel_residual": max(mid),
        "ricci_max": cn.verify_ricci_flat(c, points, seed),
        "radial_curvature": cn.radial_curvature(c, 3, seed),
    }
    if holonomy:
        rep["holonomy"] = cn.verify_holonomy_isomorphism(m, tol, order, cone=c).as_dict()
    return rep, geo.format_manifest(c.metric)


def cmd_product(m1: geo.MetricSpec, m2: geo.MetricSpec, blocks: bool = False, points: int = 10,
                seed: int = 0, order: int = 2, tol: float = 1e-7) -> tuple[dict, str]:
    m = geo.product(m1, m2)
    rep: dict = {"factors": [m1.label, m2.label], "n": m.n, "l": m1.n}
    try:
        pres = pr.verify_p_restriction(m1, m2, points, seed)
    except cn.NotEinsteinError as err:
        rep["einstein"] = f"not Einstein: {err}"
        return rep, geo.format_manifest(m)
    rep.update({
        "lambda": [pres.lam1, pres.lam2],
        "relation": pres.relation,
        "p_restriction_residual": pres.residual,
        "p_restriction_predicted": pres.predicted,
        "scalar_additivity": pr.scalar_additivity(m1, m2, 3, seed),
    })
    if m.n >= 3:
        rep["tractor_curvature_max"] = max(
            float(np.abs(tractor_curvature(m, p)).max()) for p in _points(m, 3, seed))
    if blocks:
        rep["blocks"] = pr.verify_block_holonomy(m1, m2, tol, order).as_dict()
    return rep, geo.format_manifest(m)


# ----------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--points", type=int, default=5, help="sample points")
    common.add_argument("--order", type=int, default=2, help="covariant derivative order")
    common.add_argument("--tol", type=float, default=1e-7, help="rank tolerance")
    common.add_argument("--steps", type=int, default=1000, help="RK4 steps")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")

    ap = argparse.ArgumentParser(prog="tractorkit", description="Conformal tractor calculus toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", parents=[common], help="curvature tensors at sample points")
    p.add_argument("manifest")

    p = sub.add_parser("classify", parents=[common], help="holonomy algebra and its label")
    p.add_argument("manifest")
    p.add_argument("--kind", choices=("tractor", "metric"), default="tractor")
    p.add_argument("--method", choices=("infinitesimal", "loop"), default="infinitesimal")

    p = sub.add_parser("transport", parents=[common], help="parallel transport along a curve")
    p.add_argument("manifest")
    p.add_argument("--curve", required=True, help="'coord-rectangle i j s' or 'x,..;y,..;...'")
    p.add_argument("--components", required=True, help="comma-separated initial components")
    p.add_argument("--kind", choices=("tractor", "metric"), default="tractor")

    p = sub.add_parser("cone", parents=[common], help="metric cone over an Einstein base")
    p.add_argument("manifest")
    p.add_argument("--emit", help="write the cone manifest to this path")
    p.add_argument("--no-holonomy", action="store_true")

    p = sub.add_parser("product", parents=[common], help="product of two Einstein factors")
    p.add_argument("manifest1")
    p.add_argument("manifest2")
    p.add_argument("--emit", help="write the product manifest to this path")
    p.add_argument("--blocks", action="store_true", help="also compute the block holonomy")

    p = sub.add_parser("catalogue", help="built-in metrics")
    p.add_argument("action", choices=("list",))
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    return ap


def run(argv=None) -> dict:
    args = _parser().parse_args(argv)
    if args.command == "catalogue":
        return {"catalogue": dict(geo.CATALOGUE_HELP)}
    if args.command == "curvature":
        return cmd_curvature(load(args.manifest), args.points, args.seed)
    if args.command == "classify":
        return cmd_classify(load(args.manifest), args.order, args.tol, args.kind, args.method,
                            min(args.steps, 400) if args.method == "loop" else args.steps, args.seed)
    if args.command == "transport":
        return cmd_transport(load(args.manifest), args.curve, args.components, args.steps, args.kind)
    if args.command == "cone":
        rep, text = cmd_cone(load(args.manifest), max(args.points, 1), args.seed, args.order, args.tol,
                             not args.no_holonomy)
    else:
        rep, text = cmd_product(load(args.manifest1), load(args.manifest2), args.blocks,
                                args.points, args.seed, args.order, args.tol)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(text)
        rep["manifest_path"] = args.emit
    else:
        rep["manifest"] = text
    return rep


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _parser().parse_args(argv)
        rep = run(argv)
    except (geo.GeometryError, ExprError, CliError, ValueError) as err:
        print(f"tractorkit: error: {err}", file=sys.stderr)
        return 2
    text = to_text(rep) if args.format == "text" else to_json(rep)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
