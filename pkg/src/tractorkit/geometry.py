"""Chart-level Riemannian metrics.

A :class:`MetricSpec` is a symmetric matrix of expressions over named chart
coordinates, together with an open coordinate box and a base point.  This
module evaluates the metric and its derivatives, performs conformal
rescaling, hosts the built-in catalogue and reads/writes manifest files.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as ex
from .taylor import expression_jets


class GeometryError(ValueError):
    pass


class DomainError(GeometryError):
    pass


class NotPositiveDefiniteError(GeometryError):
    pass


class ManifestError(GeometryError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class Point:
    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def as_point(p) -> np.ndarray:
    return np.asarray(p.coords if isinstance(p, Point) else p, dtype=float)


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Metric ``g_ij(x)`` on an open coordinate box."""

    n: int
    coords: tuple[str, ...]
    g: tuple[tuple[ex.Expr, ...], ...]
    domain: tuple[tuple[float, float], ...]
    basepoint: Point
    label: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise GeometryError("dimension must be at least 2")
        if len(self.coords) != self.n or len(set(self.coords)) != self.n:
            raise GeometryError("need n distinct coordinate names")
        if len(self.g) != self.n or any(len(row) != self.n for row in self.g):
            raise GeometryError("metric must be an n x n matrix")
        for i, j in itertools.product(range(self.n), repeat=2):
            if self.g[i][j] != self.g[j][i]:
                raise GeometryError(f"metric not symmetric at ({i},{j})")
            if any(k >= self.n for k in ex.variables(self.g[i][j])):
                raise GeometryError(f"metric entry ({i},{j}) uses an undeclared coordinate")
        if len(self.domain) != self.n or any(lo >= hi for lo, hi in self.domain):
            raise GeometryError("domain must be n non-empty open intervals")
        if not isinstance(self.basepoint, Point):
            object.__setattr__(self, "basepoint", Point(self.basepoint))
        check_domain(self, self.basepoint)
        metric_at(self, self.basepoint)

    # per-order compiled evaluators, shared by every caller of this spec
    @cached_property
    def _entries(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i, self.n)]

    def _derivative_exprs(self, order: int) -> list[ex.Expr]:
        out = []
        for multi in itertools.combinations_with_replacement(range(self.n), order):
            for i, j in self._entries:
                out.append(ex.partial(self.g[i][j], multi))
        return out

    @cached_property
    def _compiled(self) -> dict:
        return {}

    def evaluator(self, order: int):
        if order not in self._compiled:
            self._compiled[order] = ex.compile_exprs(self._derivative_exprs(order), self.n)
        return self._compiled[order]

    def entry(self, i: int, j: int) -> ex.Expr:
        return self.g[i][j]


@dataclass(frozen=True)
class ConformalRescale:
    """New metric is ``exp(2 f) g``; ``upsilon`` holds the partials of f."""

    f: ex.Expr
    upsilon: tuple[ex.Expr, ...]


def check_domain(m: MetricSpec, p) -> np.ndarray:
    x = as_point(p)
    if x.shape != (m.n,):
        raise DomainError(f"point has {x.size} coordinates, metric has dimension {m.n}")
    for k, (lo, hi) in enumerate(m.domain):
        if not lo < x[k] < hi:
            raise DomainError(f"coordinate {m.coords[k]}={x[k]} outside ({lo}, {hi})")
    return x


def _fill_index(m: MetricSpec, order: int) -> np.ndarray:
    """Position of each full-array entry in the compiled value list."""
    cache = m._compiled
    key = ("fill", order)
    if key not in cache:
        n = m.n
        idx = np.empty((n,) * order + (n, n), dtype=int)
        pos = 0
        for multi in itertools.combinations_with_replacement(range(n), order):
            for i, j in m._entries:
                for perm in set(itertools.permutations(multi)):
                    idx[perm + (i, j)] = pos
                    idx[perm + (j, i)] = pos
                pos += 1
        cache[key] = idx
    return cache[key]


def _fill(m: MetricSpec, values: Sequence[float], order: int) -> np.ndarray:
    return np.asarray(values, dtype=float)[_fill_index(m, order)]


def _evaluate_order(m: MetricSpec, x: np.ndarray, order: int) -> np.ndarray:
    try:
        vals = m.evaluator(order)(x)
    except ex.SingularityError as err:
        raise GeometryError(f"singular metric expression at {tuple(x)}: {err}") from None
    return _fill(m, vals, order)


def metric_at(m: MetricSpec, p, check: bool = True) -> np.ndarray:
    """Symmetric positive-definite matrix ``g_ij(p)``."""
    x = check_domain(m, p)
    g = _evaluate_order(m, x, 0)
    if check:
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(f"metric {m.label!r} not positive definite at {tuple(x)}") from None
    return g


def inverse_metric_at(m: MetricSpec, p) -> np.ndarray:
    g = metric_at(m, p)
    ginv = np.linalg.inv(g)
    return 0.5 * (ginv + ginv.T)


def metric_derivs_at(m: MetricSpec, p, order: int = 1):
    """Return ``(dg, ddg, dddg)[:order]``; ``dg[a, i, j] = d_a g_ij`` and so on."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = check_domain(m, p)
    return tuple(_evaluate_order(m, x, k) for k in range(1, order + 1))


def metric_jets(m: MetricSpec, p, degree: int) -> np.ndarray:
    """Taylor jet of the metric at p, shape (n, n, size)."""
    x = check_domain(m, p)
    flat = [m.g[i][j] for i in range(m.n) for j in range(m.n)]
    jets = expression_jets(flat, x, degree)
    return jets.reshape(m.n, m.n, -1)


def sample_points(m: MetricSpec, count: int, seed: int = 0, margin: float = 0.1) -> list[np.ndarray]:
    """Uniform points in the interior of the domain box (shrunk by ``margin``)."""
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in m.domain])
    hi = np.array([b for _, b in m.domain])
    width = hi - lo
    lo, hi = lo + margin * width, hi - margin * width
    return [lo + (hi - lo) * rng.random(m.n) for _ in range(count)]


# ------------------------------------------------------------- constructors


def make_metric(entries, coords, domain, basepoint, label="") -> MetricSpec:
    """Build a MetricSpec from a full (or upper-triangular) matrix of expressions."""
    n = len(coords)
    rows = [[ex.ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            e = entries[i][j]
            if e is None:
                e = entries[j][i] if entries[j][i] is not None else 0.0
            rows[i][j] = rows[j][i] = ex.as_expr(e)
    return MetricSpec(
        n=n,
        coords=tuple(coords),
        g=tuple(tuple(r) for r in rows),
        domain=tuple((float(a), float(b)) for a, b in domain),
        basepoint=Point(basepoint),
        label=label,
    )


def diagonal_metric(diag, coords, domain, basepoint, label="") -> MetricSpec:
    n = len(diag)
    entries = [[diag[i] if i == j else 0.0 for j in range(n)] for i in range(n)]
    return make_metric(entries, coords, domain, basepoint, label)


def flat(n: int) -> MetricSpec:
    coords = [f"x{k + 1}" for k in range(n)]
    base = [0.1 * (k + 1) for k in range(n)]
    return diagonal_metric([1.0] * n, coords, [(-3.0, 3.0)] * n, base, label=f"R^{n}")


def sphere(n: int, radius: float = 1.0) -> MetricSpec:
    """Round sphere in polar coordinates theta1..theta_{n-1}, phi."""
    if n < 2:
        raise GeometryError("sphere needs n >= 2")
    coords = [f"theta{k + 1}" for k in range(n - 1)] + ["phi"]
    r2 = radius * radius
    diag = []
    warp = ex.const(r2)
    for k in range(n):
        diag.append(warp)
        if k < n - 1:
            warp = warp * ex.sin(ex.var(k)) ** 2
    eps = 0.2
    domain = [(eps, math.pi - eps)] * (n - 1) + [(-3.0, 3.0)]
    base = [math.pi / 2] * (n - 1) + [0.0]
    label = f"S^{n}" if radius == 1.0 else f"S^{n}({radius:g})"
    return diagonal_metric(diag, coords, domain, base, label)


def hyperbolic(n: int, curvature: float = -1.0) -> MetricSpec:
    """Half-space model with sectional curvature ``curvature`` < 0."""
    if curvature >= 0:
        raise GeometryError("hyperbolic curvature must be negative")
    coords = [f"u{k + 1}" for k in range(n - 1)] + ["y"]
    y = ex.var(n - 1)
    conf = ex.const(1.0 / -curvature) / y**2
    domain = [(-2.0, 2.0)] * (n - 1) + [(0.3, 3.0)]
    base = [0.0] * (n - 1) + [1.0]
    label = f"H^{n}" if curvature == -1.0 else f"H^{n}({curvature:g})"
    return diagonal_metric([conf] * n, coords, domain, base, label)


def eguchi_hanson(a: float = 1.0) -> MetricSpec:
    """Eguchi-Hanson metric in radial/Euler coordinates (r, theta, phi, psi)."""
    r, th = ex.var(0), ex.var(1)
    F = 1.0 - (a**4) / r**4
    q = r**2 / 4.0
    g_rr = 1.0 / F
    g_thth = q
    g_phph = q * (ex.sin(th) ** 2 + F * ex.cos(th) ** 2)
    g_psps = q * F
    g_phps = q * F * ex.cos(th)
    z = ex.ZERO
    entries = [
        [g_rr, z, z, z],
        [z, g_thth, z, z],
        [z, z, g_phph, g_phps],
        [z, z, g_phps, g_psps],
    ]
    domain = [(1.1 * a, 4.0 * a), (0.2, math.pi - 0.2), (-3.0, 3.0), (-3.0, 3.0)]
    base = [1.5 * a, 1.0, 0.3, 0.2]
    return make_metric(entries, ["r", "theta", "phi", "psi"], domain, base, label=f"EH({a:g})")


def _unique_names(names: Sequence[str], taken: set[str]) -> list[str]:
    out = []
    for name in names:
        new = name
        k = 2
        while new in taken:
            new = f"{name}_{k}"
            k += 1
        taken.add(new)
        out.append(new)
    return out


def product(m1: MetricSpec, m2: MetricSpec) -> MetricSpec:
    """Riemannian product: block-diagonal metric on the concatenated chart."""
    n = m1.n + m2.n
    taken = set(m1.coords)
    coords = list(m1.coords) + _unique_names(m2.coords, taken)
    rows = [[ex.ZERO] * n for _ in range(n)]
    for i in range(m1.n):
        for j in range(m1.n):
            rows[i][j] = m1.g[i][j]
    for i in range(m2.n):
        for j in range(m2.n):
            rows[m1.n + i][m1.n + j] = ex.shift_variables(m2.g[i][j], m1.n)
    return MetricSpec(
        n=n,
        coords=tuple(coords),
        g=tuple(tuple(r) for r in rows),
        domain=m1.domain + m2.domain,
        basepoint=Point(m1.basepoint.coords + m2.basepoint.coords),
        label=f"{m1.label}x{m2.label}",
    )


def rescale(m: MetricSpec, f: ex.Expr, label: str | None = None) -> tuple[MetricSpec, ConformalRescale]:
    """Conformal change to ``exp(2 f) g``."""
    factor = ex.exp(ex.mul(ex.const(2.0), f)) if not f.is_const else ex.const(math.exp(2.0 * f.value))
    rows = tuple(tuple(ex.mul(factor, m.g[i][j]) for j in range(m.n)) for i in range(m.n))
    new = MetricSpec(
        n=m.n,
        coords=m.coords,
        g=rows,
        domain=m.domain,
        basepoint=m.basepoint,
        label=label if label is not None else f"exp(2f)*{m.label}",
    )
    ups = tuple(ex.differentiate(f, i) for i in range(m.n))
    return new, ConformalRescale(f=f, upsilon=ups)


def restrict(m: MetricSpec, fixed: dict[int, float], label: str | None = None) -> MetricSpec:
    """Induced metric on a coordinate slice where the given coordinates are frozen."""
    keep = [k for k in range(m.n) if k not in fixed]
    mapping = {k: ex.const(v) for k, v in fixed.items()}
    mapping.update({k: ex.var(new) for new, k in enumerate(keep)})
    rows = tuple(tuple(ex.substitute(m.g[i][j], mapping) for j in keep) for i in keep)
    return MetricSpec(
        n=len(keep),
        coords=tuple(m.coords[k] for k in keep),
        g=rows,
        domain=tuple(m.domain[k] for k in keep),
        basepoint=Point([m.basepoint.coords[k] for k in keep]),
        label=label if label is not None else f"{m.label}|slice",
    )


# ------------------------------------------------------------- catalogue

CATALOGUE_HELP = {
    "flat:N": "Euclidean R^N",
    "sphere:N[:R]": "round N-sphere of radius R in polar coordinates",
    "hyperbolic:N[:K]": "half-space model with curvature K < 0",
    "eguchi_hanson[:A]": "Eguchi-Hanson gravitational instanton",
    "A*B": "Riemannian product of two catalogue entries",
}


def from_catalogue(name: str) -> MetricSpec:
    """Resolve a catalogue key such as ``sphere:3*sphere:3`` or ``hyperbolic:4:-1``."""
    if "*" in name:
        parts = name.split("*")
        m = from_catalogue(parts[0])
        for part in parts[1:]:
            m = product(m, from_catalogue(part))
        return m
    head, *args = name.strip().split(":")
    try:
        nums = [float(a) for a in args]
    except ValueError:
        raise GeometryError(f"bad catalogue arguments in {name!r}") from None
    if head == "flat" and len(nums) == 1:
        return flat(int(nums[0]))
    if head == "sphere" and len(nums) in (1, 2):
        return sphere(int(nums[0]), *nums[1:])
    if head == "hyperbolic" and len(nums) in (1, 2):
        return hyperbolic(int(nums[0]), *nums[1:])
    if head == "eguchi_hanson" and len(nums) <= 1:
        return eguchi_hanson(*nums)
    raise GeometryError(f"unknown catalogue entry {name!r}")


# -------------------------------------------------------------- manifests


def parse_manifest(text: str) -> MetricSpec:
    """Read the line-oriented manifest format (see README)."""
    fields: dict[str, tuple[str, int]] = {}
    metric: dict[tuple[int, int], tuple[str, int]] = {}
    domain: dict[int, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("metric["):
            try:
                i, j = (int(s) for s in key[len("metric["):].rstrip("]").split("]["))
            except ValueError:
                raise ManifestError(f"bad metric key {key!r}", lineno) from None
            if i > j:
                raise ManifestError("only metric[i][j] with i <= j may be given", lineno)
            metric[(i, j)] = (value, lineno)
        elif key.startswith("domain["):
            try:
                k = int(key[len("domain["):].rstrip("]"))
            except ValueError:
                raise ManifestError(f"bad domain key {key!r}", lineno) from None
            domain[k] = (value, lineno)
        elif key in ("dimension", "coords", "basepoint", "label"):
            fields[key] = (value, lineno)
        else:
            raise ManifestError(f"unknown key {key!r}", lineno)
    for required in ("dimension", "coords", "basepoint"):
        if required not in fields:
            raise ManifestError(f"missing {required!r}")
    try:
        n = int(fields["dimension"][0])
    except ValueError:
        raise ManifestError("dimension must be an integer", fields["dimension"][1]) from None
    coords = [c.strip() for c in fields["coords"][0].split(",")]
    if len(coords) != n:
        raise ManifestError(f"expected {n} coordinate names", fields["coords"][1])
    entries = [[None] * n for _ in range(n)]
    for (i, j), (src, lineno) in metric.items():
        if not (0 <= i < n and 0 <= j < n):
            raise ManifestError(f"metric index out of range", lineno)
        try:
            entries[i][j] = ex.simplify(ex.parse(src, coords))
        except ex.ParseError as err:
            raise ManifestError(f"metric[{i}][{j}]: {err}", lineno) from None
    box = []
    for k in range(n):
        if k not in domain:
            raise ManifestError(f"missing domain[{k}]")
        src, lineno = domain[k]
        try:
            lo, hi = (float(s) for s in src.split(","))
        except ValueError:
            raise ManifestError("domain must be 'lo, hi'", lineno) from None
        box.append((lo, hi))
    try:
        base = [float(s) for s in fields["basepoint"][0].split(",")]
    except ValueError:
        raise ManifestError("basepoint must be numbers", fields["basepoint"][1]) from None
    label = fields.get("label", ("", 0))[0]
    full = [[entries[i][j] if i <= j else None for j in range(n)] for i in range(n)]
    try:
        return make_metric(full, coords, box, base, label)
    except GeometryError as err:
        raise ManifestError(str(err)) from None


def load_manifest(path) -> MetricSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def format_manifest(m: MetricSpec) -> str:
    lines = [f"# {m.label}" if m.label else "# metric manifest"]
    lines.append(f"dimension = {m.n}")
    lines.append(f"coords = {', '.join(m.coords)}")
    for i in range(m.n):
        for j in range(i, m.n):
            e = m.g[i][j]
            if e == ex.ZERO:
                continue
            lines.append(f"metric[{i}][{j}] = {ex.to_string(e, m.coords)}")
    for k, (lo, hi) in enumerate(m.domain):
        lines.append(f"domain[{k}] = {lo!r}, {hi!r}")
    lines.append(f"basepoint = {', '.join(repr(c) for c in m.basepoint.coords)}")
    if m.label:
        lines.append(f"label = {m.label}")
    return "\n".join(lines) + "\n"
