"""Visibility regions under unlimited, limited-range, and
localization-uncertainty models.

Unlimited visibility is computed by triangular expansion over the
environment's CDT (built once per environment and shared). Limited range
intersects with an inscribed polygonal approximation of the range disk;
uncertainty intersects the limited regions of the guard and of boundary
samples of its uncertainty disk that remain visible from the guard.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import shapely
from shapely.geometry import LineString, Polygon as ShapelyPolygon

from .errors import PointOutsideEnvironment, ValidationError
from .geom import Environment, Point, Region, _clean, _snap
from .mesh import TriMesh, env_mesh, locate_point

#: Default max arc-sample spacing: a 12-gon for the smallest studied range d=4.
D_SAMP_DEFAULT = 4 * 2 * math.pi / 12

#: Default max uncertainty-boundary spacing: >= 4 samples for r=0.1.
R_SAMP_DEFAULT = 0.1 * 2 * math.pi / 4

UNLIMITED = "unlimited"
LIMITED = "limited"
UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class VisibilityModelSpec:
    """Which visibility model to use, plus approximation parameters."""

    kind: str
    d: float = math.inf
    r: float = 0.0
    d_samp: float = D_SAMP_DEFAULT
    r_samp: float = R_SAMP_DEFAULT

    def __post_init__(self):
        if self.kind not in (UNLIMITED, LIMITED, UNCERTAIN):
            raise ValidationError(f"unknown visibility kind {self.kind!r}")
        if self.d_samp <= 0 or self.r_samp <= 0:
            raise ValidationError("sampling spacings must be positive")
        if self.kind == UNLIMITED:
            if math.isfinite(self.d) or self.r != 0:
                raise ValidationError("unlimited model must have d=inf, r=0")
        if self.kind == LIMITED:
            if not (self.d > 0) or not math.isfinite(self.d):
                raise ValidationError("limited model needs finite d > 0")
            if self.r != 0:
                raise ValidationError("limited model must have r=0")
        if self.kind == UNCERTAIN:
            if self.r < 0:
                raise ValidationError("uncertainty radius must be >= 0")
            if not (self.d > self.r):
                raise ValidationError("uncertain model needs d > r")

    @staticmethod
    def unlimited() -> "VisibilityModelSpec":
        return VisibilityModelSpec(UNLIMITED)

    @staticmethod
    def limited(d: float, d_samp: float = D_SAMP_DEFAULT) -> "VisibilityModelSpec":
        return VisibilityModelSpec(LIMITED, d=d, d_samp=d_samp)

    @staticmethod
    def uncertain(
        d: float,
        r: float,
        d_samp: float = D_SAMP_DEFAULT,
        r_samp: float = R_SAMP_DEFAULT,
    ) -> "VisibilityModelSpec":
        return VisibilityModelSpec(UNCERTAIN, d=d, r=r, d_samp=d_samp, r_samp=r_samp)

    def to_string(self) -> str:
        if self.kind == UNLIMITED:
            return "unlimited"
        parts = [f"d={self.d:g}"]
        if self.kind == UNCERTAIN:
            parts.append(f"r={self.r:g}")
        if self.d_samp != D_SAMP_DEFAULT:
            parts.append(f"dsamp={self.d_samp:g}")
        if self.kind == UNCERTAIN and self.r_samp != R_SAMP_DEFAULT:
            parts.append(f"rsamp={self.r_samp:g}")
        return f"{self.kind}:" + ",".join(parts)


def parse_model(text: str) -> VisibilityModelSpec:
    """Parse a model string: ``unlimited``, ``limited:d=16``,
    ``uncertain:d=16,r=0.4`` with optional ``dsamp=`` / ``rsamp=`` keys."""
    text = text.strip()
    head, _, rest = text.partition(":")
    head = head.lower()
    kv: dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not v:
                raise ValidationError(f"bad model parameter {item!r} in {text!r}")
            try:
                kv[k.strip().lower()] = float(v)
            except ValueError as exc:
                raise ValidationError(f"bad model parameter {item!r} in {text!r}") from exc
    d_samp = kv.pop("dsamp", D_SAMP_DEFAULT)
    r_samp = kv.pop("rsamp", R_SAMP_DEFAULT)
    if head == UNLIMITED:
        if kv:
            raise ValidationError(f"unlimited model takes no d/r parameters: {text!r}")
        return VisibilityModelSpec(UNLIMITED, d_samp=d_samp, r_samp=r_samp)
    if head == LIMITED:
        if "d" not in kv:
            raise ValidationError(f"limited model needs d=<m>: {text!r}")
        return VisibilityModelSpec(LIMITED, d=kv.pop("d"), d_samp=d_samp, r_samp=r_samp)
    if head == UNCERTAIN:
        if "r" not in kv:
            raise ValidationError(f"uncertain model needs r=<m>: {text!r}")
        d = kv.pop("d", math.inf)
        return VisibilityModelSpec(
            UNCERTAIN, d=d, r=kv.pop("r"), d_samp=d_samp, r_samp=r_samp
        )
    raise ValidationError(f"unknown visibility model {text!r}")


@dataclass(frozen=True)
class VisibilityRegion:
    region: Region
    guard: Point
    model: VisibilityModelSpec


def arc_segments(radius: float, spacing: float) -> int:
    """Chord count approximating a full circle with spacing <= `spacing`.

    A small slack absorbs float error so that e.g. d=4 with the default
    spacing yields exactly 12 sides.
    """
    return max(3, math.ceil(2 * math.pi * radius / spacing - 1e-9))


def disk_polygon(cx: float, cy: float, radius: float, spacing: float) -> ShapelyPolygon:
    """Inscribed regular polygon approximating the disk (vertices on the circle)."""
    m = arc_segments(radius, spacing)
    pts = [
        (cx + radius * math.cos(2 * math.pi * k / m), cy + radius * math.sin(2 * math.pi * k / m))
        for k in range(m)
    ]
    return ShapelyPolygon(pts)


def _orient(px, py, qx, qy, rx, ry) -> float:
    return (qx - px) * (ry - py) - (qy - py) * (rx - px)


def _ray_hit(px, py, wx, wy, ax, ay, bx, by) -> tuple[float, float]:
    """Intersection of the ray p->w with segment a-b (clamped to the segment)."""
    dx, dy = wx - px, wy - py
    ex, ey = bx - ax, by - ay
    denom = ex * dy - dx * ey
    if denom == 0.0:
        return (ax, ay)
    s = (dx * (ay - py) - dy * (ax - px)) / denom
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    return (ax + s * ex, ay + s * ey)


def _entry_slot(mesh: TriMesh, t: int, nb: int) -> int:
    for s in range(3):
        if mesh.neighbors[nb][s] == t:
            return s
    raise AssertionError("adjacency tables inconsistent")


def _expand(mesh: TriMesh, px: float, py: float, initial_tasks: list) -> list[tuple[float, float]]:
    """Run triangular expansion; returns the boundary chain in CCW order."""
    pts = mesh.points
    tri_idx = mesh.tri_idx
    neighbors = mesh.neighbors
    out: list[tuple[float, float]] = []
    stack = list(reversed(initial_tasks))
    while stack:
        task = stack.pop()
        if task[0] == 1:  # apex emission
            out.append((task[1], task[2]))
            continue
        _, t, slot, wrx, wry, wlx, wly = task
        if _orient(px, py, wrx, wry, wlx, wly) <= 0.0:
            continue  # zero-width window
        nb = int(neighbors[t][slot])
        if nb < 0:
            out.append((wrx, wry))
            out.append((wlx, wly))
            continue
        s2 = _entry_slot(mesh, t, nb)
        ia, ib, ic = tri_idx[nb][s2], tri_idx[nb][(s2 + 1) % 3], tri_idx[nb][(s2 + 2) % 3]
        ax, ay = pts[ia]
        bx, by = pts[ib]
        cx, cy = pts[ic]
        # Entry edge (a, b) in nb's CCW order: from p, a is the left endpoint,
        # b the right one. Right far edge is (b, c), left far edge (c, a).
        sig_r = _orient(px, py, wrx, wry, cx, cy)
        sig_l = _orient(px, py, wlx, wly, cx, cy)
        right_slot = (s2 + 1) % 3
        left_slot = (s2 + 2) % 3
        if sig_r > 0.0 and sig_l < 0.0:
            # Apex strictly inside the window: split and emit it in between.
            r1 = _ray_hit(px, py, wrx, wry, bx, by, cx, cy)
            l2 = _ray_hit(px, py, wlx, wly, cx, cy, ax, ay)
            stack.append((0, nb, left_slot, cx, cy, l2[0], l2[1]))
            stack.append((1, cx, cy))
            stack.append((0, nb, right_slot, r1[0], r1[1], cx, cy))
        elif sig_l >= 0.0:
            r1 = _ray_hit(px, py, wrx, wry, bx, by, cx, cy)
            l1 = _ray_hit(px, py, wlx, wly, bx, by, cx, cy)
            stack.append((0, nb, right_slot, r1[0], r1[1], l1[0], l1[1]))
        else:
            r1 = _ray_hit(px, py, wrx, wry, cx, cy, ax, ay)
            l1 = _ray_hit(px, py, wlx, wly, cx, cy, ax, ay)
            stack.append((0, nb, left_slot, r1[0], r1[1], l1[0], l1[1]))
    return out


def _edge_task(mesh: TriMesh, t: int, slot: int):
    u = mesh.tri_idx[t][slot]
    w = mesh.tri_idx[t][(slot + 1) % 3]
    ux, uy = mesh.points[u]
    wx, wy = mesh.points[w]
    return (0, t, slot, ux, uy, wx, wy)


_EDGE_EPS = 1e-9


def _initial_tasks(mesh: TriMesh, px: float, py: float) -> tuple[list, bool]:
    """Build the initial task fan; returns (tasks, prepend_guard)."""
    loc = locate_point(mesh, px, py)
    if loc[0] == "vertex":
        return _vertex_fan_tasks(mesh, loc[1])
    hits = loc[1]
    t = hits[0]
    a, b, c = mesh.triangle_coords(t)
    signs = [
        _orient(a[0], a[1], b[0], b[1], px, py),
        _orient(b[0], b[1], c[0], c[1], px, py),
        _orient(c[0], c[1], a[0], a[1], px, py),
    ]
    zero = [e for e in range(3) if abs(signs[e]) <= _EDGE_EPS]
    if not zero:
        return [_edge_task(mesh, t, e) for e in range(3)], False
    e0 = zero[0]
    nb = int(mesh.neighbors[t][e0])
    tasks = [_edge_task(mesh, t, (e0 + 1) % 3), _edge_task(mesh, t, (e0 + 2) % 3)]
    if nb >= 0:
        s2 = _entry_slot(mesh, t, nb)
        tasks.append(_edge_task(mesh, nb, (s2 + 1) % 3))
        tasks.append(_edge_task(mesh, nb, (s2 + 2) % 3))
    return tasks, False


def _vertex_fan_tasks(mesh: TriMesh, v: int) -> tuple[list, bool]:
    fans = mesh.vertex_fans().get(v, [])
    if not fans:
        raise PointOutsideEnvironment("vertex has no incident triangles")
    by_tri = {t: s for t, s in fans}
    # Start at the wall on the clockwise side of the fan, if any.
    start = None
    for t, s in sorted(fans):
        if mesh.neighbors[t][s] < 0:  # edge (v, u) is constrained
            start = (t, s)
            break
    closed_fan = start is None
    if start is None:
        start = sorted(fans)[0]
    tasks = []
    t, s = start
    seen = set()
    while True:
        if t in seen:
            break
        seen.add(t)
        tasks.append(_edge_task(mesh, t, (s + 1) % 3))  # opposite edge
        nxt = int(mesh.neighbors[t][(s + 2) % 3])  # across edge (w, v)
        if nxt < 0:
            break
        t = nxt
        s = by_tri.get(t)
        if s is None:
            break  # inconsistent fan (pinch vertex); stay conservative
        continue
    return tasks, not closed_fan


def _chain_polygon(px: float, py: float, chain: list[tuple[float, float]], prepend: bool):
    pts: list[tuple[float, float]] = [(px, py)] if prepend else []
    for q in chain:
        if pts and abs(q[0] - pts[-1][0]) < 1e-12 and abs(q[1] - pts[-1][1]) < 1e-12:
            continue
        pts.append(q)
    while len(pts) > 1 and abs(pts[0][0] - pts[-1][0]) < 1e-12 and abs(pts[0][1] - pts[-1][1]) < 1e-12:
        pts.pop()
    if len(pts) < 3:
        return None
    return ShapelyPolygon(pts)


def _env_snapped(env: Environment):
    g = env._cache.get("snapped")
    if g is None:
        g = _snap(env.shapely)
        shapely.prepare(g)
        env._cache["snapped"] = g
    return g


def _raw_visible_polygon(env: Environment, px: float, py: float):
    """Pre-cleaning visibility polygon from triangular expansion."""
    if not env.covers_point(px, py):
        raise PointOutsideEnvironment(f"guard ({px}, {py}) is outside the environment")
    mesh = env_mesh(env)
    tasks, prepend = _initial_tasks(mesh, px, py)
    chain = _expand(mesh, px, py, tasks)
    return _chain_polygon(px, py, chain, prepend)


def _finalize(env: Environment, poly) -> Region:
    if poly is None:
        return Region.empty()
    try:
        snapped = _snap(poly)
    except shapely.errors.GEOSException:
        snapped = _snap(shapely.make_valid(poly))
    clipped = shapely.intersection(snapped, _env_snapped(env))
    return Region(_clean(clipped))


def vis_unlimited(env: Environment, p: Point) -> VisibilityRegion:
    """All points that the segment from `p` reaches inside the environment."""
    poly = _raw_visible_polygon(env, p.x, p.y)
    return VisibilityRegion(_finalize(env, poly), p, VisibilityModelSpec.unlimited())


def _limited_poly(env: Environment, px: float, py: float, d: float, d_samp: float):
    poly = _raw_visible_polygon(env, px, py)
    if poly is None or not math.isfinite(d):
        return poly
    m = arc_segments(d, d_samp)
    coords = poly.exterior.coords
    max_d2 = max((x - px) ** 2 + (y - py) ** 2 for x, y in coords)
    inradius = d * math.cos(math.pi / m)
    if max_d2 <= inradius * inradius:
        return poly  # range exceeds everything visible; disk clip is a no-op
    return shapely.intersection(_snap(poly), _snap(disk_polygon(px, py, d, d_samp)))


def vis_limited(env: Environment, p: Point, spec: VisibilityModelSpec) -> VisibilityRegion:
    """Visibility limited to range `spec.d`, arcs approximated by inscribed chords."""
    if spec.kind != LIMITED:
        raise ValidationError("vis_limited needs a limited-kind model spec")
    poly = _limited_poly(env, p.x, p.y, spec.d, spec.d_samp)
    return VisibilityRegion(_finalize(env, poly), p, spec)


def uncertainty_samples(
    env: Environment, g: Point, r: float, r_samp: float
) -> list[tuple[float, float]]:
    """The guard plus boundary samples of its uncertainty disk that are
    mutually visible with the guard; blocked samples are dropped."""
    samples = [(g.x, g.y)]
    if r <= 0:
        return samples
    m = arc_segments(r, r_samp)
    geom = _env_snapped(env)
    for k in range(m):
        ang = 2 * math.pi * k / m
        sx, sy = g.x + r * math.cos(ang), g.y + r * math.sin(ang)
        if shapely.covers(geom, LineString([(g.x, g.y), (sx, sy)])):
            samples.append((sx, sy))
    return samples


def vis_uncertain(env: Environment, g: Point, spec: VisibilityModelSpec) -> VisibilityRegion:
    """Intersection of limited-visibility regions over the guard and its
    visible uncertainty-boundary samples."""
    if spec.kind != UNCERTAIN:
        raise ValidationError("vis_uncertain needs an uncertain-kind model spec")
    samples = uncertainty_samples(env, g, spec.r, spec.r_samp)
    acc = None
    for sx, sy in samples:
        poly = _limited_poly(env, sx, sy, spec.d, spec.d_samp)
        if poly is None:
            return VisibilityRegion(Region.empty(), g, spec)
        geom = _snap(poly)
        acc = geom if acc is None else shapely.intersection(acc, geom)
        if acc.is_empty:
            return VisibilityRegion(Region.empty(), g, spec)
    return VisibilityRegion(_finalize(env, acc), g, spec)


def visibility_region(env: Environment, p: Point, spec: VisibilityModelSpec) -> VisibilityRegion:
    """Dispatch to the right model implementation."""
    if spec.kind == UNLIMITED:
        region = vis_unlimited(env, p)
        return VisibilityRegion(region.region, p, spec)
    if spec.kind == LIMITED:
        return vis_limited(env, p, spec)
    return vis_uncertain(env, p, spec)
