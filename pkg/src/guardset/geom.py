"""Planar geometry core: points, rings, environments, regions.

All clipping runs on coordinates snapped to a 1e-6 m grid (GEOS precision
model), which makes boolean operations robust without exact arithmetic.
Results are cleaned of degenerate parts smaller than ``TAU_AREA``.
Areas are computed with our own shoelace sum so that library-computed
areas can serve as an independent cross-check in tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
import shapely
from shapely.geometry import (
    GeometryCollection,
    LinearRing,
    MultiPolygon,
    Point as ShapelyPoint,
    Polygon as ShapelyPolygon,
)

from .errors import EmptyRegion, GeometryDegenerate, ValidationError

#: Coordinate quantization grid for all clipping operations (meters).
GRID = 1e-6

#: Minimum area of a region part; anything smaller is dropped as an artifact.
TAU_AREA = 1e-9


@dataclass(frozen=True)
class Point:
    """A point in the plane, coordinates in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _dedupe_consecutive(coords: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for c in coords:
        if not out or c != out[-1]:
            out.append(c)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


class Ring:
    """A closed, simple polygonal chain (last vertex implicitly joins the first)."""

    __slots__ = ("_coords",)

    def __init__(self, vertices: Iterable[Point | tuple[float, float]]):
        coords = []
        for v in vertices:
            if isinstance(v, Point):
                coords.append((float(v.x), float(v.y)))
            else:
                x, y = v
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise ValidationError(f"ring vertex must be finite, got ({x}, {y})")
                coords.append((float(x), float(y)))
        coords = _dedupe_consecutive(coords)
        if len(coords) < 3:
            raise ValidationError(f"ring needs at least 3 distinct vertices, got {len(coords)}")
        lr = LinearRing(coords)
        if not lr.is_simple or abs(self._shoelace(coords)) <= 0.0:
            raise ValidationError("ring is self-intersecting or degenerate")
        self._coords = tuple(coords)

    @staticmethod
    def _shoelace(coords: Sequence[tuple[float, float]]) -> float:
        a = 0.0
        n = len(coords)
        for i in range(n):
            x1, y1 = coords[i]
            x2, y2 = coords[(i + 1) % n]
            a += x1 * y2 - x2 * y1
        return 0.5 * a

    @property
    def vertices(self) -> tuple[Point, ...]:
        return tuple(Point(x, y) for x, y in self._coords)

    @property
    def coords(self) -> tuple[tuple[float, float], ...]:
        return self._coords

    def __len__(self) -> int:
        return len(self._coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, Ring) and self._coords == other._coords

    def __hash__(self) -> int:
        return hash(self._coords)

    def signed_area(self) -> float:
        return self._shoelace(self._coords)

    @property
    def is_ccw(self) -> bool:
        return self.signed_area() > 0

    def reversed(self) -> "Ring":
        return Ring(tuple(reversed(self._coords)))

    def oriented(self, ccw: bool) -> "Ring":
        return self if self.is_ccw == ccw else self.reversed()


@dataclass(frozen=True)
class Rect:
    """Axis-aligned bounding box."""

    min: Point
    max: Point

    def __post_init__(self):
        if self.min.x > self.max.x or self.min.y > self.max.y:
            raise ValidationError("rect min must not exceed max")

    @property
    def width(self) -> float:
        return self.max.x - self.min.x

    @property
    def height(self) -> float:
        return self.max.y - self.min.y

    def intersects(self, other: "Rect") -> bool:
        return not (
            self.max.x < other.min.x
            or other.max.x < self.min.x
            or self.max.y < other.min.y
            or other.max.y < self.min.y
        )


def _snap(geom):
    """Quantize a geometry to the clipping grid."""
    return shapely.set_precision(geom, GRID)


def _polygonal_parts(geom) -> list[ShapelyPolygon]:
    """Extract polygon parts from any geometry, dropping lines/points."""
    if geom.is_empty:
        return []
    if isinstance(geom, ShapelyPolygon):
        return [geom]
    if isinstance(geom, (MultiPolygon, GeometryCollection)):
        out = []
        for g in geom.geoms:
            out.extend(_polygonal_parts(g))
        return out
    return []


def _clean(geom) -> MultiPolygon:
    """Drop non-areal pieces and parts below ``TAU_AREA``."""
    parts = [p for p in _polygonal_parts(geom) if p.area >= TAU_AREA]
    return MultiPolygon(parts)


def _ring_coords(lr) -> tuple[tuple[float, float], ...]:
    return tuple((x, y) for x, y in lr.coords[:-1])


class Region:
    """A bounded, closed, possibly disconnected area (multipolygon with holes).

    Wraps a cleaned shapely (multi)polygon; an empty part list denotes the
    empty region.
    """

    __slots__ = ("_geom",)

    def __init__(self, geom=None):
        if geom is None:
            geom = MultiPolygon([])
        if isinstance(geom, ShapelyPolygon):
            geom = MultiPolygon([geom]) if not geom.is_empty else MultiPolygon([])
        if not isinstance(geom, MultiPolygon):
            geom = _clean(geom)
        if not geom.is_empty and not geom.is_valid:
            geom = _clean(shapely.make_valid(geom))
        self._geom = geom

    @classmethod
    def empty(cls) -> "Region":
        return cls(MultiPolygon([]))

    @classmethod
    def from_parts(cls, parts: Iterable[tuple[Ring, Iterable[Ring]]]) -> "Region":
        polys = []
        for outer, holes in parts:
            polys.append(ShapelyPolygon(outer.coords, [h.coords for h in holes]))
        mp = MultiPolygon(polys)
        if polys and not mp.is_valid:
            raise ValidationError("region parts must be valid and pairwise interior-disjoint")
        return cls(mp)

    @property
    def shapely(self) -> MultiPolygon:
        return self._geom

    @property
    def is_empty(self) -> bool:
        return self._geom.is_empty

    @property
    def parts(self) -> tuple[tuple[Ring, tuple[Ring, ...]], ...]:
        out = []
        for poly in self._geom.geoms:
            outer = Ring(_ring_coords(poly.exterior))
            holes = tuple(Ring(_ring_coords(h)) for h in poly.interiors)
            out.append((outer, holes))
        return tuple(out)

    @property
    def area(self) -> float:
        return area(self)

    def bbox(self) -> Rect:
        return bound_box(self)

    def covers_point(self, x: float, y: float) -> bool:
        """Closed-set membership: boundary points count as inside."""
        return bool(shapely.intersects_xy(self._geom, x, y))

    def __eq__(self, other) -> bool:
        return isinstance(other, Region) and shapely.equals(self._geom, other._geom)

    def __hash__(self):
        raise TypeError("Region is not hashable")

    def __repr__(self) -> str:
        return f"Region(parts={len(self._geom.geoms)}, area={self.area:.6g})"


class Environment:
    """A polygon with holes: one outer boundary plus zero or more inner ones.

    The outer ring is stored counterclockwise and holes clockwise; inputs
    are reoriented on ingestion. Invariants (simple rings, holes strictly
    inside, no crossings, connected interior, positive area) are enforced
    at construction.
    """

    __slots__ = ("outer", "holes", "name", "_shapely", "_cache")

    def __init__(self, outer: Ring, holes: Iterable[Ring] = (), name: str = ""):
        self.outer = outer.oriented(ccw=True)
        self.holes = tuple(h.oriented(ccw=False) for h in holes)
        self.name = name
        poly = ShapelyPolygon(self.outer.coords, [h.coords for h in self.holes])
        if not poly.is_valid:
            from shapely.validation import explain_validity

            raise ValidationError(f"invalid environment: {explain_validity(poly)}")
        if poly.area <= 0:
            raise ValidationError("environment must have positive area")
        self._shapely = poly
        shapely.prepare(self._shapely)
        self._cache: dict = {}

    @property
    def shapely(self) -> ShapelyPolygon:
        return self._shapely

    def region(self) -> Region:
        return Region(self._shapely)

    def bbox(self) -> Rect:
        minx, miny, maxx, maxy = self._shapely.bounds
        return Rect(Point(minx, miny), Point(maxx, maxy))

    @property
    def area(self) -> float:
        return area(self.region())

    def covers_point(self, x: float, y: float) -> bool:
        return bool(shapely.intersects_xy(self._shapely, x, y))

    def rings(self) -> tuple[Ring, ...]:
        return (self.outer,) + self.holes

    def __repr__(self) -> str:
        return (
            f"Environment({self.name!r}, vertices={sum(len(r) for r in self.rings())}, "
            f"holes={len(self.holes)})"
        )


def _as_geom(r: Region | Environment):
    if isinstance(r, Environment):
        return r.shapely
    return r.shapely


def area(r: Region | Environment) -> float:
    """Area of a region as a shoelace sum over outer rings minus holes."""
    geom = _as_geom(r)
    if geom.is_empty:
        return 0.0
    total = 0.0
    polys = geom.geoms if isinstance(geom, MultiPolygon) else [geom]
    for poly in polys:
        total += abs(_shoelace_np(np.asarray(poly.exterior.coords)))
        for hole in poly.interiors:
            total -= abs(_shoelace_np(np.asarray(hole.coords)))
    return total


def _shoelace_np(coords: np.ndarray) -> float:
    x = coords[:, 0]
    y = coords[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


ClipOp = Literal["union", "intersection", "difference"]


def clip(op: ClipOp, a: Region, b: Region) -> Region:
    """Boolean operation on regions, on the quantization grid, cleaned."""
    ga, gb = _snap(a.shapely), _snap(b.shapely)
    for src, snapped in ((a, ga), (b, gb)):
        if snapped.is_empty and not src.is_empty and src.area > TAU_AREA:
            raise GeometryDegenerate("input collapsed under coordinate quantization")
    if op == "union":
        out = shapely.union(ga, gb)
    elif op == "intersection":
        out = shapely.intersection(ga, gb)
    elif op == "difference":
        out = shapely.difference(ga, gb)
    else:
        raise ValueError(f"unknown clip op: {op!r}")
    return Region(_clean(out))


def union_all(regions: Iterable[Region]) -> Region:
    """Union of many regions in one pass (same cleaning as :func:`clip`)."""
    geoms = [_snap(r.shapely) for r in regions if not r.is_empty]
    if not geoms:
        return Region.empty()
    return Region(_clean(shapely.union_all(geoms)))


def _perp_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Perpendicular distance of each point to the segment a-b."""
    d = b - a
    L = math.hypot(d[0], d[1])
    if L == 0.0:
        return np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
    return np.abs((pts[:, 0] - a[0]) * d[1] - (pts[:, 1] - a[1]) * d[0]) / L


def _rdp_chain(pts: np.ndarray, tol: float) -> list[int]:
    """Indices kept by Ramer-Douglas-Peucker on an open chain."""
    n = len(pts)
    keep = [0, n - 1]
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        seg = pts[i + 1 : j]
        dists = _perp_distances(seg, pts[i], pts[j])
        k = int(np.argmax(dists))
        if dists[k] > tol:
            mid = i + 1 + k
            keep.append(mid)
            stack.append((i, mid))
            stack.append((mid, j))
    return sorted(set(keep))


def simplify_rdp(ring: Ring, tol: float) -> Ring:
    """Ramer-Douglas-Peucker simplification of a closed ring.

    The ring is anchored at its two most distant vertices so that both
    half-chains simplify independently; removed vertices deviate at most
    ``tol`` from the simplified boundary.
    """
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    coords = list(ring.coords)
    if tol == 0:
        return Ring(coords)
    pts = np.asarray(coords)
    # Anchor at the diameter pair of the ring.
    i0, i1 = _farthest_pair(pts)
    if i0 > i1:
        i0, i1 = i1, i0
    chain1 = pts[i0 : i1 + 1]
    chain2 = np.concatenate([pts[i1:], pts[: i0 + 1]])
    keep1 = [i0 + k for k in _rdp_chain(chain1, tol)]
    keep2 = [(i1 + k) % len(pts) for k in _rdp_chain(chain2, tol)]
    kept = sorted(set(keep1) | set(keep2))
    out = [coords[k] for k in kept]
    if len(out) < 3:
        raise GeometryDegenerate("simplification collapsed ring below 3 vertices")
    try:
        return Ring(out)
    except ValidationError as exc:
        raise GeometryDegenerate(f"simplification produced a degenerate ring: {exc}") from exc


def _farthest_pair(pts: np.ndarray) -> tuple[int, int]:
    """Approximate diameter pair: farthest from the first vertex, then from that."""
    d0 = np.hypot(pts[:, 0] - pts[0, 0], pts[:, 1] - pts[0, 1])
    a = int(np.argmax(d0))
    da = np.hypot(pts[:, 0] - pts[a, 0], pts[:, 1] - pts[a, 1])
    b = int(np.argmax(da))
    return (min(a, b), max(a, b)) if a != b else (0, len(pts) // 2)


#: Segments per quarter circle used for round joins in offsets.
OFFSET_QUAD_SEGS = 16


def offset(r: Region, delta: float) -> Region:
    """Minkowski-style offset with round joins; negative delta deflates."""
    if r.is_empty:
        return Region.empty()
    out = r.shapely.buffer(delta, quad_segs=OFFSET_QUAD_SEGS, join_style="round")
    return Region(_clean(_snap(out)))


def _nesting_depth_region(rings: Sequence[Ring]):
    """Assemble raw rings into a region by even-odd nesting depth.

    Rings are sorted by decreasing area; each ring's depth is the number of
    larger rings that cover its representative point. Even depths are solid,
    odd depths are holes; overlapping same-depth rings simply union.
    """
    polys = [ShapelyPolygon(r.coords) for r in rings]
    order = sorted(range(len(polys)), key=lambda i: -polys[i].area)
    prepared = []
    depth = {}
    for i in order:
        rep = polys[i].representative_point()
        depth[i] = sum(1 for q in prepared if q.covers(rep))
        shapely.prepare(polys[i])
        prepared.append(polys[i])
    solid = [polys[i] for i in order if depth[i] % 2 == 0]
    holes = [polys[i] for i in order if depth[i] % 2 == 1]
    geom = shapely.union_all([_snap(p) for p in solid])
    if holes:
        geom = shapely.difference(geom, shapely.union_all([_snap(p) for p in holes]))
    return _clean(geom)


def preprocess_map(
    raw: Sequence[Ring],
    rdp_tol: float = 0.1,
    inflate_r: float = 0.2,
    final_inflate: float = 0.01,
    name: str = "",
) -> Environment:
    """Smooth a raw ring soup into a well-formed environment.

    Applies, in order: RDP simplification, inflate-deflate by ``inflate_r``,
    a final inflate, and a second RDP pass; then keeps the largest polygon
    with its enclosed holes, discarding disconnected artifacts.
    """
    if not raw:
        raise GeometryDegenerate("no input rings")
    simplified = []
    for ring in raw:
        try:
            simplified.append(simplify_rdp(ring, rdp_tol) if rdp_tol > 0 else ring)
        except GeometryDegenerate:
            continue  # artifact ring, drop
    if not simplified:
        raise GeometryDegenerate("all rings degenerate after simplification")
    region = Region(_nesting_depth_region(simplified))
    region = offset(region, inflate_r)
    region = offset(region, -inflate_r)
    region = offset(region, final_inflate)
    if region.is_empty:
        raise GeometryDegenerate("nothing survived smoothing")
    # Second RDP pass, ring by ring.
    parts = []
    for outer, holes in region.parts:
        try:
            s_outer = simplify_rdp(outer, rdp_tol)
        except GeometryDegenerate:
            continue
        s_holes = []
        for h in holes:
            try:
                s_holes.append(simplify_rdp(h, rdp_tol))
            except GeometryDegenerate:
                continue  # hole collapsed, drop
        poly = ShapelyPolygon(s_outer.coords, [h.coords for h in s_holes])
        if not poly.is_valid:
            poly = shapely.make_valid(poly)
        parts.extend(_polygonal_parts(poly))
    parts = [p for p in parts if p.area >= TAU_AREA]
    if not parts:
        raise GeometryDegenerate("nothing survived smoothing")
    # Largest-area polygon wins; ties broken by first encountered.
    best = max(parts, key=lambda p: p.area)
    outer = Ring(_ring_coords(best.exterior))
    holes = [Ring(_ring_coords(h)) for h in best.interiors]
    return Environment(outer, holes, name=name)


def bound_box(r: Region | Environment) -> Rect:
    """Tight axis-aligned bounds over all vertices."""
    geom = _as_geom(r)
    if geom.is_empty:
        raise EmptyRegion("bounding box of an empty region")
    minx, miny, maxx, maxy = geom.bounds
    return Rect(Point(minx, miny), Point(maxx, maxy))
