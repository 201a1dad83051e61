"""Triangulation of environments.

The base mesh is the constrained Delaunay triangulation of the environment
polygon (no Steiner points). An optional maximum-circumradius bound is
enforced by Rivara longest-edge bisection, which keeps the mesh conforming
(no hanging nodes) and provably terminates; a vertex budget guards against
pathological refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import PointOutsideEnvironment, RefinementDiverged
from .geom import Environment, Point

#: Steiner-vertex budget multiplier for refinement.
VERTEX_BUDGET_FACTOR = 50


def _circumcircle(ax, ay, bx, by, cx, cy) -> tuple[float, float, float]:
    """Circumcenter and circumradius of a triangle; radius inf if degenerate."""
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return (ax, ay, math.inf)
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = math.hypot(ax - ux, ay - uy)
    return (ux, uy, r)


@dataclass
class TriMesh:
    """A conforming triangulation of an environment's interior.

    ``tri_idx[t]`` holds CCW vertex indices; ``neighbors[t][e]`` is the
    triangle across edge ``(tri_idx[t][e], tri_idx[t][(e+1)%3])`` or -1
    where that edge lies on the environment boundary.
    """

    points: np.ndarray
    tri_idx: np.ndarray
    neighbors: np.ndarray
    circumcenters: np.ndarray = field(init=False)
    circumradii: np.ndarray = field(init=False)

    def __post_init__(self):
        a = self.points[self.tri_idx[:, 0]]
        b = self.points[self.tri_idx[:, 1]]
        c = self.points[self.tri_idx[:, 2]]
        d = 2.0 * (
            a[:, 0] * (b[:, 1] - c[:, 1])
            + b[:, 0] * (c[:, 1] - a[:, 1])
            + c[:, 0] * (a[:, 1] - b[:, 1])
        )
        d = np.where(d == 0.0, np.nan, d)
        a2 = (a * a).sum(axis=1)
        b2 = (b * b).sum(axis=1)
        c2 = (c * c).sum(axis=1)
        ux = (a2 * (b[:, 1] - c[:, 1]) + b2 * (c[:, 1] - a[:, 1]) + c2 * (a[:, 1] - b[:, 1])) / d
        uy = (a2 * (c[:, 0] - b[:, 0]) + b2 * (a[:, 0] - c[:, 0]) + c2 * (b[:, 0] - a[:, 0])) / d
        self.circumcenters = np.column_stack([ux, uy])
        self.circumradii = np.hypot(a[:, 0] - ux, a[:, 1] - uy)
        self._vertex_fan: dict[int, list[tuple[int, int]]] | None = None

    def __len__(self) -> int:
        return len(self.tri_idx)

    @property
    def triangles(self) -> list[tuple[Point, Point, Point]]:
        out = []
        for i, j, k in self.tri_idx:
            out.append(
                (
                    Point(*self.points[i]),
                    Point(*self.points[j]),
                    Point(*self.points[k]),
                )
            )
        return out

    def triangle_coords(self, t: int) -> np.ndarray:
        return self.points[self.tri_idx[t]]

    def triangle_areas(self) -> np.ndarray:
        a = self.points[self.tri_idx[:, 0]]
        b = self.points[self.tri_idx[:, 1]]
        c = self.points[self.tri_idx[:, 2]]
        return 0.5 * np.abs(
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        )

    def is_constrained(self, t: int, e: int) -> bool:
        return self.neighbors[t][e] < 0

    def vertex_fans(self) -> dict[int, list[tuple[int, int]]]:
        """Map vertex index -> list of (triangle, corner slot) incidences."""
        if self._vertex_fan is None:
            fans: dict[int, list[tuple[int, int]]] = {}
            for t in range(len(self.tri_idx)):
                for s in range(3):
                    fans.setdefault(int(self.tri_idx[t][s]), []).append((t, s))
            self._vertex_fan = fans
        return self._vertex_fan

    def locate(self, x: float, y: float, tol: float = 1e-9) -> list[int]:
        """Triangles whose closure contains (x, y), by signed-area tests."""
        pts = self.points
        ti = self.tri_idx
        a = pts[ti[:, 0]]
        b = pts[ti[:, 1]]
        c = pts[ti[:, 2]]
        s0 = (b[:, 0] - a[:, 0]) * (y - a[:, 1]) - (b[:, 1] - a[:, 1]) * (x - a[:, 0])
        s1 = (c[:, 0] - b[:, 0]) * (y - b[:, 1]) - (c[:, 1] - b[:, 1]) * (x - b[:, 0])
        s2 = (a[:, 0] - c[:, 0]) * (y - c[:, 1]) - (a[:, 1] - c[:, 1]) * (x - c[:, 0])
        inside = (s0 >= -tol) & (s1 >= -tol) & (s2 >= -tol)
        return [int(t) for t in np.nonzero(inside)[0]]


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class _MutableMesh:
    """Editable triangle soup used during refinement."""

    def __init__(self, coords: list[tuple[float, float]], tris: list[tuple[int, int, int]]):
        self.coords = coords
        self.vid = {c: i for i, c in enumerate(coords)}
        self.tris: list[tuple[int, int, int] | None] = list(tris)
        self.edge_map: dict[tuple[int, int], list[int]] = {}
        for t, tri in enumerate(tris):
            self._register(t, tri)

    def _register(self, t: int, tri: tuple[int, int, int]):
        for e in range(3):
            self.edge_map.setdefault(_edge_key(tri[e], tri[(e + 1) % 3]), []).append(t)

    def _unregister(self, t: int, tri: tuple[int, int, int]):
        for e in range(3):
            self.edge_map[_edge_key(tri[e], tri[(e + 1) % 3])].remove(t)

    def add_vertex(self, x: float, y: float) -> int:
        key = (x, y)
        if key in self.vid:
            return self.vid[key]
        self.coords.append(key)
        self.vid[key] = len(self.coords) - 1
        return self.vid[key]

    def add_tri(self, tri: tuple[int, int, int]) -> int:
        self.tris.append(tri)
        self._register(len(self.tris) - 1, tri)
        return len(self.tris) - 1

    def remove_tri(self, t: int):
        tri = self.tris[t]
        assert tri is not None
        self._unregister(t, tri)
        self.tris[t] = None

    def neighbor_across(self, t: int, key: tuple[int, int]) -> int | None:
        for other in self.edge_map.get(key, ()):
            if other != t and self.tris[other] is not None:
                return other
        return None

    def longest_edge(self, t: int) -> tuple[tuple[int, int], float]:
        tri = self.tris[t]
        assert tri is not None
        best_key = None
        best_len = -1.0
        for e in range(3):
            u, v = tri[e], tri[(e + 1) % 3]
            (x1, y1), (x2, y2) = self.coords[u], self.coords[v]
            L = math.hypot(x2 - x1, y2 - y1)
            key = _edge_key(u, v)
            # Deterministic tie-break on near-equal lengths.
            if L > best_len + 1e-12 or (abs(L - best_len) <= 1e-12 and key < best_key):
                best_len = L
                best_key = key
        return best_key, best_len

    def circumradius(self, t: int) -> float:
        i, j, k = self.tris[t]
        (ax, ay), (bx, by), (cx, cy) = self.coords[i], self.coords[j], self.coords[k]
        return _circumcircle(ax, ay, bx, by, cx, cy)[2]

    def bisect(self, t: int, key: tuple[int, int]) -> list[int]:
        """Split triangle t across edge `key` at its midpoint; returns children."""
        u, v = key
        (x1, y1), (x2, y2) = self.coords[u], self.coords[v]
        m = self.add_vertex((x1 + x2) / 2.0, (y1 + y2) / 2.0)
        tri = self.tris[t]
        w = next(i for i in tri if i not in (u, v))
        # Preserve orientation: replace the (u, v) edge traversal with u-m-v.
        order = list(tri)
        iu = order.index(u)
        if order[(iu + 1) % 3] == v:
            c1, c2 = (u, m, w), (m, v, w)
        else:
            c1, c2 = (v, m, w), (m, u, w)
        self.remove_tri(t)
        return [self.add_tri(c1), self.add_tri(c2)]


def _rivara_refine(mesh: _MutableMesh, bound: float, budget: int):
    """Bisect triangles until every circumradius is at most `bound`."""
    queue = [t for t, tri in enumerate(mesh.tris) if tri is not None]
    while queue:
        t = queue.pop()
        if mesh.tris[t] is None or mesh.circumradius(t) <= bound:
            continue
        # Longest-edge propagation path: refine until t itself is split.
        while mesh.tris[t] is not None and mesh.circumradius(t) > bound:
            path = [t]
            while True:
                cur = path[-1]
                key, length = mesh.longest_edge(cur)
                nb = mesh.neighbor_across(cur, key)
                if nb is None or mesh.longest_edge(nb)[0] == key:
                    new = mesh.bisect(cur, key)
                    if nb is not None:
                        new += mesh.bisect(nb, key)
                    queue.extend(new)
                    if len(mesh.coords) > budget:
                        raise RefinementDiverged(
                            f"refinement exceeded vertex budget ({budget})"
                        )
                    break
                path.append(nb)


def _base_cdt(env: Environment) -> tuple[list[tuple[float, float]], list[tuple[int, int, int]]]:
    tris_geom = shapely.constrained_delaunay_triangles(env.shapely)
    coords: list[tuple[float, float]] = []
    vid: dict[tuple[float, float], int] = {}
    tris: list[tuple[int, int, int]] = []
    for tri in tris_geom.geoms:
        cs = list(tri.exterior.coords)[:3]
        idx = []
        for x, y in cs:
            key = (x, y)
            if key not in vid:
                vid[key] = len(coords)
                coords.append(key)
            idx.append(vid[key])
        ax, ay = coords[idx[0]]
        bx, by = coords[idx[1]]
        cx, cy = coords[idx[2]]
        if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) < 0:
            idx = [idx[0], idx[2], idx[1]]
        tris.append(tuple(idx))
    return coords, tris


def triangulate(env: Environment, max_circumradius: float | None = None) -> TriMesh:
    """Conforming Delaunay triangulation, optionally circumradius-bounded.

    With no bound this is the CDT of the environment polygon. With a bound,
    Steiner points are inserted by longest-edge bisection until every
    triangle's circumradius is at most the bound.
    """
    if max_circumradius is not None and max_circumradius <= 0:
        raise ValueError("max_circumradius must be positive")
    coords, tris = _base_cdt(env)
    if max_circumradius is not None:
        mm = _MutableMesh(coords, tris)
        budget = VERTEX_BUDGET_FACTOR * max(len(coords), 3)
        _rivara_refine(mm, max_circumradius, budget)
        coords = mm.coords
        tris = [t for t in mm.tris if t is not None]
    points = np.asarray(coords, dtype=float)
    tri_idx = np.asarray(tris, dtype=np.int64)
    # Adjacency from shared edges; boundary edges have a single incidence.
    edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for t, tri in enumerate(tris):
        for e in range(3):
            edge_map.setdefault(_edge_key(tri[e], tri[(e + 1) % 3]), []).append((t, e))
    neighbors = np.full((len(tris), 3), -1, dtype=np.int64)
    for incidences in edge_map.values():
        if len(incidences) == 2:
            (t1, e1), (t2, e2) = incidences
            neighbors[t1][e1] = t2
            neighbors[t2][e2] = t1
    return TriMesh(points=points, tri_idx=tri_idx, neighbors=neighbors)


def env_mesh(env: Environment) -> TriMesh:
    """The environment's CDT, built once and cached on the environment."""
    mesh = env._cache.get("cdt")
    if mesh is None:
        mesh = triangulate(env)
        env._cache["cdt"] = mesh
    return mesh


def locate_point(mesh: TriMesh, x: float, y: float):
    """Classify (x, y) against the mesh: ('vertex', vid) / ('tri', [ids])."""
    # Exact-vertex hits matter: guards are often placed at mesh vertices.
    d2 = (mesh.points[:, 0] - x) ** 2 + (mesh.points[:, 1] - y) ** 2
    vmin = int(np.argmin(d2))
    if d2[vmin] < 1e-18:
        return ("vertex", vmin)
    hits = mesh.locate(x, y)
    if not hits:
        raise PointOutsideEnvironment(f"point ({x}, {y}) is outside the environment")
    return ("tri", hits)
