"""Planar Delaunay triangulation and Poisson point sampling.

Incremental Bowyer-Watson: points are inserted in lexicographic order into a
triangulation seeded with three far-away synthetic vertices; each insertion
carves out the triangles whose circumcircle strictly contains the new point
and fans the cavity boundary. Orientation and in-circle predicates run in
floating point with a magnitude error bound and fall back to exact rational
arithmetic near degeneracy, so cocircular inputs are resolved exactly: an
existing triangle survives a cocircular conflict, which means the diagonal
created earlier in lexicographic order persists. That is the documented
tie-break.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .rng import stream

__all__ = [
    "DelaunayGraph",
    "build_delaunay",
    "build_delaunay_torus",
    "graph_from_json",
    "graph_to_json",
    "greedy_neighbor_violations",
    "sample_poisson_points",
    "triangulate",
]


# -- geometric predicates -----------------------------------------------------

_ORIENT_EPS = 1e-15   # relative filter bounds; exceeding them is proof enough
_INCIRCLE_EPS = 1e-14  # in floating point, otherwise redo in rationals


def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the signed area of (a, b, c): +1 counterclockwise, -1 clockwise."""
    l = (bx - ax) * (cy - ay)
    r = (by - ay) * (cx - ax)
    det = l - r
    bound = _ORIENT_EPS * (abs(l) + abs(r))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    det = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return (det > 0) - (det < 0)


def _incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 when d lies strictly inside the circumcircle of ccw (a, b, c)."""
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    det = (
        ad * (bdx * cdy - bdy * cdx)
        + bd * (cdx * ady - cdy * adx)
        + cd * (adx * bdy - ady * bdx)
    )
    mag = (
        ad * (abs(bdx * cdy) + abs(bdy * cdx))
        + bd * (abs(cdx * ady) + abs(cdy * adx))
        + cd * (abs(adx * bdy) + abs(ady * bdx))
    )
    bound = _INCIRCLE_EPS * mag
    if det > bound:
        return 1
    if det < -bound:
        return -1
    fa = (Fraction(ax), Fraction(ay))
    fb = (Fraction(bx), Fraction(by))
    fc = (Fraction(cx), Fraction(cy))
    fd = (Fraction(dx), Fraction(dy))
    adx, ady = fa[0] - fd[0], fa[1] - fd[1]
    bdx, bdy = fb[0] - fd[0], fb[1] - fd[1]
    cdx, cdy = fc[0] - fd[0], fc[1] - fd[1]
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - bdy * cdx)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - cdy * adx)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx)
    )
    return (det > 0) - (det < 0)


# -- Bowyer-Watson ------------------------------------------------------------


def triangulate(points: np.ndarray) -> np.ndarray:
    """Delaunay triangles of a planar point set, as an (m, 3) index array.

    Raises on duplicate points and on fully collinear input (no triangle
    exists). Synthetic super-triangle vertices sit 1e9 bounding-box scales
    away; with exact predicates that is beyond every circumcircle realized
    by the inputs used here, so interior adjacency is unaffected.
    """
    pts_in = np.asarray(points, dtype=float)
    if pts_in.ndim != 2 or pts_in.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    n = pts_in.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points")
    seen = set()
    for i in range(n):
        key = (float(pts_in[i, 0]), float(pts_in[i, 1]))
        if key in seen:
            raise ValueError("duplicate points are not allowed")
        seen.add(key)

    order = np.lexsort((pts_in[:, 1], pts_in[:, 0]))
    px = pts_in[:, 0].tolist()
    py = pts_in[:, 1].tolist()

    lo = pts_in.min(axis=0)
    hi = pts_in.max(axis=0)
    cx_, cy_ = (lo + hi) / 2.0
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1.0))
    big = 1e9 * span
    px += [cx_ - 2.0 * big, cx_ + 2.0 * big, cx_]
    py += [cy_ - big, cy_ - big, cy_ + 2.0 * big]
    s0, s1, s2 = n, n + 1, n + 2

    # triangle store: verts[t] = (a, b, c) ccw, nbr[t][k] = triangle across
    # the edge opposite vertex k, or -1
    verts = [(s0, s1, s2)]
    nbr = [[-1, -1, -1]]
    alive = [True]
    free: list[int] = []

    def locate(p: int, start: int) -> int:
        t = start
        steps = 0
        limit = 4 * len(verts) + 64
        while True:
            a, b, c = verts[t]
            if _orient(px[a], py[a], px[b], py[b], px[p], py[p]) < 0:
                t = nbr[t][2]
            elif _orient(px[b], py[b], px[c], py[c], px[p], py[p]) < 0:
                t = nbr[t][0]
            elif _orient(px[c], py[c], px[a], py[a], px[p], py[p]) < 0:
                t = nbr[t][1]
            else:
                return t
            steps += 1
            if t == -1 or steps > limit:
                # walk escaped (should not happen inside the super-triangle);
                # scan as a last resort
                for u in range(len(verts)):
                    if not alive[u]:
                        continue
                    a, b, c = verts[u]
                    if (
                        _orient(px[a], py[a], px[b], py[b], px[p], py[p]) >= 0
                        and _orient(px[b], py[b], px[c], py[c], px[p], py[p]) >= 0
                        and _orient(px[c], py[c], px[a], py[a], px[p], py[p]) >= 0
                    ):
                        return u
                raise RuntimeError("point location failed")

    def in_circum(t: int, p: int) -> bool:
        a, b, c = verts[t]
        return (
            _incircle(px[a], py[a], px[b], py[b], px[c], py[c], px[p], py[p]) > 0
        )

    last = 0
    for p in order.tolist():
        t0 = locate(p, last)
        # cavity = connected set of triangles whose circumcircle contains p
        cavity = {t0}
        stack = [t0]
        while stack:
            t = stack.pop()
            for u in nbr[t]:
                if u != -1 and u not in cavity and in_circum(u, p):
                    cavity.add(u)
                    stack.append(u)
        # boundary edges (a, b) oriented ccw seen from inside the cavity,
        # with the outside triangle across each; sorted iteration keeps the
        # triangle store order (and with it serialized output) reproducible
        boundary = []
        for t in sorted(cavity):
            a, b, c = verts[t]
            for (u, v), outside in (((a, b), nbr[t][2]), ((b, c), nbr[t][0]), ((c, a), nbr[t][1])):
                if outside == -1 or outside not in cavity:
                    boundary.append((u, v, outside))
        for t in sorted(cavity):
            alive[t] = False
            free.append(t)
        edge_to_new = {}
        created = []
        for u, v, outside in boundary:
            if free:
                t = free.pop()
                verts[t] = (p, u, v)
                nbr[t] = [outside, -1, -1]
                alive[t] = True
            else:
                t = len(verts)
                verts.append((p, u, v))
                nbr.append([outside, -1, -1])
                alive.append(True)
            if outside != -1:
                # fix the outside triangle's pointer at the shared edge
                oa, ob, oc = verts[outside]
                for k, (e0, e1) in enumerate(((ob, oc), (oc, oa), (oa, ob))):
                    if (e0, e1) == (v, u):
                        nbr[outside][k] = t
                        break
            edge_to_new[(p, u)] = t
            edge_to_new[(v, p)] = t
            created.append(t)
        for t in created:
            _, u, v = verts[t]
            nbr[t][2] = edge_to_new[(u, p)]  # across edge (p, u)
            nbr[t][1] = edge_to_new[(p, v)]  # across edge (v, p)
        last = created[0]

    tris = [
        verts[t]
        for t in range(len(verts))
        if alive[t] and max(verts[t]) < n
    ]
    if not tris:
        raise ValueError("degenerate input: points are collinear")
    return np.array(tris, dtype=int)


@dataclass(frozen=True)
class DelaunayGraph:
    """Vertex set with Delaunay adjacency.

    neighbor_points[i][k] is the coordinate of neighbors[i][k] as seen from
    vertex i; it differs from points[neighbors[i][k]] only for wrapped
    (torus) edges, where it is the minimum-image position. Jump displacements
    always read neighbor_points.
    """

    points: np.ndarray                 # (n, 2)
    neighbors: tuple                   # tuple of int tuples
    neighbor_points: tuple             # tuple of (deg, 2) arrays
    window: tuple                      # (x_min, y_min, x_max, y_max)
    triangles: Optional[np.ndarray] = None  # (m, 3), absent for torus graphs

    @property
    def n_vertices(self) -> int:
        return int(self.points.shape[0])

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])


def _adjacency(n: int, tris: np.ndarray) -> list[set]:
    adj = [set() for _ in range(n)]
    for a, b, c in tris:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return adj


def build_delaunay(points: np.ndarray, window: Optional[tuple] = None) -> DelaunayGraph:
    """Delaunay graph of a point set (plain, clipped-window geometry)."""
    pts = np.asarray(points, dtype=float)
    tris = triangulate(pts)
    adj = _adjacency(pts.shape[0], tris)
    if any(len(s) < 2 for s in adj):
        raise ValueError("degenerate triangulation: vertex with fewer than 2 neighbors")
    neighbors = tuple(tuple(int(j) for j in sorted(s)) for s in adj)
    neighbor_points = tuple(pts[np.array(nb, dtype=int)] for nb in neighbors)
    if window is None:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        window = (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    return DelaunayGraph(
        points=pts,
        neighbors=neighbors,
        neighbor_points=neighbor_points,
        window=tuple(float(w) for w in window),
        triangles=tris,
    )


def build_delaunay_torus(points: np.ndarray, window: tuple) -> DelaunayGraph:
    """Delaunay graph on the torus obtained by wrapping the window.

    Implemented by triangulating the points together with copies of those
    lying within a margin band of the boundary, shifted across; interior
    Delaunay neighborhoods only depend on points within a few circumradii,
    and the margin (8 / sqrt(density), capped at a quarter window) exceeds
    the largest circumcircle at the densities this is used for. Wrapped
    neighbors keep their shifted coordinates, so displacements are
    minimum-image.
    """
    pts = np.asarray(points, dtype=float)
    x0, y0, x1, y1 = (float(w) for w in window)
    wx, wy = x1 - x0, y1 - y0
    if wx <= 0 or wy <= 0:
        raise ValueError("window must have positive extent")
    n = pts.shape[0]
    if n < 16:
        raise ValueError("torus wrap needs a reasonably dense point set")
    density = n / (wx * wy)
    margin = min(8.0 / math.sqrt(density), 0.25 * min(wx, wy))

    aug_pts = [pts]
    aug_src = [np.arange(n)]
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx == 0 and sy == 0:
                continue
            shifted = pts + np.array([sx * wx, sy * wy])
            keep = (
                (shifted[:, 0] > x0 - margin)
                & (shifted[:, 0] < x1 + margin)
                & (shifted[:, 1] > y0 - margin)
                & (shifted[:, 1] < y1 + margin)
            )
            if np.any(keep):
                aug_pts.append(shifted[keep])
                aug_src.append(np.flatnonzero(keep))
    all_pts = np.vstack(aug_pts)
    src = np.concatenate(aug_src)

    tris = triangulate(all_pts)
    adj = _adjacency(all_pts.shape[0], tris)
    neighbors = []
    neighbor_points = []
    for i in range(n):
        nbrs = sorted(adj[i], key=lambda j: (src[j], all_pts[j, 0], all_pts[j, 1]))
        labels = [int(src[j]) for j in nbrs]
        if len(set(labels)) != len(labels):
            raise ValueError("window too small for torus wrap: duplicate wrapped neighbor")
        neighbors.append(tuple(labels))
        neighbor_points.append(all_pts[np.array(nbrs, dtype=int)])
    return DelaunayGraph(
        points=pts,
        neighbors=tuple(neighbors),
        neighbor_points=tuple(neighbor_points),
        window=(x0, y0, x1, y1),
        triangles=None,
    )


def sample_poisson_points(
    intensity: float, window: tuple, seed: int
) -> np.ndarray:
    """Homogeneous Poisson point sample: N ~ Poisson(intensity * area), uniform."""
    x0, y0, x1, y1 = (float(w) for w in window)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("window must have positive extent")
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    gen = stream(seed, 0)
    count = int(gen.poisson(intensity * (x1 - x0) * (y1 - y0)))
    xs = x0 + (x1 - x0) * gen.random(count)
    ys = y0 + (y1 - y0) * gen.random(count)
    return np.column_stack([xs, ys])


def greedy_neighbor_violations(graph: DelaunayGraph, target: int) -> list[int]:
    """Vertices with no neighbor strictly closer to `target` than themselves.

    For full-plane Delaunay graphs this list contains only the target itself;
    window clipping can add boundary vertices. Bridges launched from a
    violating vertex may stall, so callers can screen with this.
    """
    tp = graph.points[target]
    bad = []
    for i in range(graph.n_vertices):
        if i == target:
            continue
        d2 = float(np.sum((graph.points[i] - tp) ** 2))
        nb = graph.neighbor_points[i]
        nd2 = np.sum((nb - tp) ** 2, axis=1)
        if not np.any(nd2 < d2):
            bad.append(i)
    return bad


# -- serialization ------------------------------------------------------------


def graph_to_json(graph: DelaunayGraph) -> str:
    return json.dumps(
        {
            "points": [[float(x), float(y)] for x, y in graph.points],
            "neighbors": [list(nb) for nb in graph.neighbors],
            "neighbor_points": [
                [[float(x), float(y)] for x, y in npts] for npts in graph.neighbor_points
            ],
            "window": list(graph.window),
            "triangles": None if graph.triangles is None else graph.triangles.tolist(),
        }
    )


def graph_from_json(text: str) -> DelaunayGraph:
    obj = json.loads(text)
    return DelaunayGraph(
        points=np.array(obj["points"], dtype=float),
        neighbors=tuple(tuple(int(j) for j in nb) for nb in obj["neighbors"]),
        neighbor_points=tuple(np.array(npts, dtype=float) for npts in obj["neighbor_points"]),
        window=tuple(obj["window"]),
        triangles=None if obj["triangles"] is None else np.array(obj["triangles"], dtype=int),
    )


def points_from_csv(text: str) -> np.ndarray:
    """Read an x,y point set from CSV (header optional)."""
    rows = []
    for line in text.strip().splitlines():
        parts = line.split(",")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            continue  # header
    if not rows:
        raise ValueError("no point rows found")
    return np.array(rows, dtype=float)
