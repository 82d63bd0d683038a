"""Delaunay triangulation of a box by incremental Bowyer-Watson insertion.

Predicates are evaluated in floating point with a forward error bound and
redone in exact rational arithmetic when the sign is uncertain, so
collinear and cocircular inputs (common for the diagonal seed arrangement)
are handled consistently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .polytope import TOL, Hyperbox

_EPS = np.finfo(float).eps
_ORIENT_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPS) * _EPS


class DegenerateInput(ValueError):
    pass


def orient(a, b, c) -> int:
    """Sign of twice the signed area of ``abc`` (+1 counterclockwise)."""
    l = (a[0] - c[0]) * (b[1] - c[1])
    r = (a[1] - c[1]) * (b[0] - c[0])
    det = l - r
    if abs(det) > _ORIENT_BOUND * (abs(l) + abs(r)):
        return 1 if det > 0 else -1
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (*a, *b, *c))
    ex = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (ex > 0) - (ex < 0)


def incircle(a, b, c, d) -> int:
    """+1 if ``d`` is strictly inside the circle through ccw ``a, b, c``."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = bdx * cdy - cdx * bdy
    t2 = cdx * ady - adx * cdy
    t3 = adx * bdy - bdx * ady
    det = alift * t1 + blift * t2 + clift * t3
    perm = (
        (abs(bdx * cdy) + abs(cdx * bdy)) * alift
        + (abs(cdx * ady) + abs(adx * cdy)) * blift
        + (abs(adx * bdy) + abs(bdx * ady)) * clift
    )
    if abs(det) > _INCIRCLE_BOUND * perm:
        return 1 if det > 0 else -1
    A = [Fraction(v) for v in a]
    B = [Fraction(v) for v in b]
    C = [Fraction(v) for v in c]
    D = [Fraction(v) for v in d]
    adx, ady = A[0] - D[0], A[1] - D[1]
    bdx, bdy = B[0] - D[0], B[1] - D[1]
    cdx, cdy = C[0] - D[0], C[1] - D[1]
    ex = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (ex > 0) - (ex < 0)


@dataclass
class Tessellation:
    """Triangulated box. ``cells`` rows are counterclockwise vertex triples."""

    vertices: np.ndarray
    cells: np.ndarray
    adjacency: list[tuple[int, int]]
    domain: Hyperbox
    _incident: list[list[int]] | None = field(default=None, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def incident_cells(self) -> list[list[int]]:
        """Cells containing each vertex, in increasing cell index."""
        if self._incident is None:
            inc = [[] for _ in range(len(self.vertices))]
            for j, tri in enumerate(self.cells):
                for u in tri:
                    inc[int(u)].append(j)
            self._incident = inc
        return self._incident

    def cell_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> dict[tuple[int, int], list[int]]:
        """Map from sorted vertex pair to the cells using that edge."""
        out: dict[tuple[int, int], list[int]] = {}
        for j, (a, b, c) in enumerate(self.cells.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                out.setdefault((min(u, v), max(u, v)), []).append(j)
        return out


def _merge_duplicates(P, tol):
    from scipy.spatial import cKDTree

    tree = cKDTree(P)
    keep = np.ones(len(P), dtype=bool)
    for i, j in sorted(tree.query_pairs(tol)):
        if keep[i] and keep[j]:
            keep[j] = False
    return P[keep]


class _Mesh:
    """Mutable triangle soup with neighbour links used during insertion.

    ``nbr[t][k]`` is the triangle across the edge opposite vertex ``k``.
    """

    def __init__(self, pts):
        self.pts = pts
        self.tri: list[list[int]] = []
        self.nbr: list[list[int]] = []
        self.alive: list[bool] = []

    def add(self, a, b, c):
        self.tri.append([a, b, c])
        self.nbr.append([-1, -1, -1])
        self.alive.append(True)
        return len(self.tri) - 1

    def locate(self, p, start):
        """Visibility walk; returns a live triangle whose closure contains ``p``."""
        t = start
        if not self.alive[t]:
            t = self.alive.index(True)
        pts = self.pts
        for _ in range(4 * len(self.tri) + 10):
            a, b, c = self.tri[t]
            for k, (u, v) in enumerate(((b, c), (c, a), (a, b))):
                if orient(pts[u], pts[v], p) < 0:
                    t = self.nbr[t][k]
                    break
            else:
                return t
        raise RuntimeError("point location did not terminate")

    def insert(self, i, start):
        p = self.pts[i]
        t0 = self.locate(p, start)
        cavity = {t0}
        queue = deque([t0])
        while queue:
            t = queue.popleft()
            for s in self.nbr[t]:
                if s < 0 or s in cavity:
                    continue
                a, b, c = self.tri[s]
                if incircle(self.pts[a], self.pts[b], self.pts[c], p) > 0:
                    cavity.add(s)
                    queue.append(s)
        # the cavity must be star-shaped from p; drop triangles whose
        # boundary edges p cannot see until it is. A hull edge through p
        # is split rather than fanned.
        while True:
            boundary = self._boundary(cavity)
            bad = [
                t
                for (u, v, t, s) in boundary
                if t != t0 and orient(self.pts[u], self.pts[v], p) < 0
                or (orient(self.pts[u], self.pts[v], p) == 0 and s >= 0 and t != t0)
            ]
            if not bad:
                break
            cavity.difference_update(bad)
        boundary = [
            (u, v, t, s) for (u, v, t, s) in boundary
            if not (s < 0 and orient(self.pts[u], self.pts[v], p) == 0)
        ]
        new = []
        edge_owner = {}
        for u, v, t, outside in boundary:
            nt = self.add(u, v, i)
            new.append(nt)
            # edge (u, v) is opposite vertex i (index 2)
            self.nbr[nt][2] = outside
            if outside >= 0:
                k = self._edge_slot(outside, u, v)
                self.nbr[outside][k] = nt
            edge_owner[(v, i)] = (nt, 0)  # opposite u
            edge_owner[(i, u)] = (nt, 1)  # opposite v
        for (x, y), (nt, k) in edge_owner.items():
            other = edge_owner.get((y, x))
            if other is not None:
                self.nbr[nt][k] = other[0]
        for t in cavity:
            self.alive[t] = False
        return new[-1]

    def _edge_slot(self, t, u, v):
        a, b, c = self.tri[t]
        for k, (x, y) in enumerate(((b, c), (c, a), (a, b))):
            if (x == v and y == u) or (x == u and y == v):
                return k
        raise RuntimeError("inconsistent neighbour links")

    def _boundary(self, cavity):
        out = []
        for t in sorted(cavity):
            a, b, c = self.tri[t]
            for k, (u, v) in enumerate(((b, c), (c, a), (a, b))):
                s = self.nbr[t][k]
                if s < 0 or s not in cavity:
                    out.append((u, v, t, s))
        return out


def _flip_cocircular(cells, P, max_passes=8):
    """Among cocircular quads, use the diagonal through the smallest vertex index."""
    cells = [list(c) for c in cells]
    for _ in range(max_passes):
        flipped = False
        edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for j, tri in enumerate(cells):
            for k in range(3):
                u, v = tri[(k + 1) % 3], tri[(k + 2) % 3]
                edge_map.setdefault((min(u, v), max(u, v)), []).append((j, k))
        touched = set()
        for (u, v), owners in sorted(edge_map.items()):
            if len(owners) != 2:
                continue
            (j1, k1), (j2, k2) = owners
            if j1 in touched or j2 in touched:
                continue
            w1, w2 = cells[j1][k1], cells[j2][k2]
            if min(w1, w2) >= min(u, v):
                continue
            a, b, c = cells[j1]
            if incircle(P[a], P[b], P[c], P[w2]) != 0:
                continue
            # convex quad needed for the flip to be valid
            if orient(P[w1], P[w2], P[u]) == 0 or orient(P[w1], P[w2], P[v]) == 0:
                continue
            if orient(P[w1], P[w2], P[u]) == orient(P[w1], P[w2], P[v]):
                continue
            # edge (u, v) appears in j1 as (x, y) following ccw order
            x, y = cells[j1][(k1 + 1) % 3], cells[j1][(k1 + 2) % 3]
            cells[j1] = [w1, x, w2]
            cells[j2] = [w2, y, w1]
            touched.update((j1, j2))
            flipped = True
        if not flipped:
            break
    return cells


def _canonical(cells):
    out = []
    for a, b, c in cells:
        r = [a, b, c]
        k = r.index(min(r))
        out.append(r[k:] + r[:k])
    out.sort()
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def triangulate(points, domain: Hyperbox, merge_tol: float = TOL) -> Tessellation:
    """Delaunay triangulation of ``points``, which must include the box corners.

    Points are inserted in lexicographic order. Among equivalent
    triangulations of cocircular point groups the diagonal through the
    lower vertex index is preferred. Output vertices keep the input order
    after near-duplicates are dropped.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if domain.dim != 2:
        raise ValueError("triangulation is implemented for n = 2 only")
    if len(P) < 3:
        raise DegenerateInput("need at least three points")
    if not np.all(np.isfinite(P)):
        raise ValueError("points must be finite")
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    if np.any(P < lo - TOL) or np.any(P > hi + TOL):
        raise ValueError("all points must lie in the domain")
    P = _merge_duplicates(P, merge_tol)
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for c in corners:
        if np.abs(P - c).max(axis=1).min() > TOL:
            raise ValueError(f"domain corner {tuple(map(float, c))} missing from the points")
    if all(orient(P[0], P[1], P[k]) == 0 for k in range(2, len(P))):
        raise DegenerateInput("all points are collinear")

    n = len(P)
    ci = [int(np.abs(P - c).max(axis=1).argmin()) for c in corners]
    mesh = _Mesh([tuple(p) for p in P])
    # the box corners fix the hull, so insertion starts from two triangles
    t1 = mesh.add(ci[0], ci[1], ci[2])
    t2 = mesh.add(ci[0], ci[2], ci[3])
    mesh.nbr[t1][1] = t2
    mesh.nbr[t2][2] = t1
    last = t2
    for i in np.lexsort((P[:, 1], P[:, 0])):
        if int(i) in ci:
            continue
        last = mesh.insert(int(i), last)

    cells = [t for t, ok in zip(mesh.tri, mesh.alive) if ok]
    cells = _flip_cocircular(_canonical(cells).tolist(), P)
    cells = _canonical(cells)
    t = from_cells(P, cells, domain)
    area = float(t.cell_areas().sum())
    if abs(area - domain.volume()) > 1e-6 * domain.volume():
        raise RuntimeError(f"triangulation covers area {area}, expected {domain.volume()}")
    return t


def from_cells(P, cells, domain: Hyperbox) -> Tessellation:
    """Tessellation from explicit counterclockwise cells."""
    adj = set()
    edges: dict[tuple[int, int], list[int]] = {}
    for j, (a, b, c) in enumerate(cells.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            edges.setdefault((min(u, v), max(u, v)), []).append(j)
    for owners in edges.values():
        if len(owners) == 2:
            adj.add((min(owners), max(owners)))
    t = Tessellation(P, cells, sorted(adj), domain)
    used = np.zeros(len(P), dtype=bool)
    used[cells.ravel()] = True
    if not used.all():
        raise RuntimeError("triangulation left vertices without a cell")
    return t


def _box_boundary_gaps(t: Tessellation, box: Hyperbox, tol: float = TOL):
    """Midpoints of boundary pieces of ``box`` that are not mesh edges."""
    P = t.vertices
    edges = t.edges()
    out = []
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    inside = np.all((P >= lo - tol) & (P <= hi + tol), axis=1)
    for axis in (0, 1):
        for level in (lo[axis], hi[axis]):
            side = np.flatnonzero(inside & (np.abs(P[:, axis] - level) <= tol))
            side = side[np.argsort(P[side, 1 - axis], kind="stable")]
            for u, v in zip(side[:-1], side[1:]):
                if (min(u, v), max(u, v)) not in edges:
                    out.append((P[u] + P[v]) / 2.0)
    return np.array(out).reshape(-1, 2)


def triangulate_conforming(points, domain: Hyperbox, box: Hyperbox, merge_tol: float = TOL, max_rounds: int = 40):
    """Delaunay triangulation whose edges cover the boundary of ``box``.

    ``box`` must lie inside ``domain`` and its corners must be among the
    points. Boundary pieces missing from the mesh are split at their
    midpoints until every piece is an edge, so each cell lies either inside
    or outside ``box``.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    for _ in range(max_rounds):
        t = triangulate(P, domain, merge_tol)
        gaps = _box_boundary_gaps(t, box)
        if not len(gaps):
            return t
        P = np.vstack([t.vertices, gaps])
    raise RuntimeError("could not recover the target boundary in the triangulation")


def cells_containing(t: Tessellation, x, tol: float = TOL) -> list[int]:
    """Indices of all closed cells containing ``x``."""
    x = np.asarray(x, dtype=float)
    p = t.vertices[t.cells]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]

    def side(u, v):
        e = v - u
        w = x - u
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        return cross / np.maximum(np.hypot(e[:, 0], e[:, 1]), 1e-300)

    inside = (side(a, b) >= -tol) & (side(b, c) >= -tol) & (side(c, a) >= -tol)
    return [int(j) for j in np.flatnonzero(inside)]


def locate_many(t: Tessellation, X, tol: float = TOL) -> np.ndarray:
    """One containing cell per query point (lowest index), or -1 if outside."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = t.vertices[t.cells]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    out = np.full(len(X), -1, dtype=np.int64)
    step = max(1, 4_000_000 // max(1, len(t.cells)))
    for s in range(0, len(X), step):
        x = X[s : s + step, None, :]
        ok = np.ones((len(x), len(a)), dtype=bool)
        for u, v in ((a, b), (b, c), (c, a)):
            e = v - u
            cross = e[:, 0] * (x[..., 1] - u[:, 1]) - e[:, 1] * (x[..., 0] - u[:, 0])
            ok &= cross / np.hypot(e[:, 0], e[:, 1]) >= -tol
        hit = ok.any(axis=1)
        out[s : s + step][hit] = ok[hit].argmax(axis=1)
    return out


def cell_adjacency(t: Tessellation) -> list[tuple[int, int]]:
    return list(t.adjacency)
