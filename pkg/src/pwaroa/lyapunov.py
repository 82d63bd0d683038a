"""Piecewise-affine Lyapunov candidates on a triangulation.

``assemble_certification_lp`` builds the program whose solution gives one
affine piece ``V(x) = a_j.x + b_j`` per cell together with one slack per
vertex, and ``extract_certified_roa`` turns a solution into the certified
sublevel region around the origin.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lp import LinearProgram
from .polytope import TOL, Halfplane, Hyperbox, Polygon, clip_polygon, hyperbox_vertices
from .tessellation import Tessellation, cells_containing, locate_many

# a slack counts as negative only below this margin
SLACK_TOL = 1e-7


class MissingBounds(ValueError):
    pass


class OutsideDomain(ValueError):
    pass


class NoCertifiedRegion(RuntimeError):
    def __init__(self, message, alpha=None, max_on_target=None, blocker=None):
        super().__init__(message)
        self.alpha = alpha
        self.max_on_target = max_on_target
        self.blocker = blocker


@dataclass
class LPLayout:
    """Variable positions: cell ``j`` owns ``3j..3j+2``, slacks follow."""

    n_cells: int
    n_vertices: int
    gauge: int
    decrease_vertices: np.ndarray

    @property
    def n_vars(self) -> int:
        return 3 * self.n_cells + self.n_vertices

    def slack(self, u: int) -> int:
        return 3 * self.n_cells + u


@dataclass
class PWALyapunov:
    tess: Tessellation
    a: np.ndarray  # (N_c, 2)
    b: np.ndarray  # (N_c,)
    s: np.ndarray  # (N_v,)

    def vertex_values(self) -> np.ndarray:
        """V at each vertex, read from the lowest-index incident cell."""
        first = np.array([cells[0] for cells in self.tess.incident_cells()])
        return np.einsum("ij,ij->i", self.a[first], self.tess.vertices) + self.b[first]

    def continuity_gap(self) -> float:
        worst = 0.0
        P = self.tess.vertices
        for u, cells in enumerate(self.tess.incident_cells()):
            vals = self.a[cells] @ P[u] + self.b[cells]
            worst = max(worst, float(vals.max() - vals.min()))
        return worst

    def min_vertex_value(self) -> float:
        P = self.tess.vertices
        vals = np.einsum("tkd,td->tk", P[self.tess.cells], self.a) + self.b[:, None]
        return float(vals.min())

    def values(self, X) -> np.ndarray:
        """Vectorised evaluation; ``nan`` for points outside the domain."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        j = locate_many(self.tess, X)
        out = np.full(len(X), np.nan)
        ok = j >= 0
        out[ok] = np.einsum("ij,ij->i", self.a[j[ok]], X[ok]) + self.b[j[ok]]
        return out


@dataclass
class CertifiedRoA:
    alpha: float
    region: list[Polygon]
    contains_origin: bool
    cells: list[int]
    vertices: list[int]
    max_on_target: float

    def area(self) -> float:
        return float(sum(p.area() for p in self.region))


def in_box(P, box: Hyperbox, tol: float = TOL) -> np.ndarray:
    P = np.atleast_2d(P)
    return np.all((P >= np.subtract(box.lower, tol)) & (P <= np.add(box.upper, tol)), axis=1)


def in_open_box(P, box: Hyperbox, tol: float = TOL) -> np.ndarray:
    """Points at least ``tol`` inside every face of ``box``."""
    P = np.atleast_2d(P)
    return np.all((P > np.add(box.lower, tol)) & (P < np.subtract(box.upper, tol)), axis=1)


def on_box_boundary(P, box: Hyperbox, tol: float = TOL) -> np.ndarray:
    P = np.atleast_2d(P)
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    return np.any((np.abs(P - lo) <= tol) | (np.abs(P - hi) <= tol), axis=1)


def gauge_vertex(t: Tessellation) -> int:
    d = np.linalg.norm(t.vertices, axis=1)
    return int(np.flatnonzero(d == d.min())[0])


def assemble_certification_lp(t: Tessellation, bounds, A: Hyperbox, mu: float):
    """Certification program for tessellation ``t``.

    ``bounds[u]`` is the uncertainty box at vertex ``u``. Returns the
    program and its :class:`LPLayout`.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    Nv, Nc = t.n_vertices, t.n_cells
    if len(bounds) != Nv or any(b is None for b in bounds):
        raise MissingBounds(f"need bounds for all {Nv} vertices, got {len(bounds)}")
    P = t.vertices
    inc = t.incident_cells()
    nvar = 3 * Nc + Nv
    # decrease is dropped only strictly inside A; with a tessellation that
    # conforms to the boundary of A every cell outside A keeps all its rows
    inA = in_open_box(P, A)
    gauge = gauge_vertex(t)

    gr, gc, gv, h = [], [], [], []
    er, ec, ev = [], [], []
    row = 0
    erow = 0
    for u in range(Nv):
        x, y = P[u]
        su = 3 * Nc + u
        # slack floor
        gr.append(row); gc.append(su); gv.append(-1.0); h.append(mu); row += 1
        for j in inc[u]:
            gr += [row] * 3; gc += [3 * j, 3 * j + 1, 3 * j + 2]; gv += [-x, -y, -1.0]
            h.append(0.0); row += 1
        for j0, j1 in zip(inc[u][:-1], inc[u][1:]):
            er += [erow] * 6
            ec += [3 * j0, 3 * j0 + 1, 3 * j0 + 2, 3 * j1, 3 * j1 + 1, 3 * j1 + 2]
            ev += [x, y, 1.0, -x, -y, -1.0]
            erow += 1
        if not inA[u]:
            for j in inc[u]:
                for z in hyperbox_vertices(bounds[u]):
                    gr += [row] * 3; gc += [3 * j, 3 * j + 1, su]; gv += [z[0], z[1], -1.0]
                    h.append(0.0); row += 1
    j = inc[gauge][0]
    er += [erow] * 3; ec += [3 * j, 3 * j + 1, 3 * j + 2]; ev += [P[gauge, 0], P[gauge, 1], 1.0]
    erow += 1
    G = sp.csr_matrix((gv, (gr, gc)), shape=(row, nvar))
    E = sp.csr_matrix((ev, (er, ec)), shape=(erow, nvar))
    G.sum_duplicates()
    E.sum_duplicates()
    c = np.zeros(nvar)
    c[3 * Nc :] = 1.0
    lp = LinearProgram(c, G, np.asarray(h), E, np.zeros(erow))
    return lp, LPLayout(Nc, Nv, gauge, np.flatnonzero(~inA))


def lyapunov_from_solution(t: Tessellation, y) -> PWALyapunov:
    Nc = t.n_cells
    y = np.asarray(y, dtype=float)
    coef = y[: 3 * Nc].reshape(Nc, 3)
    return PWALyapunov(t, coef[:, :2].copy(), coef[:, 2].copy(), y[3 * Nc :].copy())


def evaluate_pwa(V: PWALyapunov, x) -> float:
    x = np.asarray(x, dtype=float)
    if not V.tess.domain.contains(x):
        raise OutsideDomain(f"x = {tuple(map(float, x))} lies outside the domain")
    j = cells_containing(V.tess, x)[0]
    return float(V.a[j] @ x + V.b[j])


def max_over_box(V: PWALyapunov, box: Hyperbox) -> float:
    """Exact maximum of ``V`` over a box, by clipping every cell to it."""
    best = -np.inf
    P = V.tess.vertices
    (x0, y0), (x1, y1) = box.lower, box.upper
    clips = [
        Halfplane((-1.0, 0.0), -x0),
        Halfplane((1.0, 0.0), x1),
        Halfplane((0.0, -1.0), -y0),
        Halfplane((0.0, 1.0), y1),
    ]
    lo = np.minimum.reduce([P[V.tess.cells[:, k]] for k in range(3)])
    hi = np.maximum.reduce([P[V.tess.cells[:, k]] for k in range(3)])
    hit = np.all(lo <= np.add(box.upper, TOL), axis=1) & np.all(hi >= np.subtract(box.lower, TOL), axis=1)
    for j in np.flatnonzero(hit):
        poly = Polygon(tuple(map(tuple, P[V.tess.cells[j]])))
        for hp in clips:
            poly = clip_polygon(poly, hp, tol=0.0)
            if poly is None:
                break
        if poly is None:
            continue
        best = max(best, float((poly.as_array() @ V.a[j] + V.b[j]).max()))
    return best


def extract_certified_roa(
    V: PWALyapunov, t: Tessellation, A: Hyperbox, X: Hyperbox, slack_tol: float = SLACK_TOL
) -> CertifiedRoA:
    """Largest certified sublevel component around the origin.

    Vertices are visited in minimax order from the gauge vertex, so the
    component of ``{V <= alpha}`` containing the origin grows exactly as
    the visit proceeds. The visit stops at the first vertex that lies on
    the boundary of ``X`` or whose incident cells contain a vertex not
    strictly inside ``A`` with ``s_u >= -slack_tol``; ``alpha`` is the
    largest vertex value strictly below that level.
    """
    P = t.vertices
    Nv = len(P)
    vals = V.vertex_values()
    inA = in_open_box(P, A)
    bad_slack = (~inA) & (V.s >= -slack_tol)
    inc = t.incident_cells()
    star = [np.unique(t.cells[cells].ravel()) for cells in inc]
    blocked = on_box_boundary(P, X).copy()
    for u in range(Nv):
        if bad_slack[star[u]].any():
            blocked[u] = True

    g = gauge_vertex(t)
    seen = np.zeros(Nv, dtype=bool)
    seen[g] = True
    heap = [(float(vals[g]), g)]
    order = []
    level = np.inf
    blocker = None
    while heap:
        val, u = heapq.heappop(heap)
        if blocked[u]:
            level, blocker = val, u
            break
        order.append(u)
        for w in star[u]:
            if not seen[w]:
                seen[w] = True
                heapq.heappush(heap, (max(val, float(vals[w])), int(w)))
    mA = max_over_box(V, A)
    below = vals[vals < level]
    alpha = float(below.max()) if len(below) else -np.inf
    if blocker is None or not np.isfinite(alpha) or alpha <= mA:
        raise NoCertifiedRegion(
            f"no certified level: alpha = {alpha:.6g} does not exceed max V on the target = {mA:.6g}",
            alpha=alpha,
            max_on_target=mA,
            blocker=blocker,
        )
    comp = sorted(u for u in order if vals[u] <= alpha)
    comp_set = np.zeros(Nv, dtype=bool)
    comp_set[comp] = True
    cells = sorted({j for u in comp for j in inc[u]})
    region, kept = [], []
    for j in cells:
        poly = Polygon(tuple(map(tuple, P[t.cells[j]])))
        a = V.a[j]
        if np.any(a != 0.0):
            poly = clip_polygon(poly, Halfplane(tuple(a), alpha - V.b[j]), tol=0.0)
        if poly is not None:
            region.append(poly)
            kept.append(j)
    return CertifiedRoA(alpha, region, bool(comp_set[g]), kept, comp, mA)
