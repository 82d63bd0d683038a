"""Low-dimensional polyhedral primitives.

Polygons are kept in vertex form, counterclockwise, convex. Halfplanes are
``normal . x <= offset``. Everything here is exact enough for unit-scale
boxes; incidence tests use a fixed absolute tolerance ``TOL``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


@dataclass(frozen=True)
class Halfplane:
    """The closed set ``{x : normal . x <= offset}``."""

    normal: tuple[float, ...]
    offset: float

    def __post_init__(self):
        normal = tuple(float(v) for v in self.normal)
        if not any(normal):
            raise ValueError("halfplane normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, x) -> float:
        """Signed violation ``normal . x - offset`` (<= 0 means inside)."""
        return float(np.dot(self.normal, x) - self.offset)


@dataclass(frozen=True)
class Hyperbox:
    """Axis-aligned box ``[lower, upper]``; degenerate axes are allowed."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box: lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.subtract(self.lower, tol)) and np.all(x <= np.add(self.upper, tol)))

    def contains_interior(self, x, tol: float = TOL) -> bool:
        """Strict containment, at least ``tol`` away from every face."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > np.add(self.lower, tol)) and np.all(x < np.subtract(self.upper, tol)))

    def on_boundary(self, x, tol: float = TOL) -> bool:
        return self.contains(x, tol) and not self.contains_interior(x, tol)

    def is_subset_of(self, other: "Hyperbox") -> bool:
        return all(a >= c for a, c in zip(self.lower, other.lower)) and all(
            b <= d for b, d in zip(self.upper, other.upper)
        )

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def to_polygon(self) -> "Polygon":
        if self.dim != 2:
            raise ValueError("only 2-D boxes convert to polygons")
        (x0, y0), (x1, y1) = self.lower, self.upper
        return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


@dataclass(frozen=True)
class Polygon:
    """Convex polygon, vertices counterclockwise (no repeated closing vertex)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))

    def __len__(self):
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float).reshape(-1, 2)

    def area(self) -> float:
        return polygon_area(self.vertices)

    def centroid(self) -> np.ndarray:
        return self.as_array().mean(axis=0)


def polygon_area(vertices) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _dedupe_ring(points, tol=TOL):
    out = []
    for p in points:
        if not out or max(abs(p[0] - out[-1][0]), abs(p[1] - out[-1][1])) > tol:
            out.append(p)
    while len(out) > 1 and max(abs(out[0][0] - out[-1][0]), abs(out[0][1] - out[-1][1])) <= tol:
        out.pop()
    return out


def clip_polygon(poly: Polygon | None, h: Halfplane, tol: float = TOL) -> Polygon | None:
    """Intersect a convex polygon with one halfplane (Sutherland-Hodgman step).

    Returns ``None`` when nothing of positive extent is left. Orientation is
    preserved.
    """
    if poly is None or len(poly) == 0:
        return None
    a = np.asarray(h.normal, dtype=float)
    pts = poly.vertices
    vals = [float(a[0] * p[0] + a[1] * p[1] - h.offset) for p in pts]
    if max(vals) <= tol:
        return poly
    if min(vals) > -tol:
        return None
    out = []
    k = len(pts)
    for i in range(k):
        p, q = pts[i], pts[(i + 1) % k]
        vp, vq = vals[i], vals[(i + 1) % k]
        if vp <= tol:
            out.append(p)
        if (vp < -tol and vq > tol) or (vp > tol and vq < -tol):
            t = vp / (vp - vq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    out = _dedupe_ring(out, tol)
    if len(out) < 3 or polygon_area(out) <= tol * tol:
        return None
    return Polygon(tuple(out))


def intersect_halfplanes(halfplanes, bbox: Hyperbox) -> Polygon | None:
    """Convex polygon ``{x in bbox : every halfplane holds}``, or ``None``."""
    if bbox.dim != 2:
        raise ValueError("halfplane intersection is implemented for n = 2 only")
    poly = bbox.to_polygon()
    for h in halfplanes:
        poly = clip_polygon(poly, h)
        if poly is None:
            return None
    return poly


def contains(poly: Polygon | None, x, tol: float = TOL) -> bool:
    """True iff ``x`` lies in the convex polygon or within ``tol`` of its boundary."""
    if poly is None or len(poly) == 0:
        return False
    pts = poly.as_array()
    px, py = float(x[0]), float(x[1])
    k = len(pts)
    for i in range(k):
        p, q = pts[i], pts[(i + 1) % k]
        ex, ey = q[0] - p[0], q[1] - p[1]
        length = np.hypot(ex, ey)
        if length == 0.0:
            continue
        # signed distance to the edge line, positive outside for ccw order
        if (ex * (py - p[1]) - ey * (px - p[0])) / length < -tol:
            return False
    return True


def hyperbox_vertices(box: Hyperbox) -> list[tuple[float, ...]]:
    """Corner points of a box in lexicographic order, collapsed axes merged."""
    axes = [(lo,) if lo == hi else (lo, hi) for lo, hi in zip(box.lower, box.upper)]
    return [tuple(c) for c in itertools.product(*axes)]
