"""Data-consistent uncertainty description of an unknown vector field.

Given samples ``(x_i, f_i)`` and componentwise Lipschitz bounds ``M`` (in the
infinity norm), every admissible field value at ``x`` lies in the box

    f_k^min(x) = max_i f_{k,i} - M_k |x - x_i|_inf
    f_k^max(x) = min_i f_{k,i} + M_k |x - x_i|_inf

which is what :func:`evaluate_bounds` returns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .polytope import TOL, Halfplane, Hyperbox, hyperbox_vertices


class InconsistentData(ValueError):
    """Samples cannot come from a field with the declared Lipschitz bound."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


@dataclass(frozen=True)
class DataPoint:
    x: tuple[float, ...]
    f: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        f = tuple(float(v) for v in self.f)
        if len(x) != len(f):
            raise ValueError("state and field sample must have the same dimension")
        if not all(np.isfinite(x + f)):
            raise ValueError("data point has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class LipschitzBound:
    M: tuple[float, ...]

    def __post_init__(self):
        M = tuple(float(v) for v in self.M)
        if not M or any(not (m > 0.0) for m in M):
            raise ValueError(f"Lipschitz bound must be positive componentwise, got {M}")
        object.__setattr__(self, "M", M)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.M, dtype=float)


class Dataset:
    """Samples over a domain box, validated for pairwise Lipschitz consistency.

    Points are stored as arrays ``X`` (N, n) and ``F`` (N, n). ``add`` returns
    a new dataset; an instance is never mutated after construction.
    """

    def __init__(self, points, domain: Hyperbox, bound: LipschitzBound, tol: float = TOL):
        self.domain = domain
        self.bound = bound
        self.tol = tol
        n = domain.dim
        if len(bound.M) != n:
            raise ValueError("Lipschitz bound dimension does not match the domain")
        X = np.empty((0, n))
        F = np.empty((0, n))
        self.X, self.F = X, F
        pts = [p if isinstance(p, DataPoint) else DataPoint(*p) for p in points]
        self.X, self.F = self._extend(pts)
        self.X.setflags(write=False)
        self.F.setflags(write=False)

    def _extend(self, pts):
        X, F = self.X, self.F
        M = self.bound.as_array()
        for p in pts:
            x = np.asarray(p.x)
            f = np.asarray(p.f)
            if len(x) != self.domain.dim:
                raise ValueError(f"data point {p.x} has wrong dimension")
            if not self.domain.contains(x):
                raise ValueError(f"data point {p.x} lies outside the domain")
            if len(X):
                dist = np.abs(X - x).max(axis=1)
                dup = np.flatnonzero(dist <= self.tol)
                if len(dup):
                    raise ValueError(f"data point {p.x} duplicates sample {int(dup[0])}")
                slack = np.abs(F - f) - M * dist[:, None]
                scale = 1.0 + np.abs(F) + np.abs(f)
                bad = np.flatnonzero((slack > self.tol * scale).any(axis=1))
                if len(bad):
                    j = int(bad[0])
                    raise InconsistentData(
                        f"samples {j} and {len(X)} violate the Lipschitz bound "
                        f"(|f_i - f_j| exceeds M |x_i - x_j|_inf)",
                        pair=(j, len(X)),
                    )
            X = np.vstack([X, x])
            F = np.vstack([F, f])
        return X, F

    def __len__(self):
        return len(self.X)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def points(self) -> list[DataPoint]:
        return [DataPoint(tuple(x), tuple(f)) for x, f in zip(self.X, self.F)]

    def add(self, points) -> "Dataset":
        new = Dataset([], self.domain, self.bound, self.tol)
        new.X, new.F = self.X, self.F
        pts = [p if isinstance(p, DataPoint) else DataPoint(*p) for p in points]
        X, F = new._extend(pts)
        X.setflags(write=False)
        F.setflags(write=False)
        new.X, new.F = X, F
        return new

    def nearest_distance(self, x) -> float:
        if not len(self.X):
            return np.inf
        return float(np.abs(self.X - np.asarray(x, dtype=float)).max(axis=1).min())

    @classmethod
    def from_csv(cls, path, domain: Hyperbox, bound: LipschitzBound) -> "Dataset":
        """Read ``x1..xn, f1..fn`` columns (header required)."""
        n = domain.dim
        want = [f"x{k + 1}" for k in range(n)] + [f"f{k + 1}" for k in range(n)]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != want:
                raise ValueError(f"{path}: expected header {','.join(want)}, got {','.join(header)}")
            pts = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2 * n:
                    raise ValueError(f"{path}:{lineno}: expected {2 * n} columns, got {len(row)}")
                try:
                    vals = [float(c) for c in row]
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                pts.append(DataPoint(vals[:n], vals[n:]))
        return cls(pts, domain, bound)

    def to_csv(self, path) -> None:
        n = self.dim
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(n)] + [f"f{k + 1}" for k in range(n)])
            for x, f in zip(self.X, self.F):
                w.writerow([repr(float(v)) for v in (*x, *f)])


def bounds_many(P, d: Dataset, check: bool = True):
    """Vectorised :func:`evaluate_bounds` for an array of states ``P`` (m, n).

    Returns ``(lower, upper)`` arrays of shape (m, n).
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if not len(d):
        raise ValueError("dataset is empty")
    M = d.bound.as_array()
    lo = np.full(P.shape, -np.inf)
    hi = np.full(P.shape, np.inf)
    # chunk over data points to keep the (m, N) distance matrix small
    step = max(1, 2_000_000 // max(1, len(P)))
    for s in range(0, len(d), step):
        dist = np.abs(P[:, None, :] - d.X[None, s : s + step, :]).max(axis=2)
        rad = dist[:, :, None] * M
        lo = np.maximum(lo, (d.F[None, s : s + step, :] - rad).max(axis=1))
        hi = np.minimum(hi, (d.F[None, s : s + step, :] + rad).min(axis=1))
    if check:
        gap = lo - hi
        bad = np.argwhere(gap > TOL * (1.0 + np.abs(lo) + np.abs(hi)))
        if len(bad):
            i, k = bad[0]
            raise InconsistentData(
                f"empty interval for component {k + 1} at x = {tuple(map(float, P[i]))}: "
                f"[{lo[i, k]:.6g}, {hi[i, k]:.6g}]"
            )
        hi = np.maximum(hi, lo)
    return lo, hi


def evaluate_bounds(x, d: Dataset) -> Hyperbox:
    """Box of all field values at ``x`` consistent with the data and the bound."""
    x = np.asarray(x, dtype=float)
    if not d.domain.contains(x):
        raise ValueError(f"x = {tuple(map(float, x))} lies outside the domain")
    lo, hi = bounds_many(x[None, :], d)
    return Hyperbox(tuple(lo[0]), tuple(hi[0]))


def vector_field_vertices(x, d: Dataset) -> list[tuple[float, ...]]:
    return hyperbox_vertices(evaluate_bounds(x, d))


def contains_zero(box: Hyperbox) -> bool:
    return all(lo <= 0.0 <= hi for lo, hi in zip(box.lower, box.upper))


def cone_halfspaces(p: DataPoint, kappa: int, axis: int, sign: int, m: LipschitzBound) -> list[Halfplane]:
    """Halfspaces in ``(x, z)`` space of one cone of the admissible graph.

    The cone has apex ``(x_i, f_{kappa,i})`` and opens along state axis
    ``axis`` in direction ``sign`` (+1 or -1); it holds the pairs for which
    ``axis`` attains ``|x - x_i|_inf`` and ``|z - f_{kappa,i}| <= M_kappa |x - x_i|_inf``.
    Indices are zero-based. The row that is identically zero (``x_axis``
    against itself) is omitted, leaving ``2n + 1`` halfspaces.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    xi = np.asarray(p.x, dtype=float)
    n = len(xi)
    if not (0 <= kappa < n and 0 <= axis < n):
        raise ValueError("component and axis indices must lie in [0, n)")
    eta = np.append(np.ones(n), m.M[kappa])
    apex = np.append(xi, p.f[kappa])
    e = np.zeros(n + 1)
    e[axis] = 1.0
    eye = np.eye(n + 1)
    out = []
    # rows: +/-(w_k - apex_k) <= sign * eta_k * (x_axis - x_axis,i)
    for upper in (True, False):
        for k in range(n + 1):
            row = (eye[k] if upper else -eye[k]) - sign * eta[k] * e
            rhs = float(row @ apex)
            if np.allclose(row, 0.0):
                continue
            out.append(Halfplane(tuple(row), rhs))
    return out


def _diagonal_offsets(X, tol):
    """Distinct offsets of the lines x2 - x1 = c (slope +1) and x1 + x2 = c."""
    def distinct(vals):
        vals = np.sort(vals)
        keep = np.ones(len(vals), dtype=bool)
        keep[1:] = np.diff(vals) > tol
        return vals[keep]

    return distinct(X[:, 1] - X[:, 0]), distinct(X[:, 0] + X[:, 1])


def _box_hits(cp, cm, box: Hyperbox):
    """Points where the diagonal lines meet the boundary of ``box``."""
    (x0, y0), (x1, y1) = box.lower, box.upper
    hits = []
    for c in cp:  # x2 = x1 + c
        hits += [(x0, x0 + c), (x1, x1 + c), (y0 - c, y0), (y1 - c, y1)]
    for c in cm:  # x2 = c - x1
        hits += [(x0, c - x0), (x1, c - x1), (c - y0, y0), (c - y1, y1)]
    hits = np.array(hits, dtype=float).reshape(-1, 2)
    lo, hi = np.array([x0, y0]), np.array([x1, y1])
    inside = np.all((hits >= lo - TOL) & (hits <= hi + TOL), axis=1)
    return np.clip(hits[inside], lo, hi)


def _merge_points(groups, tol):
    """Greedy merge; earlier groups win over later ones."""
    P = np.concatenate([np.asarray(g, dtype=float).reshape(-1, 2) for g in groups])
    if not len(P):
        return P
    from scipy.spatial import cKDTree

    tree = cKDTree(P)
    taken = np.zeros(len(P), dtype=bool)
    keep = []
    for i in range(len(P)):
        if taken[i]:
            continue
        keep.append(i)
        taken[tree.query_ball_point(P[i], tol)] = True
    return P[keep]


def partition_seed_vertices(d: Dataset, target: Hyperbox | None = None, merge_tol: float = TOL) -> np.ndarray:
    """Tessellation seeds for a 2-D dataset.

    The set holds the corners of the domain and of ``target``, every data
    point, every pairwise crossing (inside the domain) of the lines
    ``x1 - x1_i = +/-(x2 - x2_i)`` through the data points, and the points
    where those lines meet the boundaries of the domain and of ``target``. Points closer than
    ``merge_tol`` are merged, domain corners taking priority. The result is
    sorted lexicographically.
    """
    if d.dim != 2:
        raise ValueError("partition seeds are implemented for n = 2 only")
    if not len(d):
        raise ValueError("dataset is empty")
    (x0, y0), (x1, y1) = d.domain.lower, d.domain.upper
    lo = np.array([x0, y0])
    hi = np.array([x1, y1])
    groups = [np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])]
    if target is not None:
        (a0, b0), (a1, b1) = target.lower, target.upper
        groups.append(np.array([[a0, b0], [a0, b1], [a1, b0], [a1, b1]]))
    groups.append(d.X)

    cp, cm = _diagonal_offsets(d.X, TOL)
    # x2 - x1 = cp and x1 + x2 = cm meet at ((cm - cp) / 2, (cm + cp) / 2)
    px = (cm[None, :] - cp[:, None]) / 2.0
    py = (cm[None, :] + cp[:, None]) / 2.0
    cross = np.stack([px.ravel(), py.ravel()], axis=1)
    inside = np.all((cross >= lo - TOL) & (cross <= hi + TOL), axis=1)
    groups.append(np.clip(cross[inside], lo, hi))

    groups.append(_box_hits(cp, cm, d.domain))
    if target is not None:
        groups.append(_box_hits(cp, cm, target))

    P = _merge_points(groups, merge_tol)
    order = np.lexsort((P[:, 1], P[:, 0]))
    return P[order]
