"""Iterative certification loop and trajectory-based validation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import OPTIMAL, solve
from .lyapunov import (
    SLACK_TOL,
    CertifiedRoA,
    NoCertifiedRegion,
    PWALyapunov,
    assemble_certification_lp,
    extract_certified_roa,
    in_box,
    in_open_box,
    lyapunov_from_solution,
)
from .polytope import Hyperbox
from .systems import Oracle, OracleUnavailable
from .tessellation import Tessellation, locate_many, triangulate_conforming
from .uncertainty import Dataset, DataPoint, LipschitzBound, bounds_many, partition_seed_vertices

log = logging.getLogger(__name__)

CERTIFIED = "certified"
ITERATION_LIMIT = "iteration_limit"
NO_REGION = "no_region"


class UndeclaredEquilibrium(RuntimeError):
    """The field vanishes at a vertex outside the target set."""


@dataclass(frozen=True)
class CertifierConfig:
    X: Hyperbox
    A: Hyperbox
    M: LipschitzBound
    mu: float = 100.0
    iteration_limit: int = 10
    seed: int = 0
    initial_random_points: int = 2
    max_data: int = 1500
    enrich_cap: int = 64
    seed_merge_tol: float = 1e-9
    slack_tol: float = SLACK_TOL
    lp_backend: str = "builtin"

    def __post_init__(self):
        if self.X.dim != 2 or self.A.dim != 2:
            raise ValueError("only planar systems (n = 2) are supported")
        if len(self.M.M) != self.X.dim:
            raise ValueError("Lipschitz bound dimension does not match the domain")
        if not self.A.is_subset_of(self.X):
            raise ValueError("target set A must be contained in the domain X")
        if not all(lo < 0.0 < hi for lo, hi in zip(self.A.lower, self.A.upper)):
            raise ValueError("the origin must lie in the interior of A")
        if not all(lo < hi for lo, hi in zip(self.X.lower, self.X.upper)):
            raise ValueError("domain X must have positive extent")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.iteration_limit < 1:
            raise ValueError("iteration limit must be at least 1")
        if self.initial_random_points < 0:
            raise ValueError("initial_random_points must be non-negative")


@dataclass
class IterationRecord:
    iteration: int
    N_d: int
    N_c: int
    N_v: int
    T_data: float
    T_con: float | None
    T_opt: float | None
    action: str = ""
    added: int = 0
    nonneg_slacks: int | None = None


@dataclass
class CertificationResult:
    terminated: str
    lyapunov: PWALyapunov | None
    roa: CertifiedRoA | None
    history: list[IterationRecord]
    dataset: Dataset
    config: CertifierConfig
    message: str = ""
    # vertices outside A with s_u >= 0 anywhere in the domain
    nonneg_outside_roa: int | None = None
    nonneg_inside_roa: int | None = None


def initial_dataset(cfg: CertifierConfig, o: Oracle) -> Dataset:
    """Seeded uniform samples in ``X`` plus the equilibrium at the origin."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.asarray(cfg.X.lower), np.asarray(cfg.X.upper)
    pts = rng.uniform(lo, hi, size=(cfg.initial_random_points, cfg.X.dim))
    F = o(pts) if len(pts) else np.empty((0, cfg.X.dim))
    data = [DataPoint(tuple(x), tuple(f)) for x, f in zip(pts, F)]
    data.append(DataPoint((0.0,) * cfg.X.dim, (0.0,) * cfg.X.dim))
    return Dataset(data, cfg.X, cfg.M)


def _fresh(points, data: Dataset, tol=1e-9):
    """Drop points that duplicate each other or existing samples."""
    out = []
    for p in points:
        if data.nearest_distance(p) <= tol:
            continue
        if any(np.abs(p - q).max() <= tol for q in out):
            continue
        out.append(np.asarray(p, dtype=float))
    return out


def _enrich(data: Dataset, points, o: Oracle, cfg: CertifierConfig):
    room = cfg.max_data - len(data)
    points = _fresh(points, data)[: max(room, 0)]
    if not points:
        return data, 0, ""
    try:
        F = o(np.array(points))
    except OracleUnavailable as exc:
        return data, 0, f"oracle unavailable: {exc}"
    new = [DataPoint(tuple(x), tuple(f)) for x, f in zip(points, F)]
    return data.add(new), len(new), ""


def _check_equilibria(P, lo, hi, zero, data: Dataset):
    for u in np.flatnonzero(zero):
        if data.nearest_distance(P[u]) <= 1e-9 and np.all(lo[u] == hi[u]):
            raise UndeclaredEquilibrium(
                f"the field vanishes at x = {tuple(float(v) for v in P[u])}, outside the target set; "
                "no Lyapunov decrease is possible there"
            )


def decrease_margins(V: PWALyapunov, lo, hi) -> np.ndarray:
    """Largest ``a_j . f`` over incident cells and box corners, per vertex."""
    t = V.tess
    worst = np.full(t.n_vertices, -np.inf)
    for u, cells in enumerate(t.incident_cells()):
        a = V.a[cells]
        worst[u] = float(np.maximum(a * lo[u], a * hi[u]).sum(axis=1).max())
    return worst


def _nonneg_counts(V, roa, cfg):
    P = V.tess.vertices
    outside_A = ~in_open_box(P, cfg.A)
    nonneg = outside_A & (V.s >= -cfg.slack_tol)
    inside = np.zeros(len(P), dtype=bool)
    if roa is not None:
        for j in roa.cells:
            inside[V.tess.cells[j]] = True
    return int((nonneg & ~inside).sum()), int((nonneg & inside).sum())


def run(cfg: CertifierConfig, o: Oracle, data: Dataset | None = None) -> CertificationResult:
    """Enrich data until a certified region of attraction is found."""
    if data is None:
        data = initial_dataset(cfg, o)
    history: list[IterationRecord] = []
    V = None
    message = ""
    for it in range(1, cfg.iteration_limit + 1):
        t0 = time.perf_counter()
        seeds = partition_seed_vertices(data, cfg.A, cfg.seed_merge_tol)
        tess = triangulate_conforming(seeds, cfg.X, cfg.A)
        P = tess.vertices
        lo, hi = bounds_many(P, data)
        T_data = time.perf_counter() - t0
        rec = IterationRecord(it, len(data), tess.n_cells, tess.n_vertices, T_data, None, None)
        history.append(rec)

        zero = np.all((lo <= 0.0) & (hi >= 0.0), axis=1) & ~in_open_box(P, cfg.A)
        if zero.any():
            _check_equilibria(P, lo, hi, zero, data)
            data, added, why = _enrich(data, P[zero], o, cfg)
            rec.action, rec.added = "enrich-zero", added
            log.info("iteration %d: %d vertices admit zero velocity, added %d points", it, int(zero.sum()), added)
            if not added:
                message = why or "no new data could be added"
                return CertificationResult(NO_REGION, V, None, history, data, cfg, message)
            continue

        t1 = time.perf_counter()
        boxes = [Hyperbox(tuple(l), tuple(h)) for l, h in zip(lo, hi)]
        lp, layout = assemble_certification_lp(tess, boxes, cfg.A, cfg.mu)
        rec.T_con = time.perf_counter() - t1
        t2 = time.perf_counter()
        sol = solve(lp, backend=cfg.lp_backend)
        rec.T_opt = time.perf_counter() - t2
        if sol.status != OPTIMAL:
            # y = 0 is always feasible and the slack floor bounds the objective
            raise RuntimeError(f"certification LP returned {sol.status}")
        V = lyapunov_from_solution(tess, sol.y)
        outside = ~in_open_box(P, cfg.A)
        rec.nonneg_slacks = int((outside & (V.s >= -cfg.slack_tol)).sum())

        try:
            roa = extract_certified_roa(V, tess, cfg.A, cfg.X, cfg.slack_tol)
        except NoCertifiedRegion as exc:
            roa, blocker = None, exc.blocker
            message = str(exc)
        else:
            margins = decrease_margins(V, lo, hi)
            touched = np.zeros(len(P), dtype=bool)
            for j in roa.cells:
                touched[tess.cells[j]] = True
            failed = touched & outside & (margins >= 0.0)
            if not failed.any():
                rec.action = "certified"
                n_out, n_in = _nonneg_counts(V, roa, cfg)
                return CertificationResult(CERTIFIED, V, roa, history, data, cfg, "", n_out, n_in)
            # the solver's slacks disagree with a direct evaluation
            log.warning("iteration %d: %d region vertices fail the direct decrease check", it, int(failed.sum()))
            message = "certificate rejected by the direct decrease check"
            roa, blocker = None, int(np.flatnonzero(failed)[0])

        idx = np.flatnonzero(outside & (V.s >= -cfg.slack_tol))
        idx = idx[np.argsort(-V.s[idx], kind="stable")][: cfg.enrich_cap]
        if len(idx):
            new = P[idx]
            rec.action = "enrich-slack"
        else:
            # every slack is negative, yet the level set meets the boundary
            # first: refine the cells around the blocking vertex
            cells = tess.incident_cells()[blocker] if blocker is not None else []
            new = P[tess.cells[cells]].mean(axis=1)[:8]
            rec.action = "enrich-blocker"
        data, added, why = _enrich(data, new, o, cfg)
        rec.added = added
        log.info("iteration %d: %s, added %d points", it, rec.action, added)
        if not added:
            message = why or "no new data could be added"
            n_out, _ = _nonneg_counts(V, None, cfg)
            return CertificationResult(NO_REGION, V, None, history, data, cfg, message, n_out)
    n_out = _nonneg_counts(V, None, cfg)[0] if V is not None else None
    return CertificationResult(ITERATION_LIMIT, V, None, history, data, cfg, message, n_out)


@dataclass
class ValidationReport:
    samples: int
    stayed_in_X: float
    reached_A: float
    monotone: float
    passed: float
    worst_increase: float
    failures: list = field(default_factory=list)


def sample_region(roa: CertifiedRoA, n: int, rng) -> np.ndarray:
    """Uniform samples from the union of the region's convex pieces."""
    tris, areas = [], []
    for poly in roa.region:
        pts = poly.as_array()
        for k in range(1, len(pts) - 1):
            tri = np.array([pts[0], pts[k], pts[k + 1]])
            e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
            area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
            if area > 0:
                tris.append(tri)
                areas.append(area)
    if not tris:
        return np.empty((0, 2))
    tris = np.array(tris)
    p = np.array(areas) / np.sum(areas)
    which = rng.choice(len(tris), size=n, p=p)
    r1, r2 = rng.random(n), rng.random(n)
    flip = r1 + r2 > 1
    r1[flip], r2[flip] = 1 - r1[flip], 1 - r2[flip]
    T = tris[which]
    return T[:, 0] + r1[:, None] * (T[:, 1] - T[:, 0]) + r2[:, None] * (T[:, 2] - T[:, 0])


class _Tracker:
    """Evaluates V along slowly moving points, caching each point's cell."""

    def __init__(self, V: PWALyapunov):
        self.V = V
        t = V.tess
        p = t.vertices[t.cells]
        self.a_, self.b_, self.c_ = p[:, 0], p[:, 1], p[:, 2]
        self.cell = None

    def _inside(self, X, cell):
        ok = np.ones(len(X), dtype=bool)
        for u, v in ((self.a_, self.b_), (self.b_, self.c_), (self.c_, self.a_)):
            U, W = u[cell], v[cell]
            e = W - U
            cross = e[:, 0] * (X[:, 1] - U[:, 1]) - e[:, 1] * (X[:, 0] - U[:, 0])
            ok &= cross >= -1e-12 * np.hypot(e[:, 0], e[:, 1])
        return ok

    def __call__(self, X):
        if self.cell is None:
            self.cell = locate_many(self.V.tess, X)
        else:
            stale = ~self._inside(X, self.cell)
            if stale.any():
                self.cell[stale] = locate_many(self.V.tess, X[stale])
        j = self.cell
        return np.einsum("ij,ij->i", self.V.a[j], X) + self.V.b[j]


def validate_roa(
    o: Oracle,
    result: CertificationResult,
    samples: int = 100,
    dt: float = 1e-3,
    horizon: float = 20.0,
    seed: int = 0,
    rel_tol: float = 1e-3,
    starts=None,
) -> ValidationReport:
    """Integrate RK4 trajectories from uniform starts in the certified region.

    A trajectory passes when it stays in ``X``, enters ``A`` before the
    horizon, and, until it first enters ``A``, never rises more than
    ``rel_tol * range(V)`` above the lowest value of ``V`` seen so far.
    """
    if result.roa is None or result.lyapunov is None:
        raise ValueError("validation needs a certified result")
    X, A = result.config.X, result.config.A
    V = result.lyapunov
    if starts is None:
        rng = np.random.default_rng(seed)
        starts = sample_region(result.roa, samples, rng)
    x = np.array(starts, dtype=float).reshape(-1, 2)
    x = x[in_box(x, X, 0.0)]
    x0 = x.copy()
    n = len(x)
    vals = V.vertex_values()
    tol = rel_tol * float(vals.max() - vals.min())
    lo, hi = np.asarray(X.lower), np.asarray(X.upper)
    track = _Tracker(V)
    run_min = track(x)
    in_X = np.ones(n, dtype=bool)
    reached = in_box(x, A, 0.0)
    mono = np.ones(n, dtype=bool)
    worst = 0.0
    f = o.f
    for _ in range(int(round(horizon / dt))):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        in_X &= inside
        active = ~reached & inside
        if active.any():
            v = track(np.clip(x, lo, hi))
            rise = np.where(active, v - run_min, -np.inf)
            worst = max(worst, float(rise.max()))
            mono &= ~(active & (rise > tol))
            run_min = np.where(active, np.minimum(run_min, v), run_min)
        reached |= in_box(x, A, 0.0)
    ok = in_X & reached & mono
    fails = [tuple(map(float, s)) for s in x0[~ok]]
    scale = float(vals.max() - vals.min()) or 1.0
    return ValidationReport(
        n,
        float(in_X.mean()) if n else 1.0,
        float(reached.mean()) if n else 1.0,
        float(mono.mean()) if n else 1.0,
        float(ok.mean()) if n else 1.0,
        worst / scale,
        fails,
    )
