"""Linear programs ``min c.y  s.t.  G y <= h,  E y = d`` with free ``y``.

The built-in solver is a revised simplex method that works on the row
(active-set) side: a basis is a set of ``n`` rows of ``[G; E; I]`` whose
intersection is the current point. Unit rows ``e_k`` are placeholders for
coordinates not yet pinned by a real constraint; they let free variables
be handled without splitting them into signed parts, and they leave the
basis as soon as their multiplier is nonzero. Equality rows never leave
once they are in. The basis matrix is kept as a sparse LU factorisation
plus a short file of rank-one (eta) updates and is refactored periodically.

Pricing is Dantzig's largest-violation rule. After 1000 consecutive
degenerate pivots it switches to Bland's smallest-index rule until a step
makes progress again.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

MAX_ITER = 1_000_000
BLAND_AFTER = 1000
REFACTOR_EVERY = 64


class NumericalFailure(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """``min c.y`` subject to ``G y <= h`` and ``E y = d``; ``y`` is free."""

    c: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    E: sp.csr_matrix
    d: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = len(self.c)
        self.G = _as_csr(self.G, n)
        self.E = _as_csr(self.E, n)
        self.h = np.asarray(self.h, dtype=float).ravel()
        self.d = np.asarray(self.d, dtype=float).ravel()
        if self.G.shape[0] != len(self.h):
            raise ValueError(f"G has {self.G.shape[0]} rows but h has {len(self.h)} entries")
        if self.E.shape[0] != len(self.d):
            raise ValueError(f"E has {self.E.shape[0]} rows but d has {len(self.d)} entries")
        for name, arr in (("c", self.c), ("h", self.h), ("d", self.d), ("G", self.G.data), ("E", self.E.data)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def n_vars(self) -> int:
        return len(self.c)


def _as_csr(M, n):
    if M is None:
        return sp.csr_matrix((0, n))
    if sp.issparse(M):
        M = sp.csr_matrix(M, dtype=float)
    else:
        M = sp.csr_matrix(np.asarray(M, dtype=float).reshape(-1, n))
    if M.shape[1] != n:
        raise ValueError(f"constraint matrix has {M.shape[1]} columns, expected {n}")
    return M


@dataclass
class LPSolution:
    status: str
    y: np.ndarray | None = None
    objective_value: float | None = None
    # multipliers with c + G'lam_ineq + E'lam_eq = 0 and lam_ineq >= 0
    lam_ineq: np.ndarray | None = None
    lam_eq: np.ndarray | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)


class _Factor:
    """Factorisation of ``M = B'`` with product-form updates.

    ``B`` holds the basis rows, so ``B y = b`` is a forward solve
    (``ftran``) and ``B' v = x`` a backward one (``btran``).
    """

    def __init__(self, A, W):
        self.A = A
        self.rebuild(W)

    def rebuild(self, W):
        M = self.A[W].T.tocsc()
        try:
            self.lu = splu(M, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalFailure(f"singular basis: {exc}") from None
        self.etas: list[tuple[int, np.ndarray, float]] = []

    def ftran(self, x):
        x = np.array(x, dtype=float)
        for s, z, ws in reversed(self.etas):
            x[s] -= z @ x / ws
        return self.lu.solve(x, trans="T")

    def btran(self, x):
        v = self.lu.solve(np.asarray(x, dtype=float))
        for s, z, ws in self.etas:
            v = v - z * (v[s] / ws)
        return v

    def update(self, s, w):
        z = w.copy()
        z[s] -= 1.0
        self.etas.append((s, z, float(w[s])))


def _active_set(c, A, b, n_ineq, n_eq, y0, tol=1e-9, max_iter=MAX_ITER):
    """Core iteration from a feasible point ``y0``.

    ``A`` stacks ``[G; E; I]``; ``b`` the matching right-hand sides, the
    unit rows carrying ``y0``. Returns ``(status, y, W, lam, iterations)``.
    """
    n = len(c)
    m = n_ineq + n_eq
    Areal = A[:m]
    norms = np.sqrt(np.asarray(Areal.multiply(Areal).sum(axis=1)).ravel())
    norms = np.maximum(norms, 1e-300)
    W = np.arange(m, m + n)
    in_W = np.zeros(m + n, dtype=bool)
    in_W[W] = True
    fac = _Factor(A, W)
    y = np.array(y0, dtype=float)
    r = b[:m] - Areal @ y
    cscale = max(1.0, float(np.abs(c).max()) if n else 1.0)
    dtol = tol * cscale
    degenerate_run = 0
    bland = False
    it = 0
    while True:
        if it >= max_iter:
            raise NumericalFailure(f"simplex exceeded {max_iter} iterations")
        lam = -fac.btran(c)
        is_ineq = W < n_ineq
        is_art = W >= m
        viol = np.zeros(n)
        viol[is_ineq] = -lam[is_ineq]
        viol[is_art] = np.abs(lam[is_art])
        cand = np.flatnonzero(viol > dtol)
        if not len(cand):
            return OPTIMAL, y, W, lam, it
        if bland:
            s = int(cand[np.argmin(W[cand])])
        else:
            s = int(cand[np.argmax(viol[cand])])
        sigma = 1.0 if lam[s] > 0 else -1.0
        e = np.zeros(n)
        e[s] = sigma
        dvec = fac.ftran(e)
        scale = float(np.abs(dvec).max())
        if scale == 0.0:
            raise NumericalFailure("zero search direction")
        dvec /= scale
        g = Areal @ dvec
        gn = g / norms
        free = ~in_W[:m]
        blk_i = free.copy()
        blk_i[n_ineq:] = False
        blk_i &= gn > tol
        blk_e = free.copy()
        blk_e[:n_ineq] = False
        blk_e &= np.abs(gn) > tol
        rows_i = np.flatnonzero(blk_i)
        rows_e = np.flatnonzero(blk_e)
        if not len(rows_i) and not len(rows_e):
            return UNBOUNDED, y, W, lam, it
        rpos = np.maximum(r[rows_i], 0.0)
        ratio_i = rpos / g[rows_i]
        ratio_e = np.zeros(len(rows_e))
        rows = np.concatenate([rows_i, rows_e])
        ratio = np.concatenate([ratio_i, ratio_e])
        if bland:
            tmin = ratio.min()
            ties = rows[ratio <= tmin + tol * max(1.0, tmin)]
            p = int(ties.min())
        else:
            # Harris two-pass: loosen by tol, then take the largest pivot
            relaxed = np.concatenate([(rpos + tol * norms[rows_i]) / g[rows_i], ratio_e + tol])
            tmax = relaxed.min()
            near = np.flatnonzero(ratio <= tmax)
            piv = np.abs(gn[rows[near]])
            best = piv.max()
            pick = near[piv >= best * (1 - 1e-12)]
            p = int(rows[pick].min())
        t = float(max(r[p], 0.0) / g[p]) if p < n_ineq else 0.0
        if t > 0.0:
            y = y + t * dvec
            r = r - t * g
        w = fac.btran(A[p].toarray().ravel())
        if abs(w[s]) < 1e-11 * max(1.0, float(np.abs(w).max())):
            raise NumericalFailure(f"pivot element {w[s]:.3e} too small")
        in_W[W[s]] = False
        W[s] = p
        in_W[p] = True
        fac.update(s, w)
        it += 1
        if t * scale <= 1e-12:
            degenerate_run += 1
            if degenerate_run >= BLAND_AFTER and not bland:
                log.debug("switching to Bland's rule after %d degenerate pivots", degenerate_run)
                bland = True
        else:
            degenerate_run = 0
            bland = False
        if len(fac.etas) >= REFACTOR_EVERY:
            fac.rebuild(W)
            y = fac.ftran(b[W])
            r = b[:m] - Areal @ y


def _stack(p: LinearProgram):
    n = p.n_vars
    A = sp.vstack([p.G, p.E, sp.identity(n, format="csr")], format="csr")
    return A


def _builtin(p: LinearProgram, tol: float = 1e-9, max_iter: int = MAX_ITER) -> LPSolution:
    n = p.n_vars
    mG, mE = p.G.shape[0], p.E.shape[0]
    y0 = np.zeros(n)
    feas_tol = 1e-9
    total_it = 0
    if (mG and p.h.min() < -feas_tol) or (mE and np.abs(p.d).max() > feas_tol):
        # phase 1 in (y, t): min t  s.t.  G y - t <= h,  +-(E y - d) <= t,  t >= 0
        one = sp.csr_matrix(np.ones((mG, 1)))
        oneE = sp.csr_matrix(np.ones((mE, 1)))
        G1 = sp.vstack(
            [
                sp.hstack([p.G, -one]),
                sp.hstack([p.E, -oneE]),
                sp.hstack([-p.E, -oneE]),
                sp.hstack([sp.csr_matrix((1, n)), -sp.identity(1)]),
            ],
            format="csr",
        )
        h1 = np.concatenate([p.h, p.d, -p.d, [0.0]])
        c1 = np.zeros(n + 1)
        c1[-1] = 1.0
        t0 = max(0.0, float(-p.h.min()) if mG else 0.0, float(np.abs(p.d).max()) if mE else 0.0)
        start = np.append(y0, t0)
        A1 = sp.vstack([G1, sp.identity(n + 1, format="csr")], format="csr")
        b1 = np.concatenate([h1, start])
        status, z, _, _, it1 = _active_set(c1, A1, b1, G1.shape[0], 0, start, tol, max_iter)
        total_it += it1
        if status != OPTIMAL:
            raise NumericalFailure(f"phase 1 ended {status}")
        if z[-1] > 1e-7:
            return LPSolution(INFEASIBLE, iterations=total_it, info={"infeasibility": float(z[-1])})
        y0 = z[:n]
    A = _stack(p)
    b = np.concatenate([p.h, p.d, y0])
    status, y, W, lam, it2 = _active_set(p.c, A, b, mG, mE, y0, tol, max_iter - total_it)
    total_it += it2
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=total_it)
    lam_ineq = np.zeros(mG)
    lam_eq = np.zeros(mE)
    for k, row in enumerate(W):
        if row < mG:
            lam_ineq[row] = max(lam[k], 0.0)
        elif row < mG + mE:
            lam_eq[row - mG] = lam[k]
    return LPSolution(OPTIMAL, y, float(p.c @ y), lam_ineq, lam_eq, total_it)


def _highs(p: LinearProgram, **_) -> LPSolution:
    from scipy.optimize import linprog

    n = p.n_vars
    res = linprog(
        p.c,
        A_ub=p.G if p.G.shape[0] else None,
        b_ub=p.h if p.G.shape[0] else None,
        A_eq=p.E if p.E.shape[0] else None,
        b_eq=p.d if p.E.shape[0] else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status == 2:
        return LPSolution(INFEASIBLE)
    if res.status == 3:
        return LPSolution(UNBOUNDED)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS: {res.message}")
    lam_ineq = -np.asarray(res.ineqlin.marginals) if p.G.shape[0] else np.zeros(0)
    lam_eq = -np.asarray(res.eqlin.marginals) if p.E.shape[0] else np.zeros(0)
    return LPSolution(OPTIMAL, np.asarray(res.x), float(res.fun), lam_ineq, lam_eq, int(res.nit))


BACKENDS = {"builtin": _builtin, "highs": _highs}


def solve(p: LinearProgram, backend: str = "builtin", **kwargs) -> LPSolution:
    """Solve ``p`` with the named backend (``builtin`` or ``highs``)."""
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return fn(p, **kwargs)
