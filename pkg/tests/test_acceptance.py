"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Lines are also collected and repeated in the terminal summary.
"""

import time

import numpy as np

from conftest import certify_builtin, config_text, record_criterion
from lp_oracle import brute_solve, random_lp
from pwaroa.certifier import CERTIFIED, UndeclaredEquilibrium, validate_roa
from pwaroa.cli import main
from pwaroa.lp import OPTIMAL, LinearProgram, solve
from pwaroa.lyapunov import in_open_box, max_over_box
from pwaroa.polytope import Hyperbox, contains, hyperbox_vertices
from pwaroa.report import build_report
from pwaroa.systems import builtin_example
from pwaroa.tessellation import triangulate
from pwaroa.uncertainty import Dataset, DataPoint, bounds_many
from test_tessellation import delaunay_violations

PENDULUM_SEEDS = (0, 1, 2, 3, 4)
VDP_SEEDS = (0, 1, 2, 3, 4)


def report(k, ok, detail):
    record_criterion(k, ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_bound_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for name in ("pendulum", "vdp-inverted"):
        ex = builtin_example(name)
        lo, hi = np.array(ex.domain.lower), np.array(ex.domain.upper)
        X = rng.uniform(lo, hi, size=(50, 2))
        d = Dataset([DataPoint(tuple(x), tuple(f)) for x, f in zip(X, ex.oracle(X))], ex.domain, ex.bound)
        Q = rng.uniform(lo, hi, size=(1000, 2))
        flo, fhi = bounds_many(Q, d)
        f = ex.oracle(Q)
        worst = max(worst, float(np.max(flo - f)), float(np.max(f - fhi)))
        checked += f.size
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    report(1, ok, f"{checked} components inside bounds, worst excess {worst:.2e}, {elapsed:.2f} s")


def test_criterion_2_vertex_maximum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = -np.inf
    for k in range(500):
        n = 1 + k % 3
        a = rng.normal(size=n)
        lo = rng.uniform(-2, 1, size=n)
        box = Hyperbox(lo, lo + rng.uniform(0, 2, size=n))
        vmax = max(float(a @ np.array(v)) for v in hyperbox_vertices(box))
        Z = rng.uniform(box.lower, box.upper, size=(10_000, n))
        worst = max(worst, float((Z @ a).max()) - vmax)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    report(2, ok, f"500 pairs, max sample excess over vertex max {worst:.2e}, {elapsed:.2f} s")


def test_criterion_3_lp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    mismatches, worst, verdicts = [], 0.0, {}
    max_vars = max_rows = 0
    for k in range(200):
        c, G, h, E, d = random_lp(rng)
        max_vars, max_rows = max(max_vars, len(c)), max(max_rows, len(h))
        want, obj = brute_solve(c, G, h, E, d)
        s = solve(LinearProgram(c, G, h, E if len(d) else None, d))
        verdicts[want] = verdicts.get(want, 0) + 1
        if s.status != want:
            mismatches.append((k, want, s.status))
        elif want == OPTIMAL:
            err = abs(s.objective_value - obj)
            worst = max(worst, err)
            if err > 1e-7:
                mismatches.append((k, obj, s.objective_value))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 30.0
    report(
        3,
        ok,
        f"200 LPs {verdicts}, up to {max_vars} vars and {max_rows} rows, "
        f"max objective error {worst:.2e}, {len(mismatches)} mismatches, {elapsed:.2f} s",
    )


def test_criterion_4_delaunay():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    box = Hyperbox((-1, -1), (1, 1))
    corners = [(x, y) for x in (-1, 1) for y in (-1, 1)]
    violations, worst_cov = 0, 0.0
    for k in range(20):
        n = int(rng.integers(1, 197))
        P = np.vstack([corners, rng.uniform(-1, 1, size=(n, 2))])
        t = triangulate(P, box)
        violations += delaunay_violations(t, 1e-9)
        worst_cov = max(worst_cov, abs(t.cell_areas().sum() - box.volume()) / box.volume())
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and worst_cov <= 1e-6 and elapsed < 10.0
    report(4, ok, f"20 sets, {violations} circumcircle violations, coverage error {worst_cov:.2e}, {elapsed:.2f} s")


def strictly_contains_target(roa, V, A):
    """A lies in the interior of the region: its maximum is below alpha and
    a slightly enlarged copy of its boundary is still covered."""
    if not max_over_box(V, A) < roa.alpha:
        return False
    eps = 1e-3
    lo, hi = np.array(A.lower) - eps, np.array(A.upper) + eps
    s = np.linspace(0, 1, 50)
    ring = np.vstack(
        [
            np.column_stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, lo[1])]),
            np.column_stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, hi[1])]),
            np.column_stack([np.full_like(s, lo[0]), lo[1] + s * (hi[1] - lo[1])]),
            np.column_stack([np.full_like(s, hi[0]), lo[1] + s * (hi[1] - lo[1])]),
        ]
    )
    return all(any(contains(p, x, 1e-12) for p in roa.region) for x in ring)


def region_vertices(roa, t):
    inside = []
    for u, x in enumerate(t.vertices):
        if any(contains(p, x, 1e-9) for p in roa.region):
            inside.append(u)
    return inside


def run_cli(tmp_path, name, seed, tag):
    cfg = tmp_path / f"{name}-{seed}.ini"
    cfg.write_text(config_text(name, seed))
    out = tmp_path / f"{tag}-{name}-{seed}"
    t0 = time.perf_counter()
    code = main(["certify", str(cfg), "-o", str(out)])
    return code, out, time.perf_counter() - t0


def test_criterion_5_pendulum_end_to_end(tmp_path):
    lines, ok = [], True
    for seed in PENDULUM_SEEDS:
        t0 = time.perf_counter()
        r = certify_builtin("pendulum", seed)
        elapsed = time.perf_counter() - t0
        code, out, _ = run_cli(tmp_path, "pendulum", seed, "c5")
        problems = []
        if r.terminated != CERTIFIED:
            problems.append(r.terminated)
        if code != 0:
            problems.append(f"exit {code}")
        if len(r.history) > 10:
            problems.append(f"{len(r.history)} iterations")
        if len(r.dataset) > 1500:
            problems.append(f"N_d = {len(r.dataset)}")
        if elapsed >= 600:
            problems.append(f"{elapsed:.0f} s")
        if r.roa is not None:
            V, t, A = r.lyapunov, r.lyapunov.tess, r.config.A
            if not strictly_contains_target(r.roa, V, A):
                problems.append("region does not strictly contain A")
            bad = [u for u in region_vertices(r.roa, t) if not in_open_box(t.vertices[u], A)[0] and not V.s[u] < 0]
            if bad:
                problems.append(f"{len(bad)} region vertices with s_u >= 0")
        ok &= not problems
        lines.append(
            f"seed {seed}: {r.terminated} in {len(r.history)} it, N_d={len(r.dataset)}, "
            f"alpha={r.roa.alpha if r.roa else float('nan'):.6g}, {elapsed:.1f} s"
            + (f" [{'; '.join(problems)}]" if problems else "")
        )
    report(5, ok, " | ".join(lines))


def test_criterion_6_pendulum_validation():
    lines, ok = [], True
    ex = builtin_example("pendulum")
    for seed in PENDULUM_SEEDS:
        r = certify_builtin("pendulum", seed)
        if r.roa is None:
            ok = False
            lines.append(f"seed {seed}: no region")
            continue
        t0 = time.perf_counter()
        v = validate_roa(ex.oracle, r, samples=100, dt=1e-3, horizon=20.0, seed=seed, rel_tol=1e-3)
        elapsed = time.perf_counter() - t0
        good = v.samples == 100 and v.passed >= 0.99 and elapsed < 60
        ok &= good
        lines.append(
            f"seed {seed}: {v.passed:.2f} pass (in X {v.stayed_in_X:.2f}, reach A {v.reached_A:.2f}, "
            f"monotone {v.monotone:.2f}), {elapsed:.1f} s"
        )
    report(6, ok, " | ".join(lines))


def test_criterion_7_van_der_pol_end_to_end(tmp_path):
    lines, ok = [], True
    for seed in VDP_SEEDS:
        t0 = time.perf_counter()
        try:
            r = certify_builtin("vdp-inverted", seed)
        except UndeclaredEquilibrium as exc:
            code, _, _ = run_cli(tmp_path, "vdp-inverted", seed, "c7")
            ok = False
            lines.append(f"seed {seed}: aborted ({exc}); exit {code}")
            continue
        elapsed = time.perf_counter() - t0
        code, _, _ = run_cli(tmp_path, "vdp-inverted", seed, "c7")
        good = r.terminated == CERTIFIED and code == 0 and len(r.history) <= 10 and elapsed < 900
        if r.roa is not None:
            good &= strictly_contains_target(r.roa, r.lyapunov, r.config.A) and r.nonneg_inside_roa == 0
        ok &= good
        lines.append(
            f"seed {seed}: {r.terminated}, exit {code}, non-negative slacks outside/inside region "
            f"{r.nonneg_outside_roa}/{r.nonneg_inside_roa}, {elapsed:.1f} s"
        )
    report(7, ok, " | ".join(lines))


def test_criterion_8_continuity_and_positivity():
    lines, ok = [], True
    rng = np.random.default_rng(8)
    results = [(f"pendulum/{s}", certify_builtin("pendulum", s)) for s in PENDULUM_SEEDS]
    for name, r in results:
        if r.terminated != CERTIFIED:
            continue
        V = r.lyapunov
        t = V.tess
        shared = [(e, c) for e, c in t.edges().items() if len(c) == 2]
        pick = rng.integers(0, len(shared), size=1000)
        gap = 0.0
        for k in pick:
            (u, v), (j0, j1) = shared[k]
            x = t.vertices[u] + rng.random() * (t.vertices[v] - t.vertices[u])
            gap = max(gap, abs(float(V.a[j0] @ x + V.b[j0] - V.a[j1] @ x - V.b[j1])))
        vmin = V.min_vertex_value()
        good = gap <= 1e-8 and vmin >= -1e-9
        ok &= good
        lines.append(f"{name}: edge gap {gap:.1e}, min vertex V {vmin:.1e}")
    ok &= bool(lines)
    report(8, ok, " | ".join(lines) or "no certified results")


def test_criterion_9_determinism(tmp_path):
    seed = PENDULUM_SEEDS[0]
    code_a, out_a, _ = run_cli(tmp_path, "pendulum", seed, "c9a")
    code_b, out_b, _ = run_cli(tmp_path, "pendulum", seed, "c9b")
    a = (out_a / "report.json").read_bytes()
    b = (out_b / "report.json").read_bytes()
    lib = build_report(certify_builtin("pendulum", seed), "pendulum").to_json().encode()
    same_svg = all((out_a / n).read_bytes() == (out_b / n).read_bytes() for n in ("tessellation.svg", "lyapunov.svg"))
    ok = code_a == code_b == 0 and a == b == lib
    report(
        9,
        ok,
        f"seed {seed}: two CLI runs and the library run give {'identical' if a == b == lib else 'different'} "
        f"report.json ({len(a)} bytes); figures {'identical' if same_svg else 'different'}",
    )
