"""Run reports: deterministic JSON plus a CSV of per-iteration metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .certifier import CertificationResult, CertifierConfig
from .lyapunov import CertifiedRoA, PWALyapunov
from .polytope import Hyperbox, Polygon
from .tessellation import Tessellation, from_cells

METRIC_COLUMNS = ["iteration", "N_d", "N_c", "N_v", "T_data", "T_con", "T_opt"]
SIG_DIGITS = 9


def num(x):
    """Round to 9 significant digits; non-finite values become ``None``."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _nums(arr):
    a = np.asarray(arr, dtype=float)
    if a.ndim == 0:
        return num(a)
    return [_nums(v) for v in a]


@dataclass
class RunReport:
    config: dict
    terminated: str
    message: str
    alpha: float | None
    max_V_on_target: float | None
    metrics: dict
    iterations: list
    roa: list
    roa_cells: list
    nonneg_slacks: dict
    tessellation: dict
    lyapunov: dict
    dataset: dict
    validation: dict | None = None
    totals: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text())

    # reconstruction for plotting and validation

    def domain(self) -> Hyperbox:
        return Hyperbox(self.config["domain"]["lo"], self.config["domain"]["hi"])

    def target(self) -> Hyperbox:
        return Hyperbox(self.config["target"]["lo"], self.config["target"]["hi"])

    def tess(self) -> Tessellation | None:
        if not self.tessellation["cells"]:
            return None
        P = np.array(self.tessellation["vertices"], dtype=float)
        C = np.array(self.tessellation["cells"], dtype=np.int64)
        return from_cells(P, C, self.domain())

    def lyapunov_function(self) -> PWALyapunov | None:
        """PWA function interpolating the stored vertex values."""
        t = self.tess()
        if t is None or not self.lyapunov["vertex_values"]:
            return None
        vals = np.array(self.lyapunov["vertex_values"], dtype=float)
        P = t.vertices[t.cells]
        Mx = np.concatenate([P, np.ones((len(P), 3, 1))], axis=2)
        coef = np.linalg.solve(Mx, vals[t.cells][..., None])[..., 0]
        s = np.array(self.lyapunov["slacks"], dtype=float)
        return PWALyapunov(t, coef[:, :2], coef[:, 2], s)

    def certified_roa(self) -> CertifiedRoA | None:
        if self.alpha is None or not self.roa:
            return None
        region = [Polygon(tuple(map(tuple, poly))) for poly in self.roa]
        return CertifiedRoA(self.alpha, region, True, list(self.roa_cells), [], self.max_V_on_target)


def config_echo(cfg: CertifierConfig, system: str | None, dataset_path: str | None = None) -> dict:
    return {
        "system": {"name": system, "dataset_path": dataset_path},
        "domain": {"lo": _nums(cfg.X.lower), "hi": _nums(cfg.X.upper)},
        "target": {"lo": _nums(cfg.A.lower), "hi": _nums(cfg.A.upper)},
        "lipschitz": {"M": _nums(cfg.M.M)},
        "lp": {"mu": num(cfg.mu), "backend": cfg.lp_backend},
        "loop": {
            "limit": cfg.iteration_limit,
            "seed": cfg.seed,
            "initial_points": cfg.initial_random_points,
            "max_data": cfg.max_data,
            "enrich_cap": cfg.enrich_cap,
        },
    }


def build_report(
    result: CertificationResult,
    system: str | None,
    dataset_path: str | None = None,
    timings: bool = False,
    total_seconds: float | None = None,
) -> RunReport:
    """Collect a result into a report.

    Timings differ between runs, so they are recorded only when
    ``timings`` is set; otherwise the time columns hold ``null`` and the
    report is byte-identical across repeated runs.
    """
    rows = []
    for h in result.history:
        t = [num(h.T_data), num(h.T_con), num(h.T_opt)] if timings else [None, None, None]
        rows.append([h.iteration, h.N_d, h.N_c, h.N_v, *t])
    iterations = [
        {"iteration": h.iteration, "action": h.action, "added": h.added, "nonneg_slacks": h.nonneg_slacks}
        for h in result.history
    ]
    V = result.lyapunov
    if V is not None:
        tess = {"vertices": _nums(V.tess.vertices), "cells": V.tess.cells.tolist()}
        lyap = {"vertex_values": _nums(V.vertex_values()), "slacks": _nums(V.s)}
    else:
        tess = {"vertices": [], "cells": []}
        lyap = {"vertex_values": [], "slacks": []}
    roa = result.roa
    return RunReport(
        config=config_echo(result.config, system, dataset_path),
        terminated=result.terminated,
        message=result.message,
        alpha=num(roa.alpha) if roa else None,
        max_V_on_target=num(roa.max_on_target) if roa else None,
        metrics={"columns": list(METRIC_COLUMNS), "rows": rows},
        iterations=iterations,
        roa=[_nums(p.as_array()) for p in roa.region] if roa else [],
        roa_cells=list(map(int, roa.cells)) if roa else [],
        nonneg_slacks={"outside_roa": result.nonneg_outside_roa, "inside_roa": result.nonneg_inside_roa},
        tessellation=tess,
        lyapunov=lyap,
        dataset={"x": _nums(result.dataset.X), "f": _nums(result.dataset.F)},
        totals={"wall_clock_s": num(total_seconds)} if timings else {},
    )


def write_metrics_csv(result: CertificationResult, path) -> None:
    """Per-iteration metrics with measured timings (seconds)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for h in result.history:
            w.writerow(
                [h.iteration, h.N_d, h.N_c, h.N_v]
                + ["" if v is None else f"{v:.6f}" for v in (h.T_data, h.T_con, h.T_opt)]
            )
