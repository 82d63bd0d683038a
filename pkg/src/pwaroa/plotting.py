"""SVG figures of a run: the tessellation with the certified region, and
filled level bands of the Lyapunov function."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection, PolyCollection  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

from .report import RunReport, build_report  # noqa: E402

STYLE = {
    "svg.hashsalt": "pwaroa",
    "svg.fonttype": "path",
    "font.size": 9,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _frame(ax, X):
    (x0, y0), (x1, y1) = X.lower, X.upper
    pad = 0.03 * max(x1 - x0, y1 - y0)
    ax.set_xlim(x0 - pad, x1 + pad)
    ax.set_ylim(y0 - pad, y1 + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, ls="--", lw=0.8, ec="black", gid="domain"))


def _level_segments(tri_xy, cells, vals, alpha):
    """Pieces of the curve ``V = alpha`` inside the given cells.

    Vertices at exactly ``alpha`` count as inside, so each edge is cut at
    most once and neighbouring cells agree on the cut point.
    """
    segs = []
    for j in cells:
        p = tri_xy[j]
        v = vals[j]
        pts = []
        for k in range(3):
            a, b = k, (k + 1) % 3
            if (v[a] > alpha) != (v[b] > alpha):
                t = (alpha - v[a]) / (v[b] - v[a])
                pts.append(p[a] + t * (p[b] - p[a]))
        if len(pts) == 2 and np.any(pts[0] != pts[1]):
            segs.append(pts)
    return segs


@matplotlib.rc_context(STYLE)
def plot_tessellation(rep: RunReport, path) -> Path:
    X, A = rep.domain(), rep.target()
    fig, ax = plt.subplots(figsize=(5.0, 5.0), layout="constrained")
    _frame(ax, X)
    t = rep.tess()
    if t is not None:
        edges = [t.vertices[[u, v]] for (u, v) in sorted(t.edges())]
        ax.add_collection(LineCollection(edges, colors="0.6", linewidths=0.4, gid="tessellation"))
    if rep.roa:
        ax.add_collection(
            PolyCollection([np.array(p) for p in rep.roa], facecolors="#f4a6a6", edgecolors="none", alpha=0.6, gid="roa-fill")
        )
        V = rep.lyapunov_function()
        segs = _level_segments(t.vertices[t.cells], rep.roa_cells, V.vertex_values()[t.cells], rep.alpha)
        ax.add_collection(LineCollection(segs, colors="#c00000", linewidths=1.6, gid="roa-boundary"))
    (a0, b0), (a1, b1) = A.lower, A.upper
    ax.add_patch(Rectangle((a0, b0), a1 - a0, b1 - b0, fill=False, lw=1.2, ec="#1f4fbf", gid="target"))
    data = np.array(rep.dataset["x"]).reshape(-1, 2)
    ax.plot(data[:, 0], data[:, 1], "k.", ms=3, gid="data")
    title = f"{rep.terminated}"
    if rep.alpha is not None:
        title += f", level {rep.alpha:.6g}"
    ax.set_title(title)
    path = Path(path)
    _save(fig, path)
    return path


@matplotlib.rc_context(STYLE)
def plot_lyapunov(rep: RunReport, path, bands: int = 10) -> Path:
    X = rep.domain()
    fig, ax = plt.subplots(figsize=(5.8, 5.0), layout="constrained")
    _frame(ax, X)
    t = rep.tess()
    if t is not None:
        vals = np.array(rep.lyapunov["vertex_values"], dtype=float)
        tri = Triangulation(t.vertices[:, 0], t.vertices[:, 1], t.cells)
        lo, hi = float(vals.min()), float(vals.max())
        if hi > lo:
            levels = np.linspace(lo, hi, bands + 1)
            cs = ax.tricontourf(tri, vals, levels=levels, cmap="viridis")
            fig.colorbar(cs, ax=ax, label="V")
        if rep.roa:
            segs = _level_segments(t.vertices[t.cells], rep.roa_cells, vals[t.cells], rep.alpha)
            ax.add_collection(LineCollection(segs, colors="#c00000", linewidths=1.6, gid="roa-boundary"))
    ax.set_title("Lyapunov candidate")
    path = Path(path)
    _save(fig, path)
    return path


def plot_figures(rep, output_dir) -> list[Path]:
    """Write both figures; ``rep`` is a RunReport or a CertificationResult."""
    if not isinstance(rep, RunReport):
        rep = build_report(rep, None)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [plot_tessellation(rep, out / "tessellation.svg"), plot_lyapunov(rep, out / "lyapunov.svg")]
