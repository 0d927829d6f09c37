"""Static SVG figures rendered with matplotlib.

Covers the two documentation surfaces: geometric drawings (cubes, selection
balls, n <= 2) and per-check curves from the verification suite.  Figures are
written next to the delimited output files; nothing here is interactive.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle, Rectangle

from .covering import CoveringResult, WhitneyCube
from .operators import GridField


def save_covering_figure(result: CoveringResult, cubes: list[WhitneyCube], path: str | Path) -> Path:
    """Whitney cubes plus the selection balls B(x_k, b d_k); n = 1 draws the
    construction on a line, n = 2 in the plane."""
    path = Path(path).with_suffix(".svg")
    centers = np.asarray(result.centers, dtype=float)
    n = centers.shape[1] if centers.size else (cubes[0].n if cubes else 1)
    b = result.params[1]
    radii = b * np.asarray(result.distances, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 2.2 if n == 1 else 7))
    if n == 1:
        for q in cubes:
            ax.add_patch(Rectangle((q.lo[0], -0.12), q.side, 0.24, fill=False, lw=0.6, ec="tab:blue"))
        for c, r in zip(centers[:, 0], radii):
            ax.add_patch(Rectangle((c - r, -0.04), 2 * r, 0.08, alpha=0.12, fc="tab:orange", ec="none"))
        ax.plot(centers[:, 0], np.zeros(len(centers)), ".", ms=3, color="tab:red")
        ax.set_ylim(-0.5, 0.5)
        ax.set_yticks([])
    else:
        for q in cubes:
            ax.add_patch(Rectangle(tuple(q.lo), q.side, q.side, fill=False, lw=0.4, ec="tab:blue"))
        for c, r in zip(centers, radii):
            ax.add_patch(Circle(tuple(c), r, alpha=0.08, fc="tab:orange", ec="none"))
        ax.plot(centers[:, 0], centers[:, 1], ".", ms=2, color="tab:red")
        ax.set_aspect("equal")
    if centers.size:
        lo = centers.min(axis=0) - (radii.max() if radii.size else 1.0)
        hi = centers.max(axis=0) + (radii.max() if radii.size else 1.0)
        ax.set_xlim(lo[0], hi[0])
        if n == 2:
            ax.set_ylim(lo[1], hi[1])
    ax.set_title(f"covering: {len(centers)} balls, sum/target = {result.measure_ratio:.2f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_field_figure(fld: GridField, path: str | Path, label: str = "") -> Path:
    """Line plot (n = 1) or heat map (n = 2) of a spatial field."""
    path = Path(path).with_suffix(".svg")
    grid = fld.grid
    fig, ax = plt.subplots(figsize=(7, 3.2 if grid.n == 1 else 6))
    if grid.n == 1:
        ax.plot(grid.axes[0], fld.values, lw=0.9)
        ax.set_xlabel("x")
    elif grid.n == 2:
        pc = ax.pcolormesh(grid.axes[0], grid.axes[1], fld.values.T, shading="nearest")
        fig.colorbar(pc, ax=ax)
        ax.set_aspect("equal")
    else:
        mid = fld.values[:, :, fld.values.shape[2] // 2]
        pc = ax.pcolormesh(grid.axes[0], grid.axes[1], mid.T, shading="nearest")
        fig.colorbar(pc, ax=ax)
    ax.set_title(label or fld.meta.get("operator", "field"))
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_suite_figures(out_dir: str | Path, cfg: dict, reports) -> list[Path]:
    """One figure per check that carries curve data."""
    out = Path(out_dir)
    made: list[Path] = []
    for rep in reports:
        if rep.check_id == "weak11" and rep.metadata.get("curves"):
            fig, ax = plt.subplots(figsize=(6, 4))
            for uid, (taus, vals) in rep.metadata["curves"].items():
                ax.loglog(taus, np.maximum(vals, 1e-18), lw=0.9, label=uid)
            ax.set_xlabel("tau")
            ax.set_ylabel("tau * gamma(M* f > tau) / ||f||_1")
            ax.legend(fontsize=7)
            ax.set_title("weak (1,1) curves")
            p = out / "weak11.svg"
            fig.tight_layout()
            fig.savefig(p)
            plt.close(fig)
            made.append(p)
        elif rep.check_id == "main" and rep.metadata.get("rows"):
            fig, ax = plt.subplots(figsize=(6, 4))
            by_u: dict[str, list] = {}
            for row in rep.metadata["rows"]:
                by_u.setdefault(row["u"], []).append((row["level"], row["ratio"]))
            for uid, pts in by_u.items():
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, lw=0.9, label=uid)
            ax.set_xlabel("resolution level")
            ax.set_ylabel("||S u||_1 / ||T* u||_1")
            ax.legend(fontsize=7)
            ax.set_title("main inequality ratio vs resolution")
            p = out / "main.svg"
            fig.tight_layout()
            fig.savefig(p)
            plt.close(fig)
            made.append(p)
        elif rep.check_id == "caccioppoli" and rep.metadata.get("rows"):
            fig, ax = plt.subplots(figsize=(6, 4))
            rows = rep.metadata["rows"]
            xs = [r_["r"] * abs(np.linalg.norm(r_["x0"])) for r_ in rows]
            ys = [r_["ratio"] for r_ in rows]
            ax.semilogy(xs, np.maximum(ys, 1e-18), ".", ms=4)
            ax.set_xlabel("r |x0|")
            ax.set_ylabel("normalized energy ratio")
            ax.set_title("Caccioppoli cylinders")
            p = out / "caccioppoli.svg"
            fig.tight_layout()
            fig.savefig(p)
            plt.close(fig)
            made.append(p)
    return made
