"""Figures for experiment reports (matplotlib, file output only)."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .. import decomposition as dec  # noqa: E402
from ..geometry import BallComplement, Disk, HalfPlane, nearest_boundary  # noqa: E402
from .report import ExperimentReport  # noqa: E402

SVG_META = {"Date": None}
PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    meta = SVG_META if path.suffix == ".svg" else PNG_META
    fig.savefig(path, metadata=meta, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _draw_boundary(ax, dom, lo, hi) -> None:
    t = np.linspace(0, 2 * math.pi, 721)
    if isinstance(dom, (Disk, BallComplement)):
        c = np.asarray(dom.center, float)
        ax.plot(c[0] + dom.radius * np.cos(t), c[1] + dom.radius * np.sin(t), "k-", lw=1.2,
                label="domain boundary")
    elif isinstance(dom, HalfPlane):
        n = dom.normal
        d = np.array([-n[1], n[0]])
        p0 = -dom.offset * n
        s = np.linspace(-1e3, 1e3, 3)
        pts = p0 + s[:, None] * d
        ax.plot(pts[:, 0], pts[:, 1], "k-", lw=1.2, label="domain boundary")


def gallery_svg(probe: dec.ConvexBodyProbe, index: int, path, title: str = "") -> Path:
    """P(y) with a boundary-touching circle at one of its points, the band
    arcs of that circle and the supporting line there."""
    pts = probe.points
    x = pts[index]
    dom = probe.domain
    c = nearest_boundary(dom, x)
    fig, ax = plt.subplots(figsize=(6, 6))
    lo = np.minimum(pts.min(axis=0), x - c.delta) - 0.2
    hi = np.maximum(pts.max(axis=0), x + c.delta) + 0.2
    _draw_boundary(ax, dom, lo, hi)
    segs = probe.segments
    for s in segs:
        ax.plot(s[:, 0], s[:, 1], color="tab:blue", lw=1.5)
    ax.plot([], [], color="tab:blue", lw=1.5, label="P(y)")
    cmap = plt.get_cmap("viridis")
    for j in range(0, 7):
        sec = dec.angular_sector(dom, x, j)
        for a, b in sec.intervals:
            t = np.linspace(a, b, 100)
            ax.plot(x[0] + c.delta * np.cos(t), x[1] + c.delta * np.sin(t), color=cmap(j / 7),
                    lw=2.5, label=f"band j={j}" if a == sec.intervals[0][0] else None)
    tangent = pts[index + 1] - pts[index - 1]
    tangent = tangent / np.linalg.norm(tangent)
    L = 0.6 * float(np.max(hi - lo))
    ax.plot([x[0] - L * tangent[0], x[0] + L * tangent[0]],
            [x[1] - L * tangent[1], x[1] + L * tangent[1]], "r--", lw=1, label="supporting line")
    ax.plot(*probe.y, "r*", ms=10, label="y")
    ax.plot(*x, "ko", ms=4)
    ax.plot(*c.b, "ks", ms=4, label="nearest boundary point")
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.legend(fontsize=7, loc="upper right")
    ax.set_title(title)
    return _save(fig, path)


def _rows(report: ExperimentReport, **match) -> List[dict]:
    return [r for r in report.rows if all(r.get(k) == v for k, v in match.items())]


def plot_operator_sweep(report: ExperimentReport, out: Path) -> List[Path]:
    files = []
    rows = [r for r in report.rows if r.get("estimate_kind") and isinstance(r.get("scale"), float)]
    if rows:
        fig, ax = plt.subplots(figsize=(5, 4))
        keys = sorted({(r["domain"], r["alpha"], r["p"]) for r in rows})
        for key in keys:
            sel = [r for r in rows if (r["domain"], r["alpha"], r["p"]) == key]
            ax.loglog([r["scale"] for r in sel], [r["estimate"] for r in sel], "o-",
                      label=f"{key[0]} alpha={key[1]:g} p={key[2]:g}")
        ax.set_xlabel("dilation factor")
        ax.set_ylabel("norm ratio (lower bound)")
        ax.legend(fontsize=7)
        files.append(_save(fig, out / "scaling.png"))
    ann = [r for r in report.rows if r.get("anchor") == "curvature-log-law"]
    if ann:
        fig, ax = plt.subplots(figsize=(5, 4))
        keys = sorted({(r["alpha"], r["p"]) for r in ann})
        for key in keys:
            sel = [r for r in ann if (r["alpha"], r["p"]) == key]
            ax.plot([r["log_law"] for r in sel], [r["estimate"] for r in sel], "o-",
                    label=f"alpha={key[0]:g} p={key[1]:g}")
        ax.set_xlabel("log(diam / R + 1)")
        ax.set_ylabel("norm ratio (lower bound)")
        ax.legend(fontsize=7)
        files.append(_save(fig, out / "curvature_law.png"))
    return files


def plot_blowup(report: ExperimentReport, out: Path) -> List[Path]:
    rows = [r for r in report.rows if isinstance(r.get("delta"), float) and "operator" in r]
    if not rows:
        return []
    ps = sorted({r["p"] for r in rows})
    fig, axes = plt.subplots(1, len(ps), figsize=(4 * len(ps), 3.6), squeeze=False)
    for ax, p in zip(axes[0], ps):
        for kind, style in (("cube", "-"), ("ball", "--")):
            for s in sorted({r["s"] for r in rows}):
                sel = [r for r in rows if r["p"] == p and r["s"] == s and r["operator"] == kind]
                ax.loglog([r["delta"] for r in sel], [r["ratio"] for r in sel], "o" + style,
                          label=f"{kind} s={s:g}")
        ax.invert_xaxis()
        ax.set_xlabel("box width")
        ax.set_title(f"p = {p:g}")
    axes[0][0].set_ylabel("||B f||_p / ||f||_p")
    axes[0][0].legend(fontsize=7)
    return [_save(fig, out / "blowup.png")]


def plot_constants(report: ExperimentReport, out: Path) -> List[Path]:
    rows = [r for r in report.rows if "constant" in r and r.get("domain") != "all"
            and isinstance(r.get("cells"), int) and r["constant"].startswith("C_")
            and "off_center" not in r["constant"]]
    if not rows:
        return []
    names = sorted({r["constant"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    doms = sorted({r["domain"] for r in rows})
    width = 0.8 / max(1, 2 * len(doms))
    for di, d in enumerate(doms):
        for ci, n in enumerate(sorted({r["cells"] for r in rows if r["domain"] == d})):
            vals = []
            for name in names:
                sel = [r["value"] for r in rows if r["domain"] == d and r["constant"] == name
                       and r["cells"] == n]
                vals.append(sel[0] if sel else np.nan)
            pos = np.arange(len(names)) + (2 * di + ci) * width
            ax.bar(pos, vals, width, label=f"{d} n={n}")
    ax.set_xticks(np.arange(len(names)) + 0.4)
    ax.set_xticklabels(names)
    ax.set_yscale("log")
    ax.set_ylabel("realized constant")
    ax.legend(fontsize=6, ncol=2)
    return [_save(fig, out / "constants.png")]


def plot_ratios(report: ExperimentReport, out: Path) -> List[Path]:
    rows = [r for r in report.rows if isinstance(r.get("case"), int) and "ratio" in r]
    if not rows:
        return []
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["domain"], r["case"]) for r in rows}, key=str)
    for key in keys:
        sel = [r for r in rows if (r["domain"], r["case"]) == key]
        ax.plot([r["cells"] for r in sel], [r["ratio"] for r in sel], "o-",
                label=f"{key[0]} #{key[1]}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("cells per side")
    ax.set_ylabel("norm ratio")
    ax.legend(fontsize=6, ncol=2)
    return [_save(fig, out / "ratios.png")]


def render_report(report: ExperimentReport, out_dir) -> List[Path]:
    """Figures for a finished report, written next to its CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = report.name
    if name == "operator-norm-sweep":
        files = plot_operator_sweep(report, out)
    elif name == "cube-blowup":
        files = plot_blowup(report, out)
    elif name == "invariant-suite":
        files = plot_constants(report, out)
    elif name in ("main-theorem", "endpoint"):
        files = plot_ratios(report, out)
    else:
        files = []
    return files


def plot_csv(path, out=None) -> Path:
    """Generic figure for a CSV file: segments for polyline files, otherwise
    every numeric column against the first numeric column."""
    path = Path(path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    out = Path(out) if out is not None else path.with_suffix(".png")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if rows and {"x0", "y0", "x1", "y1"} <= set(rows[0]):
        for r in rows:
            ax.plot([float(r["x0"]), float(r["x1"])], [float(r["y0"]), float(r["y1"])], "b-",
                    lw=1)
        ax.set_aspect("equal")
    else:
        numeric = []
        for c in (rows[0].keys() if rows else []):
            try:
                [float(r[c]) for r in rows]
                numeric.append(c)
            except (TypeError, ValueError):
                continue
        if len(numeric) >= 2:
            xs = [float(r[numeric[0]]) for r in rows]
            for c in numeric[1:]:
                ax.plot(xs, [float(r[c]) for r in rows], "o", ms=3, label=c)
            ax.set_xlabel(numeric[0])
            ax.legend(fontsize=7)
        elif numeric:
            ax.plot([float(r[numeric[0]]) for r in rows], "o", ms=3, label=numeric[0])
            ax.legend(fontsize=7)
    ax.set_title(path.name)
    return _save(fig, out)
