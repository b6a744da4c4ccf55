"""Matplotlib figures for networks, flows and the blowup picture.

Every figure is written as SVG with a fixed hash salt and no date stamp, so
repeated runs give byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .flow import BlowupLift, FlowCheckReport, FlowFrame  # noqa: E402
from .geometry import stereographic  # noqa: E402
from .steiner.network import Network  # noqa: E402

CHARTS = ("plane", "ball", "blowup")

STYLE = {
    "svg.hashsalt": "soliton-networks",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
}

EDGE_COLOR = "#1f4e79"
RAY_COLOR = "#b0b0b0"
VERTEX_COLOR = "#c0392b"


def save_svg(fig, path) -> Path:
    path = Path(path)
    # the hash salt is read when saving, not when drawing
    with plt.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _unit_circle(ax, **kw):
    t = np.linspace(0.0, 2.0 * math.pi, 361)
    ax.plot(np.cos(t), np.sin(t), color=kw.pop("color", "k"), lw=kw.pop("lw", 0.6), **kw)


def _ideal_ends(net: Network) -> list[list[np.ndarray]]:
    """Boundary-circle points to append at the ideal ends of each edge."""
    out = []
    for e in net.edges:
        extra = []
        for node in (e.u, e.v):
            if node < net.k:
                a = net.boundary[node].angle
                extra.append(np.array([math.cos(a), math.sin(a)]))
        out.append(extra)
    return out


def draw_plane(ax, net: Network, *, extent: float = 3.0, rays: bool = True, color: str = EDGE_COLOR,
               label: str | None = None):
    """The network in plane coordinates inside the square ``[-extent, extent]^2``."""
    if rays:
        for a in net.angles:
            ax.plot([0, 2 * extent * math.cos(a)], [0, 2 * extent * math.sin(a)], color=RAY_COLOR,
                    lw=0.6, ls="--")
    for i, P in enumerate(net.polylines(0.01, 2.0 * extent)):
        ax.plot(P[:, 0], P[:, 1], color=color, label=label if i == 0 else None)
    X = np.asarray(net.vertex_positions).reshape(-1, 2)
    if len(X):
        ax.plot(X[:, 0], X[:, 1], "o", ms=3, color=VERTEX_COLOR)
    ax.set_xlim(-extent, extent)
    ax.set_ylim(-extent, extent)
    ax.set_aspect("equal")


def draw_ball(ax, net: Network, *, r_max: float = 12.0):
    """The network in the compactified disc; ideal points sit on the unit circle."""
    _unit_circle(ax)
    for P, extra in zip(net.polylines(0.01, r_max), _ideal_ends(net)):
        Q = stereographic(P)
        if extra:
            # attach each boundary point to the nearer end of the polyline
            for b in extra:
                if np.hypot(*(Q[0] - b)) < np.hypot(*(Q[-1] - b)):
                    Q = np.vstack([b, Q])
                else:
                    Q = np.vstack([Q, b])
        ax.plot(Q[:, 0], Q[:, 1], color=EDGE_COLOR)
    X = np.asarray(net.vertex_positions).reshape(-1, 2)
    if len(X):
        S = stereographic(X)
        ax.plot(S[:, 0], S[:, 1], "o", ms=3, color=VERTEX_COLOR)
    a = net.angles
    ax.plot(np.cos(a), np.sin(a), "o", ms=4, color="k")
    ax.set_xlim(-1.08, 1.08)
    ax.set_ylim(-1.08, 1.08)
    ax.set_aspect("equal")
    ax.set_axis_off()


def draw_blowup(ax_f, ax_t, lift: BlowupLift, *, inner: float = 0.35):
    """Face F (hemisphere, shown as a disc) and face T (the t=0 plane minus a ball)."""
    _unit_circle(ax_f)
    for P in lift.f_face_disc(0):
        ax_f.plot(P[:, 0], P[:, 1], color=EDGE_COLOR)
    c = lift.corners
    ax_f.plot(np.cos(c), np.sin(c), "o", ms=4, color="k")
    ax_f.set_title("F")
    _unit_circle(ax_t)
    t = np.linspace(0.0, 2.0 * math.pi, 361)
    ax_t.fill(inner * np.cos(t), inner * np.sin(t), color="0.92", lw=0)
    ax_t.plot(inner * np.cos(t), inner * np.sin(t), color="0.4", lw=0.6, ls=":")
    for a in c:
        ax_t.plot([inner * math.cos(a), math.cos(a)], [inner * math.sin(a), math.sin(a)], color=EDGE_COLOR)
    ax_t.plot(np.cos(c), np.sin(c), "o", ms=4, color="k")
    ax_t.set_title("T")
    for ax in (ax_f, ax_t):
        ax.set_xlim(-1.08, 1.08)
        ax.set_ylim(-1.08, 1.08)
        ax.set_aspect("equal")
        ax.set_axis_off()


def network_figure(net: Network, chart: str, *, lift: BlowupLift | None = None, title: str | None = None):
    if chart not in CHARTS:
        raise ValueError(f"unknown chart {chart!r}; expected one of {CHARTS}")
    with plt.rc_context(STYLE):
        if chart == "blowup":
            if lift is None:
                raise ValueError("the blowup chart needs a BlowupLift")
            fig, (ax_f, ax_t) = plt.subplots(1, 2, figsize=(7.0, 3.6))
            draw_blowup(ax_f, ax_t, lift)
        else:
            fig, ax = plt.subplots(figsize=(4.0, 4.0))
            if chart == "plane":
                draw_plane(ax, net)
            else:
                draw_ball(ax, net)
        if title:
            fig.suptitle(title)
    return fig


def solutions_figure(nets: list[Network], *, chart: str = "ball"):
    n = max(1, len(nets))
    cols = min(n, 4)
    rows = int(math.ceil(n / cols))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.6 * rows), squeeze=False)
        for ax in axes.ravel()[len(nets):]:
            ax.set_axis_off()
        for ax, net in zip(axes.ravel(), nets):
            (draw_ball if chart == "ball" else draw_plane)(ax, net)
            ax.set_title(net.topology.label(), fontsize=7)
    return fig


def frames_figure(frames: list[FlowFrame], *, extent: float = 4.0):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        cmap = plt.get_cmap("viridis")
        for i, fr in enumerate(frames):
            col = cmap(i / max(1, len(frames) - 1))
            draw_plane(ax, fr.network, extent=extent, rays=(i == 0), color=col, label=f"t = {fr.t:g}")
        ax.legend(loc="lower left", fontsize=7, frameon=False)
    return fig


def deviation_figure(report: FlowCheckReport):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        ax.plot(report.times, report.deviation, "o-", ms=3)
        ax.set_xlabel("t")
        ax.set_ylabel("Hausdorff / sqrt(2t)")
        ax.set_title(f"h = {report.h:g}")
        fig.tight_layout()
    return fig
