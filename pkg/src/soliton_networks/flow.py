"""Self-similar evolution of a verified network, its blowup picture, and a direct flow check.

An expander with cross-section ``N`` at ``t = 1/2`` is ``sqrt(2t) N`` at time
``t``. Everything but :func:`direct_flow_check` is therefore a rescaling; the
check integrates curve shortening flow on a polygonal mesh from ``t = 1/2``
without using self-similarity except to pin the far ends of unbounded edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .geodesics import ASYMPTOTE_TOL
from .geometry import TWO_PI, stereographic
from .steiner.network import EdgeArc, Network, hausdorff

FAR_RADIUS = 12.0
STATIONARY_TOL = 1e-12


class FlowError(RuntimeError):
    pass


def dilation_factor(t: float) -> float:
    if not t > 0.0:
        raise FlowError(f"time must be positive, got {t!r}")
    return math.sqrt(2.0 * t)


@dataclass
class FlowFrame:
    t: float
    lam: float
    network: Network
    base: Network

    def polylines(self, max_gap: float = 0.002, r_max: float = math.inf) -> list[np.ndarray]:
        return self.network.polylines(max_gap, r_max)


def scale_network(net: Network, lam: float) -> Network:
    edges = [EdgeArc(e.u, e.v, e.connection, e.arc.scaled(lam), e.length) for e in net.edges]
    return Network(net.topology, net.boundary, lam * net.vertex_positions, edges, net.status,
                   dict(net.diagnostics))


def evolve(base: Network, t: float) -> FlowFrame:
    """The frame at time ``t``: every coordinate of ``base`` multiplied by ``sqrt(2t)``."""
    lam = dilation_factor(t)
    if base.status != "regular":
        raise FlowError(f"base network must be regular, status is {base.status!r}")
    return FlowFrame(t, lam, scale_network(base, lam), base)


@dataclass(frozen=True)
class VertexTrajectory:
    """``t -> sqrt(2t) q``: a ray from the origin traversed as ``sqrt(t)``."""

    vertex: int
    q: np.ndarray

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise FlowError("trajectories are defined for t >= 0")
        return np.sqrt(2.0 * t)[..., None] * self.q

    @property
    def stationary(self) -> bool:
        # a vertex solved to the origin carries round-off of order 1e-17
        return bool(np.hypot(*self.q) <= STATIONARY_TOL)


def vertex_trajectories(base: Network) -> list[VertexTrajectory]:
    return [VertexTrajectory(v, base.vertex_positions[v - base.k].copy()) for v in base.topology.interior]


def edge_asymptotes(edge: EdgeArc, tol: float = ASYMPTOTE_TOL) -> list[float]:
    """Asymptotic directions of the ideal ends of one edge."""
    c = edge.connection
    out = []
    for param in (c.param1, c.param2):
        if not math.isinf(param):
            continue
        if c.kind == "origin_line":
            out.append(c.theta0 if param > 0 else c.theta0 + math.pi)
            continue
        branches = edge.arc._branches
        br = branches[1] if param > 0 else branches[0]
        if br.bound() > tol:
            raise FlowError(f"edge {edge.u}-{edge.v}: asymptote not converged (bound {br.bound():.3g})")
        out.append(c.theta0 + br.asymptote_offset)
    return out


def tangent_cone_at_infinity(network: Network, tol: float = ASYMPTOTE_TOL) -> np.ndarray:
    """Sorted asymptote angles in ``[0, 2 pi)`` of all unbounded edges."""
    angles = np.array([a % TWO_PI for e in network.edges for a in edge_asymptotes(e, tol)])
    return np.sort(angles)


# -- world sheet and blowup -------------------------------------------------------


@dataclass
class WorldSheet:
    base: Network
    times: np.ndarray

    def frames(self) -> list[FlowFrame]:
        return [evolve(self.base, float(t)) for t in self.times]


@dataclass
class BlowupLift:
    """Curve sets on the two faces of the blown-up space-time origin.

    ``f_traces[i]`` is the network at ``times[i]`` in the coordinates
    ``(x, y) / sqrt(2t)``; ``t_trace`` holds the half-lines of the initial
    cone drawn out to ``t_radius``; ``corners`` are the boundary angles where
    the two faces meet.
    """

    times: np.ndarray
    f_traces: list[list[np.ndarray]]
    f_drift: float
    t_trace: list[np.ndarray]
    corners: np.ndarray
    chart: str = "F: (x, y)/sqrt(2t), hemisphere drawn by p -> p/(1+sqrt(1+|p|^2)); T: t=0 plane"

    def f_face_disc(self, i: int = 0) -> list[np.ndarray]:
        return [stereographic(p) for p in self.f_traces[i]]

    def t_face_disc(self) -> list[np.ndarray]:
        return [stereographic(p) for p in self.t_trace]


def blowup_lift(sheet: WorldSheet, *, max_gap: float = 0.01, r_max: float = 8.0,
                t_radius: float = 8.0) -> BlowupLift:
    """Lift the world sheet to the blowup; the F-trace of a self-similar sheet is constant."""
    ref = None
    traces = []
    drift = 0.0
    for frame in sheet.frames():
        polys = [p / frame.lam for p in frame.polylines(max_gap * frame.lam, r_max * frame.lam)]
        if ref is None:
            ref = polys
        else:
            for a, b in zip(polys, ref):
                if a.shape != b.shape:
                    raise FlowError("F-trace sampling changed between frames")
                drift = max(drift, float(np.max(np.abs(a - b), initial=0.0)))
        traces.append(polys)
    corners = np.sort(sheet.base.angles % TWO_PI)
    rays = [np.outer(np.linspace(0.0, t_radius, 2), [math.cos(a), math.sin(a)]) for a in corners]
    return BlowupLift(np.asarray(sheet.times, dtype=float), traces, drift, rays, corners)


# -- direct front tracking ----------------------------------------------------------


@dataclass
class _Chain:
    nodes: list[int]
    edge: int


@dataclass
class FrontMesh:
    """Polygonal network: node coordinates plus chains of node indices, one per edge."""

    X: np.ndarray
    chains: list[list[int]]
    junctions: dict[int, list[int]]
    pinned: dict[int, tuple[int, int]]  # node -> (edge index, which end)

    def polylines(self) -> list[np.ndarray]:
        return [self.X[c] for c in self.chains]


def _far_point(edge: EdgeArc, end: int, radius: float) -> np.ndarray:
    """Point at ``radius`` on the unbounded end ``end`` (1 or 2) of an edge of the base network."""
    c = edge.connection
    param = c.param1 if end == 1 else c.param2
    if c.kind == "origin_line":
        sgn = 1.0 if param > 0 else -1.0
        return sgn * radius * np.array([math.cos(c.theta0), math.sin(c.theta0)])
    br = edge.arc._branches[1] if param > 0 else edge.arc._branches[0]
    eta, r, _ = br.state_at_radius(radius)
    th = c.theta0 + eta
    return r * np.array([math.cos(th), math.sin(th)])


def _resample(P: np.ndarray, h: float, spline: bool = True) -> np.ndarray:
    seg = np.hypot(*np.diff(P, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(2, int(round(s[-1] / h)) + 1)
    u = np.linspace(0.0, s[-1], n)
    if spline and len(P) >= 4:
        cs = CubicSpline(s, P, axis=0)
        out = cs(u)
    else:
        out = np.column_stack([np.interp(u, s, P[:, 0]), np.interp(u, s, P[:, 1])])
    out[0], out[-1] = P[0], P[-1]
    return out


def build_mesh(base: Network, h: float, far_radius: float = FAR_RADIUS, t: float = 0.5) -> FrontMesh:
    """Mesh of ``evolve(base, t)`` truncated at ``far_radius`` with spacing about ``h``."""
    lam = dilation_factor(t)
    k = base.k
    X: list[np.ndarray] = []
    vertex_node: dict[int, int] = {}
    for v in base.topology.interior:
        vertex_node[v] = len(X)
        X.append(lam * base.vertex_positions[v - k])
    chains, pinned = [], {}
    for ei, e in enumerate(base.edges):
        dense = e.arc.dense_points(min(0.002, h / 10) / lam, far_radius / lam) * lam
        ends = []
        for end, node in ((1, e.u), (2, e.v)):
            if node >= k:
                ends.append(("vertex", vertex_node[node]))
            else:
                ends.append(("far", lam * _far_point(e, end, far_radius / lam)))
        # orient the dense samples from endpoint u to endpoint v
        start = X[ends[0][1]] if ends[0][0] == "vertex" else ends[0][1]
        if np.hypot(*(dense[0] - start)) > np.hypot(*(dense[-1] - start)):
            dense = dense[::-1]
        pts = [start] + list(dense[1:-1]) + [X[ends[1][1]] if ends[1][0] == "vertex" else ends[1][1]]
        P = _resample(np.array(pts), h, spline=False)
        ids = []
        for j, p in enumerate(P):
            kind_end = ends[0] if j == 0 else ends[1] if j == len(P) - 1 else None
            if kind_end is not None and kind_end[0] == "vertex":
                ids.append(kind_end[1])
                continue
            ids.append(len(X))
            X.append(p)
            if kind_end is not None:
                pinned[ids[-1]] = (ei, 1 if j == 0 else 2)
        chains.append(ids)
    junctions = {vertex_node[v]: [] for v in base.topology.interior}
    for c in chains:
        for end, nb in ((c[0], c[1]), (c[-1], c[-2])):
            if end in junctions:
                junctions[end].append(nb)
    return FrontMesh(np.array(X, dtype=float), chains, junctions, pinned)


def _interior_index(chains: list[list[int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mid, prev, nxt = [], [], []
    for c in chains:
        mid.extend(c[1:-1])
        prev.extend(c[:-2])
        nxt.extend(c[2:])
    return np.array(mid, dtype=int), np.array(prev, dtype=int), np.array(nxt, dtype=int)


def curvature_vectors(X: np.ndarray, mid: np.ndarray, prev: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """Discrete curvature vector ``2 (tau+ - tau-) / (l- + l+)`` at the nodes ``mid``."""
    a = X[mid] - X[prev]
    b = X[nxt] - X[mid]
    la = np.hypot(a[:, 0], a[:, 1])
    lb = np.hypot(b[:, 0], b[:, 1])
    return 2.0 * (b / lb[:, None] - a / la[:, None]) / (la + lb)[:, None]


def _fermat_newton(x: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    """One Newton step towards zero sum of unit vectors from ``x`` to its neighbours."""
    d = nbrs - x
    l = np.hypot(d[:, 0], d[:, 1])
    u = d / l[:, None]
    F = u.sum(axis=0)
    J = np.zeros((2, 2))
    for ui, li in zip(u, l):
        J -= (np.eye(2) - np.outer(ui, ui)) / li
    return x - np.linalg.solve(J, F)


@dataclass
class FlowCheckReport:
    h: float
    dt: float
    times: np.ndarray
    deviation: np.ndarray
    steps: int
    vertex_paths: np.ndarray
    exact_vertex_paths: np.ndarray
    final_polylines: list[np.ndarray] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max(initial=0.0))

    def rows(self) -> list[list[float]]:
        """``t, deviation, x_1, y_1, ...`` per recorded time."""
        out = []
        for i, t in enumerate(self.times):
            out.append([float(t), float(self.deviation[i])] + self.vertex_paths[i].ravel().tolist())
        return out


def direct_flow_check(base: Network, t_end: float, *, h: float = 0.02, t_start: float = 0.5,
                      far_radius: float = FAR_RADIUS, n_records: int = 7, redistribute_every: int = 50,
                      cfl: float = 0.25) -> FlowCheckReport:
    """Front-tracking curve shortening flow from ``evolve(base, t_start)`` up to ``t_end``.

    Interior nodes move with the discrete curvature vector; after every step
    each junction takes one Newton step towards the Fermat point of its three
    neighbours (zero sum of unit tangents); the far ends of unbounded edges
    sit on the exact solution at radius ``far_radius``. Reports the
    Hausdorff distance to ``evolve(base, t)`` divided by ``sqrt(2t)``.
    """
    if not t_end > t_start:
        raise FlowError("t_end must exceed the start time")
    if base.status != "regular":
        raise FlowError("direct flow check needs a regular base network")
    mesh = build_mesh(base, h, far_radius, t_start)
    dt = cfl * h * h
    n_steps = int(math.ceil((t_end - t_start) / dt))
    dt = (t_end - t_start) / n_steps
    record_at = set(np.linspace(0, n_steps, n_records).round().astype(int).tolist())
    mid, prev, nxt = _interior_index(mesh.chains)
    junction_nodes = list(mesh.junctions)
    X = mesh.X
    times, devs, vpaths, exact = [], [], [], []
    t = t_start
    for step in range(n_steps + 1):
        if step in record_at:
            frame = evolve(base, t)
            polys = [X[c] for c in mesh.chains]
            ref = frame.polylines(min(0.002, h / 10), far_radius)
            times.append(t)
            devs.append(hausdorff(polys, ref) / frame.lam)
            vpaths.append(X[junction_nodes].copy())
            exact.append(frame.network.vertex_positions.copy())
        if step == n_steps:
            break
        seg = [np.hypot(*np.diff(X[c], axis=0).T).min() for c in mesh.chains if len(c) > 1]
        if dt > 0.5 * min(seg) ** 2:
            raise FlowError(f"time step {dt:.3g} violates the stability bound at t={t:.4f} "
                            f"(shortest segment {min(seg):.3g})")
        X[mid] = X[mid] + dt * curvature_vectors(X, mid, prev, nxt)
        t = t_start + (step + 1) * dt
        for node, nbrs in mesh.junctions.items():
            X[node] = _fermat_newton(X[node], X[nbrs])
        lam = dilation_factor(t)
        for node, (ei, end) in mesh.pinned.items():
            X[node] = lam * _far_point(base.edges[ei], end, far_radius / lam)
        if (step + 1) % redistribute_every == 0:
            X = _redistribute(mesh, X, h)
            mid, prev, nxt = _interior_index(mesh.chains)
    return FlowCheckReport(h, dt, np.array(times), np.array(devs), n_steps,
                           np.array(vpaths), np.array(exact), [X[c].copy() for c in mesh.chains])


def _redistribute(mesh: FrontMesh, X: np.ndarray, h: float) -> np.ndarray:
    """Re-space every chain uniformly in arclength (cubic spline), keeping its end nodes."""
    keep = set(mesh.junctions) | set(mesh.pinned)
    new_X = [X[i] for i in sorted(keep)]
    remap = {old: new for new, old in enumerate(sorted(keep))}
    chains = []
    pinned = {}
    for c in mesh.chains:
        P = _resample(X[c], h)
        ids = [remap[c[0]]]
        for p in P[1:-1]:
            ids.append(len(new_X))
            new_X.append(p)
        ids.append(remap[c[-1]])
        chains.append(ids)
    for node, val in mesh.pinned.items():
        pinned[remap[node]] = val
    mesh.junctions = {remap[j]: [] for j in mesh.junctions}
    for c in chains:
        for end, nb in ((c[0], c[1]), (c[-1], c[-2])):
            if end in mesh.junctions:
                mesh.junctions[end].append(nb)
    mesh.chains = chains
    mesh.pinned = pinned
    mesh.X = np.array(new_X)
    return mesh.X


def circle_flow_check(R0: float, t_end: float, h: float = 0.02, cfl: float = 0.25) -> tuple[float, float]:
    """Shrink a polygonal circle; returns ``(mean radius at t_end, exact sqrt(R0^2 - 2 t_end))``."""
    if not 2.0 * t_end < R0 * R0:
        raise FlowError("the circle vanishes before t_end")
    n = max(8, int(round(TWO_PI * R0 / h)))
    ang = TWO_PI * np.arange(n) / n
    X = R0 * np.column_stack([np.cos(ang), np.sin(ang)])
    mid = np.arange(n)
    prev = np.roll(mid, 1)
    nxt = np.roll(mid, -1)
    t = 0.0
    while t < t_end - 1e-15:
        seg = np.hypot(*(X[nxt] - X[mid]).T).min()
        dt = min(cfl * seg * seg, t_end - t)
        X = X + dt * curvature_vectors(X, mid, prev, nxt)
        t += dt
    return float(np.mean(np.hypot(X[:, 0], X[:, 1]))), math.sqrt(R0 * R0 - 2.0 * t_end)
