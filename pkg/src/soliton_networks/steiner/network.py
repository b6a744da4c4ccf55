"""Networks of geodesic arcs and the checks that certify them as regular."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..geodesics import (
    ASYMPTOTE_TOL,
    Connection,
    GeodesicArc,
    apex_offset,
    apex_radius_for_width,
    arc_from_connection,
    connection_length,
    solve_connection,
)
from ..geometry import TWO_PI, IdealPoint, PlanePoint, angle_diff, graph_tangent
from .topology import Topology

STATUSES = ("candidate", "regular", "failed")
DEFAULT_FAR_RADIUS = 12.0


@dataclass
class EdgeArc:
    """Edge ``u -> v`` of a network: the connection data and the realised arc."""

    u: int
    v: int
    connection: Connection
    arc: GeodesicArc
    length: float = math.nan


@dataclass
class Network:
    topology: Topology
    boundary: tuple[IdealPoint, ...]
    vertex_positions: np.ndarray
    edges: list[EdgeArc] = field(default_factory=list)
    status: str = "candidate"
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.topology.k

    @property
    def angles(self) -> np.ndarray:
        return np.array([b.angle for b in self.boundary])

    def endpoint(self, node: int):
        """IdealPoint for a leaf, PlanePoint for an interior vertex."""
        if node < self.k:
            return self.boundary[node]
        x, y = self.vertex_positions[node - self.k]
        return PlanePoint(float(x), float(y))

    def renormalized_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    def polylines(self, max_gap: float = 0.002, r_max: float = math.inf) -> list[np.ndarray]:
        return [e.arc.dense_points(max_gap, r_max) for e in self.edges]

    def samples(self) -> list[np.ndarray]:
        return [e.arc.points() for e in self.edges]


def build_edges(topology: Topology, boundary, positions: np.ndarray, *,
                r_max: float = DEFAULT_FAR_RADIUS) -> list[EdgeArc]:
    """Fit every edge with the exact geodesic between its endpoints."""
    net = Network(topology, tuple(boundary), np.asarray(positions, dtype=float))
    edges = []
    for u, v in topology.edges:
        c = solve_connection(net.endpoint(u), net.endpoint(v))
        arc = arc_from_connection(c, r_max=r_max)
        edges.append(EdgeArc(u, v, c, arc, connection_length(c)))
    return edges


def assemble(topology: Topology, boundary, positions, *, r_max: float = DEFAULT_FAR_RADIUS) -> Network:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    net = Network(topology, tuple(boundary), positions)
    net.edges = build_edges(topology, boundary, positions, r_max=r_max)
    return net


# -- vertex balance ------------------------------------------------------------


def _arc_end_tangent(arc: GeodesicArc, param: float, other: float, rho: float | None) -> np.ndarray:
    if arc.is_line:
        t = arc.direction
    else:
        t = graph_tangent(arc.endpoint_state(param, rho))
    return t if other > param else -t


def vertex_tangents(network: Network, vertex: int) -> list[np.ndarray]:
    """Unit tangents at ``vertex`` pointing into each incident edge, read off the arcs."""
    out = []
    for e in network.edges:
        c = e.connection
        if e.u == vertex:
            out.append(_arc_end_tangent(e.arc, c.param1, c.param2, c.rho1))
        elif e.v == vertex:
            out.append(_arc_end_tangent(e.arc, c.param2, c.param1, c.rho2))
    return out


def balance_from_tangents(tangents) -> tuple[float, bool]:
    """``(|sum of tangents|, trivalent)``; a vertex is trivalent only with three tangents."""
    T = np.asarray(tangents, dtype=float).reshape(-1, 2)
    return float(np.hypot(*T.sum(axis=0))), len(T) == 3


def balance_defect(network: Network) -> np.ndarray:
    """Norm of the summed unit tangents at each interior vertex."""
    return np.array([balance_from_tangents(vertex_tangents(network, v))[0]
                     for v in network.topology.interior])


def vertex_angles(network: Network) -> list[np.ndarray]:
    """Pairwise angles between incident tangents at each interior vertex."""
    out = []
    for v in network.topology.interior:
        T = vertex_tangents(network, v)
        out.append(np.array([math.acos(max(-1.0, min(1.0, float(T[i] @ T[j]))))
                             for i in range(len(T)) for j in range(i + 1, len(T))]))
    return out


# -- convex hull ----------------------------------------------------------------


@dataclass(frozen=True)
class HullSide:
    """Geodesic between cyclically adjacent ideal points ``alpha -> beta``."""

    alpha: float
    beta: float
    kind: str
    theta0: float
    r0: float
    far_side: bool

    @classmethod
    def between(cls, alpha: float, beta: float) -> "HullSide":
        gap = (beta - alpha) % TWO_PI
        if abs(gap - math.pi) < 1e-15:
            return cls(alpha, beta, "origin_line", alpha, 0.0, False)
        if gap < math.pi:
            return cls(alpha, beta, "graph_arc", alpha + 0.5 * gap, apex_radius_for_width(gap), False)
        comp = TWO_PI - gap
        return cls(alpha, beta, "graph_arc", beta + 0.5 * comp, apex_radius_for_width(comp), True)

    def margin(self, p) -> float:
        """Signed distance-like margin, positive on the polygon's side of this geodesic."""
        x, y = float(p[0]), float(p[1])
        if self.kind == "origin_line":
            d = -np.array([math.cos(self.alpha), math.sin(self.alpha)])
            return float(-d[1] * x + d[0] * y)
        rho = math.hypot(x, y)
        if rho <= self.r0:
            m = self.r0 - rho
        else:
            phi = math.atan2(y, x)
            m = abs(angle_diff(phi, self.theta0)) - apex_offset(rho, self.r0)
        return -m if self.far_side else m


def hull_sides(boundary) -> list[HullSide]:
    angles = sorted(b.angle for b in boundary)
    return [HullSide.between(angles[i], angles[(i + 1) % len(angles)]) for i in range(len(angles))]


def hull_margins(network: Network, points: np.ndarray) -> np.ndarray:
    sides = hull_sides(network.boundary)
    if len(sides) < 3:
        # two ideal points span a single geodesic; there is no interior to test against
        return np.zeros(len(points))
    return np.array([min(s.margin(p) for s in sides) for p in points])


def hull_check(network: Network, tol: float = ASYMPTOTE_TOL) -> bool:
    """True iff vertices and edge samples lie on the inner side of every hull geodesic."""
    pts = [network.vertex_positions.reshape(-1, 2)] + network.samples()
    pts = np.concatenate(pts)
    return bool(np.all(hull_margins(network, pts) > -tol))


# -- embeddedness -----------------------------------------------------------------


def _segments_cross(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Boolean matrix: segment i of polyline A properly crosses or touches segment j of B."""
    a0, a1 = A[:-1, None, :], A[1:, None, :]
    b0, b1 = B[None, :-1, :], B[None, 1:, :]

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    o1 = orient(a0, a1, b0)
    o2 = orient(a0, a1, b1)
    o3 = orient(b0, b1, a0)
    o4 = orient(b0, b1, a1)
    return (o1 * o2 <= 0) & (o3 * o4 <= 0)


def crossing_pairs(network: Network, r_max: float = DEFAULT_FAR_RADIUS) -> list[tuple[int, int]]:
    """Pairs of edges that meet anywhere other than at a shared vertex."""
    polys = [e.arc.dense_points(0.05, r_max) for e in network.edges]
    bad = []
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            ei, ej = network.edges[i], network.edges[j]
            A, B = polys[i], polys[j]
            if len(A) < 2 or len(B) < 2:
                continue
            hits = _segments_cross(A, B)
            for node in {ei.u, ei.v} & {ej.u, ej.v}:
                # the segments touching the common vertex meet there by construction
                q = network.vertex_positions[node - network.k]
                hits[_end_segment(A, q), _end_segment(B, q)] = False
            if hits.any():
                bad.append((i, j))
    return bad


def _end_segment(poly: np.ndarray, q: np.ndarray) -> int:
    return 0 if np.hypot(*(poly[0] - q)) <= np.hypot(*(poly[-1] - q)) else len(poly) - 2


def is_embedded(network: Network) -> bool:
    return not crossing_pairs(network)


# -- distances ------------------------------------------------------------------


def _point_to_polylines(points: np.ndarray, polylines: list[np.ndarray], k: int = 6) -> np.ndarray:
    segs_a = np.concatenate([p[:-1] for p in polylines if len(p) > 1])
    segs_b = np.concatenate([p[1:] for p in polylines if len(p) > 1])
    tree = cKDTree(0.5 * (segs_a + segs_b))
    k = min(k, len(segs_a))
    _, idx = tree.query(points, k=k)
    idx = idx.reshape(len(points), k)
    a = segs_a[idx]
    d = segs_b[idx] - a
    w = points[:, None, :] - a
    dd = np.sum(d * d, axis=2)
    t = np.clip(np.sum(w * d, axis=2) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    diff = w - t[..., None] * d
    return np.min(np.hypot(diff[..., 0], diff[..., 1]), axis=1)


def hausdorff(polys_a: list[np.ndarray], polys_b: list[np.ndarray]) -> float:
    """Symmetric Hausdorff distance between two polyline sets (point-to-segment)."""
    pa = np.concatenate(polys_a)
    pb = np.concatenate(polys_b)
    return float(max(_point_to_polylines(pa, polys_b).max(), _point_to_polylines(pb, polys_a).max()))


def network_distance(a: Network, b: Network, r_max: float = 6.0, max_gap: float = 0.002) -> float:
    """Hausdorff distance between two networks restricted to the disc of radius ``r_max``."""
    return hausdorff(a.polylines(max_gap, r_max), b.polylines(max_gap, r_max))


# -- verification -----------------------------------------------------------------


def max_soliton_residual(network: Network) -> float:
    return float(max((e.arc.soliton_residuals().max() for e in network.edges), default=0.0))


def certify(network: Network, *, balance_tol: float = 1e-6, angle_tol: float = 1e-4,
            residual_tol: float = 1e-6, hull_tol: float = ASYMPTOTE_TOL) -> Network:
    """Run all regularity checks; sets ``status`` and fills ``diagnostics``."""
    topo = network.topology
    diag = network.diagnostics
    reasons = []
    try:
        topo.validate()
    except ValueError as exc:
        reasons.append(f"topology: {exc}")
    defects = balance_defect(network)
    angles = vertex_angles(network)
    diag["balance_defect"] = defects.tolist()
    diag["max_balance_defect"] = float(defects.max(initial=0.0))
    ang_err = max((float(np.max(np.abs(a - TWO_PI / 3))) for a in angles), default=0.0)
    diag["max_angle_error"] = ang_err
    diag["max_soliton_residual"] = max_soliton_residual(network)
    diag["hull_check"] = hull_check(network, hull_tol)
    crossings = crossing_pairs(network)
    diag["embedded"] = not crossings
    diag["renormalized_length"] = network.renormalized_length()
    if diag["max_balance_defect"] > balance_tol:
        reasons.append(f"balance defect {diag['max_balance_defect']:.3g} > {balance_tol:g}")
    if ang_err > angle_tol:
        reasons.append(f"junction angle error {ang_err:.3g} > {angle_tol:g}")
    if diag["max_soliton_residual"] > residual_tol:
        reasons.append(f"soliton residual {diag['max_soliton_residual']:.3g}")
        flipped = max((e.arc.soliton_residuals(flipped=True).max() for e in network.edges), default=0.0)
        if flipped <= residual_tol:
            reasons.append("soliton residual vanishes only with the opposite normal")
    if not diag["hull_check"]:
        reasons.append("vertex or edge outside the geodesic hull")
    if crossings:
        reasons.append(f"edges cross: {crossings}")
    diag.setdefault("failures", []).extend(reasons)
    network.status = "failed" if diag["failures"] else "regular"
    return network
