"""R-continuation: relax a topology to a regular geodesic network.

For each radius ``R`` of the schedule the leaves are pinned at the anchors
``R * (cos a_i, sin a_i)`` and all other polyline nodes are free. The total
discrete g-length is lowered by a red-black block descent (nodes of one colour
of the bipartite node graph never share a segment, so they move
independently), then the interior vertices are polished by a root solve of the
exact balance equations, where every edge is the true geodesic between its
endpoints. After the last stage the anchors are replaced by the ideal points,
the vertices are polished once more, and the edges are fitted by
:func:`soliton_networks.geodesics.connect`.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from ..geodesics import GeodesicError, connection_length, solve_connection
from ..geometry import IdealPoint, PlanePoint, angle_diff
from .discrete import PolylineNetwork, segment_gradients, segment_lengths
from .network import Network, assemble, certify, network_distance
from .topology import Topology, enumerate_topologies

log = logging.getLogger(__name__)

_ALPHAS = 2.0 ** -np.arange(0, 16)


class RelaxError(RuntimeError):
    pass


@dataclass(frozen=True)
class RelaxConfig:
    schedule: tuple[float, ...] = (4.0, 6.0, 8.0, 12.0)
    spacing: float = 0.1
    leaf_segments: int = 24
    max_sweeps: tuple[int, ...] = (100, 40, 40, 40)
    vertex_iters: int = 400
    vertex_tol: float = 1e-4
    move_tol: float = 1e-10
    polish_tol: float = 1e-11
    balance_tol: float = 1e-6
    angle_tol: float = 1e-4
    residual_tol: float = 1e-6
    collision: float = 1e-3
    dedup: float = 1e-4
    far_radius: float = 12.0

    def sweeps_for(self, stage: int) -> int:
        return self.max_sweeps[min(stage, len(self.max_sweeps) - 1)]


@dataclass
class StageRecord:
    """What happened at one radius of the schedule."""

    R: float
    sweeps: int
    objective: list[float]
    descent_vertices: np.ndarray
    vertices: np.ndarray
    polish_residual: float


@dataclass
class RContinuationState:
    R: float
    anchors: np.ndarray
    polyline: PolylineNetwork
    vertex_nodes: np.ndarray

    @property
    def objective(self) -> float:
        return self.polyline.length()

    @property
    def vertices(self) -> np.ndarray:
        return self.polyline.nodes[self.vertex_nodes]


# -- input validation and initial guess -------------------------------------------


def validate_boundary(boundary, k: int | None = None) -> tuple[IdealPoint, ...]:
    pts = tuple(b if isinstance(b, IdealPoint) else IdealPoint(float(b)) for b in boundary)
    if k is not None and len(pts) != k:
        raise RelaxError(f"topology has {k} leaves but {len(pts)} boundary points were given")
    if len(pts) < 2:
        raise RelaxError("need at least two boundary points")
    angles = [p.angle for p in pts]
    for i in range(len(angles)):
        for j in range(i + 1, len(angles)):
            if abs(angle_diff(angles[i], angles[j])) < 1e-12:
                raise RelaxError(f"boundary angles {i} and {j} coincide")
    if any(angle_diff(angles[(i + 1) % len(angles)], angles[i]) <= 0 for i in range(len(angles))) and len(pts) > 2:
        order = sorted(range(len(angles)), key=lambda i: angles[i])
        if not _is_cyclic_rotation(order):
            raise RelaxError("boundary points must be listed in counter-clockwise cyclic order")
    return pts


def _is_cyclic_rotation(order: list[int]) -> bool:
    n = len(order)
    start = order.index(0)
    return all(order[(start + i) % n] == i for i in range(n))


def initial_vertices(topology: Topology, angles: np.ndarray) -> np.ndarray:
    """Place each vertex at a small multiple of the mean direction of its three branches."""
    U = np.column_stack([np.cos(angles), np.sin(angles)])
    out = []
    for v in topology.interior:
        branch_means = [U[sorted(topology.leaves_beyond(v, w))].mean(axis=0) for w in topology.adjacency[v]]
        out.append(0.5 * np.sum(branch_means, axis=0) / 3.0)
    X = np.array(out).reshape(-1, 2)
    # separate coincident guesses deterministically so no edge starts with zero length
    for i in range(len(X)):
        for j in range(i):
            if np.hypot(*(X[i] - X[j])) < 1e-2:
                X[i] = X[i] + 0.05 * (i - j) * np.array([math.cos(i), math.sin(i)])
    return X


# -- discretisation and descent ------------------------------------------------------


def discretize(topology: Topology, angles: np.ndarray, X: np.ndarray, R: float,
               config: RelaxConfig) -> RContinuationState:
    """Straight polylines between the current vertices and the anchors on the circle of radius ``R``."""
    k = topology.k
    anchors = R * np.column_stack([np.cos(angles), np.sin(angles)])
    nodes = [anchors, np.asarray(X, dtype=float).reshape(-1, 2)]
    n_nodes = k + len(nodes[1])
    segments = []
    for u, v in topology.edges:
        pu = nodes[0][u] if u < k else nodes[1][u - k]
        pv = nodes[0][v] if v < k else nodes[1][v - k]
        if u < k and v < k:
            n = max(4, int(math.ceil(np.hypot(*(pv - pu)) / config.spacing)))
            t = np.linspace(0.0, 1.0, n + 1)[1:-1]
        elif u < k or v < k:
            n = config.leaf_segments
            t = (np.arange(1, n) / n) ** 2
            if u < k:  # grade towards the vertex end
                t = 1.0 - t[::-1]
        else:
            n = max(4, int(math.ceil(np.hypot(*(pv - pu)) / config.spacing)))
            t = np.linspace(0.0, 1.0, n + 1)[1:-1]
        inner = pu[None, :] + t[:, None] * (pv - pu)[None, :]
        ids = list(range(n_nodes, n_nodes + len(inner)))
        chain = [u] + ids + [v]
        segments.extend(zip(chain[:-1], chain[1:]))
        nodes.append(inner)
        n_nodes += len(inner)
    all_nodes = np.concatenate(nodes)
    free = np.ones(len(all_nodes), dtype=bool)
    free[:k] = False
    poly = PolylineNetwork(all_nodes, np.array(segments, dtype=int), free)
    return RContinuationState(R, anchors, poly, np.arange(k, k + len(nodes[1])))


def _neighbour_table(poly: PolylineNetwork) -> tuple[np.ndarray, np.ndarray]:
    n = len(poly.nodes)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in poly.segments:
        adj[a].append(b)
        adj[b].append(a)
    width = max(len(a) for a in adj)
    table = np.zeros((n, width), dtype=int)
    mask = np.zeros((n, width), dtype=bool)
    for i, a in enumerate(adj):
        table[i, : len(a)] = a
        table[i, len(a):] = i
        mask[i, : len(a)] = True
    return table, mask


def _two_colouring(poly: PolylineNetwork, table: np.ndarray, mask: np.ndarray) -> np.ndarray:
    colour = -np.ones(len(poly.nodes), dtype=int)
    for start in range(len(poly.nodes)):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        stack = [start]
        while stack:
            x = stack.pop()
            for y, ok in zip(table[x], mask[x]):
                if ok and colour[y] < 0:
                    colour[y] = 1 - colour[x]
                    stack.append(y)
                elif ok and colour[y] == colour[x]:
                    raise RelaxError("polyline graph is not bipartite")
    return colour


def _local_lengths(Xc: np.ndarray, Nb: np.ndarray, mask: np.ndarray) -> np.ndarray:
    c, w = mask.shape
    P = np.repeat(Xc, w, axis=0)
    Q = Nb.reshape(-1, 2)
    L = segment_lengths(P, np.where(mask.reshape(-1, 1), Q, P + 1.0))
    return np.sum(np.where(mask, L.reshape(c, w), 0.0), axis=1)


def descend(state: RContinuationState, max_sweeps: int, move_tol: float = 1e-10) -> tuple[list[float], int]:
    """Red-black preconditioned descent with backtracking; never increases the length.

    Returns the objective history (one value per sweep, starting with the
    initial length) and the number of sweeps taken.
    """
    poly = state.polyline
    table, mask = _neighbour_table(poly)
    colour = _two_colouring(poly, table, mask)
    classes = [np.flatnonzero(poly.free & (colour == c)) for c in (0, 1)]
    X = poly.nodes
    history = [poly.length()]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        biggest = 0.0
        for C in classes:
            if len(C) == 0:
                continue
            Xc = X[C]
            Nb = X[table[C]]
            m = mask[C]
            w = m.shape[1]
            P = np.repeat(Xc, w, axis=0)
            Q = Nb.reshape(-1, 2)
            safe_Q = np.where(m.reshape(-1, 1), Q, P + 1.0)
            gP, _ = segment_gradients(P, safe_Q)
            g = np.sum(np.where(m[..., None], gP.reshape(-1, w, 2), 0.0), axis=1)
            dist = np.hypot(*(Nb - Xc[:, None, :]).transpose(2, 0, 1))
            inv = np.sum(np.where(m, 1.0 / np.maximum(dist, 1e-300), 0.0), axis=1)
            # inverse of an approximate transverse Hessian: the conformal factor over the local spacing
            step = g * (np.exp(-0.5 * np.sum(Xc * Xc, axis=1)) / inv)[:, None]
            f0 = _local_lengths(Xc, Nb, m)
            trials = Xc[:, None, :] - _ALPHAS[None, :, None] * step[:, None, :]
            nA = len(_ALPHAS)
            with np.errstate(over="ignore", invalid="ignore"):
                ft = _local_lengths(trials.reshape(-1, 2), np.repeat(Nb, nA, axis=0),
                                    np.repeat(m, nA, axis=0)).reshape(len(C), nA)
            ft = np.where(np.isfinite(ft), ft, np.inf)
            best = np.argmin(ft, axis=1)
            fbest = ft[np.arange(len(C)), best]
            move = fbest < f0
            new = np.where(move[:, None], trials[np.arange(len(C)), best], Xc)
            scale = 1.0 + np.hypot(*Xc.T)
            biggest = max(biggest, float(np.max(np.hypot(*(new - Xc).T) / scale)))
            X[C] = new
        history.append(poly.length())
        if biggest < move_tol:
            break
    return history, sweeps


# -- exact polish -----------------------------------------------------------------------


def _balance_residual(topology: Topology, ends, flat: np.ndarray) -> np.ndarray:
    k = topology.k
    X = flat.reshape(-1, 2)
    res = np.zeros_like(X)
    endpoint = _endpoint_fn(topology, ends, X)
    for u, v in topology.edges:
        c = solve_connection(endpoint(u), endpoint(v))
        if u >= k:
            res[u - k] += c.tangent1
        if v >= k:
            res[v - k] += c.tangent2
    return res.ravel()


def _endpoint_fn(topology: Topology, ends, X: np.ndarray):
    k = topology.k

    def endpoint(node):
        if node < k:
            return ends[node]
        return PlanePoint(float(X[node - k, 0]), float(X[node - k, 1]))
    return endpoint


def exact_length(topology: Topology, ends, X: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Total length with every edge a true geodesic, as a function of the vertices.

    Ideal ends are renormalised as in :func:`connection_length`. Returns the
    length, the per-vertex sums of unit tangents (the negative gradient divided
    by the length density ``exp(|x|^2 / 2)``) and the Euclidean length of the shortest edge at
    each vertex.
    """
    k = topology.k
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    endpoint = _endpoint_fn(topology, ends, X)
    total = 0.0
    S = np.zeros_like(X)
    reach = np.full(len(X), np.inf)
    for u, v in topology.edges:
        c = solve_connection(endpoint(u), endpoint(v))
        total += connection_length(c)
        gap = np.inf
        if u >= k and v >= k:
            gap = float(np.hypot(*(X[u - k] - X[v - k])))
        elif u >= k or v >= k:
            vert, other = (u, v) if u >= k else (v, u)
            if not isinstance(ends[other], IdealPoint):
                gap = float(np.hypot(*(X[vert - k] - ends[other].as_array())))
        if u >= k:
            S[u - k] += c.tangent1
            reach[u - k] = min(reach[u - k], gap)
        if v >= k:
            S[v - k] += c.tangent2
            reach[v - k] = min(reach[v - k], gap)
    return total, S, reach


@dataclass
class VertexDescent:
    vertices: np.ndarray
    objective: list[float]
    iterations: int
    balance: float
    collisions: list[tuple[int, int]]


def vertex_descent(topology: Topology, ends, X0: np.ndarray, *, max_iter: int = 400, tol: float = 1e-4,
                   collision: float = 1e-3) -> VertexDescent:
    """Move the vertices along their tangent sums, with backtracking; the length never increases.

    Each vertex steps by a fraction of its shortest incident edge, so two
    vertices joined by a collapsing edge approach each other geometrically
    and the collapse is caught by the ``collision`` threshold.
    """
    X = np.asarray(X0, dtype=float).reshape(-1, 2).copy()
    L, S, reach = exact_length(topology, ends, X)
    history = [L]
    alpha = 0.25
    it = 0
    bumped: list[tuple[int, int]] = []
    for it in range(1, max_iter + 1):
        if np.max(np.hypot(S[:, 0], S[:, 1]), initial=0.0) < tol:
            break
        D = S * np.minimum(reach, 1.0 + np.hypot(X[:, 0], X[:, 1]))[:, None]
        while alpha > 1e-12:
            trial = X + alpha * D
            try:
                Lt, St, rt = exact_length(topology, ends, trial)
            except (GeodesicError, ValueError, ZeroDivisionError):
                Lt = math.inf
            if Lt < L:
                X, L, S, reach = trial, Lt, St, rt
                alpha = min(2.0 * alpha, 0.5)
                break
            alpha *= 0.5
        else:
            break
        history.append(L)
        bumped = vertex_collisions(X, collision)
        if bumped:
            break
    return VertexDescent(X, history, it, float(np.max(np.hypot(S[:, 0], S[:, 1]), initial=0.0)), bumped)


def polish(topology: Topology, ends, X0: np.ndarray, tol: float = 1e-11) -> tuple[np.ndarray, float]:
    """Solve the exact balance equations for the interior vertices.

    ``ends`` gives, per leaf, the fixed endpoint (an anchor ``PlanePoint`` or
    an ``IdealPoint``). Returns the vertices and the final max residual.
    """
    X0 = np.asarray(X0, dtype=float).reshape(-1, 2)
    if len(X0) == 0:
        return X0, 0.0

    def fun(flat):
        try:
            return _balance_residual(topology, ends, flat)
        except (GeodesicError, ValueError, ZeroDivisionError):
            return np.full(flat.shape, 10.0)

    sol = root(fun, X0.ravel(), method="hybr", options={"xtol": 1e-14, "maxfev": 400 * len(X0.ravel())})
    X = sol.x.reshape(-1, 2)
    resid = float(np.max(np.abs(fun(sol.x))))
    return X, resid


def _closest_pair(X: np.ndarray) -> float:
    d = [float(np.hypot(*(X[i] - X[j]))) for i in range(len(X)) for j in range(i)]
    return min(d, default=math.inf)


def vertex_collisions(X: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    out = []
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            if np.hypot(*(X[i] - X[j])) < threshold:
                out.append((i, j))
    return out


# -- driver --------------------------------------------------------------------------------


def _settle(topology: Topology, ends, starts: list[np.ndarray], config: RelaxConfig):
    """Best start by exact length, vertex descent, then the balance solve.

    Returns ``(vertices, balance residual, colliding pairs)``.
    """
    best = None
    for X0 in starts:
        try:
            L = exact_length(topology, ends, X0)[0]
        except (GeodesicError, ValueError, ZeroDivisionError):
            continue
        if best is None or L < best[0]:
            best = (L, X0)
    if best is None:
        return np.asarray(starts[0]), math.inf, []
    # length is convex along geodesic variations (K < 0), so a balanced point is the minimiser
    X, resid = polish(topology, ends, best[1], config.polish_tol)
    if resid <= config.polish_tol and not vertex_collisions(X, config.collision):
        return X, resid, []
    vd = vertex_descent(topology, ends, best[1], max_iter=config.vertex_iters, tol=config.vertex_tol,
                        collision=config.collision)
    if vd.collisions:
        return vd.vertices, vd.balance, vd.collisions
    X, resid = polish(topology, ends, vd.vertices, config.polish_tol)
    if resid > config.polish_tol:
        log.info("balance solve stalled at %.3g; keeping descent vertices", resid)
        return vd.vertices, resid, []
    return X, resid, []


def relax(topology: Topology, boundary, config: RelaxConfig | None = None) -> Network:
    """Relax ``topology`` with the given ideal boundary to a certified network.

    Failures (no convergence, vertex collisions, failed checks) do not raise:
    the returned network has ``status == "failed"`` and the reasons listed in
    ``diagnostics["failures"]``.
    """
    config = config or RelaxConfig()
    pts = validate_boundary(boundary, topology.k)
    angles = np.array([p.angle for p in pts])
    X = initial_vertices(topology, angles)
    stages: list[StageRecord] = []
    failures: list[str] = []
    bumped: list[tuple[int, int]] = []
    resid = math.inf
    for i, R in enumerate(config.schedule):
        state = discretize(topology, angles, X, R, config)
        history, sweeps = descend(state, config.sweeps_for(i), config.move_tol)
        X_desc = state.vertices.copy()
        anchors = [PlanePoint(float(a[0]), float(a[1])) for a in state.anchors]
        X, resid, bumped = _settle(topology, anchors, [X_desc, X], config)
        stages.append(StageRecord(R, sweeps, history, X_desc, X.copy(), resid))
        if bumped:
            break
    if not bumped:
        X_final, resid, bumped = _settle(topology, list(pts), [X], config)
    else:
        X_final = X
    if resid > config.polish_tol and not bumped:
        failures.append(f"balance solve did not converge (residual {resid:.3g}, "
                        f"closest vertices {_closest_pair(X_final):.3g} apart)")
    bumped = bumped or vertex_collisions(X_final, config.collision)
    if bumped:
        pairs = [(topology.k + i, topology.k + j) for i, j in bumped]
        net = Network(topology, pts, X_final, status="failed")
        net.diagnostics.update(stages=stages, failures=failures + [f"vertex collision between {pairs}"],
                               polish_residual=resid)
        return net
    # a vertex far out (two nearly equal boundary angles) needs its arcs integrated beyond it
    r_fit = max(config.far_radius, float(np.max(np.hypot(X_final[:, 0], X_final[:, 1]), initial=0.0)) + 4.0)
    try:
        net = assemble(topology, pts, X_final, r_max=r_fit)
    except (GeodesicError, ValueError) as exc:
        net = Network(topology, pts, X_final, status="failed")
        net.diagnostics.update(stages=stages, failures=failures + [f"edge fit failed: {exc}"],
                               polish_residual=resid)
        return net
    net.diagnostics.update(stages=stages, failures=failures, polish_residual=resid)
    return certify(net, balance_tol=config.balance_tol, angle_tol=config.angle_tol,
                   residual_tol=config.residual_tol)


@dataclass
class SweepResult:
    topology: Topology
    network: Network | None
    error: str | None = None

    @property
    def regular(self) -> bool:
        return self.network is not None and self.network.status == "regular"


def _relax_safely(args) -> SweepResult:
    topology, boundary, config = args
    try:
        return SweepResult(topology, relax(topology, boundary, config))
    except (RelaxError, GeodesicError, ValueError, ArithmeticError) as exc:
        return SweepResult(topology, None, f"{type(exc).__name__}: {exc}")


def sweep(boundary, mode: str = "connected", config: RelaxConfig | None = None,
          workers: int = 1) -> list[SweepResult]:
    """Relax every topology of ``mode``; one result per topology in canonical order."""
    config = config or RelaxConfig()
    pts = validate_boundary(boundary)
    topologies = enumerate_topologies(len(pts), mode)
    jobs = [(t, pts, config) for t in topologies]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_relax_safely, jobs))
    return [_relax_safely(j) for j in jobs]


@dataclass
class ExpanderSolutions:
    boundary: tuple[IdealPoint, ...]
    mode: str
    networks: list[Network] = field(default_factory=list)
    results: list[SweepResult] = field(default_factory=list)
    duplicates: list[tuple[int, int]] = field(default_factory=list)

    @property
    def failures(self) -> list[SweepResult]:
        return [r for r in self.results if not r.regular]

    @property
    def connected(self) -> list[Network]:
        return [n for n in self.networks if n.topology.is_connected]


def solve_expander(boundary, mode: str = "connected", config: RelaxConfig | None = None,
                   workers: int = 1) -> ExpanderSolutions:
    """All regular embedded networks for ``boundary`` (deduplicated), plus the full sweep record."""
    config = config or RelaxConfig()
    pts = validate_boundary(boundary)
    results = sweep(pts, mode, config, workers)
    out = ExpanderSolutions(pts, mode, results=results)
    for res in results:
        if not res.regular:
            continue
        net = res.network
        dup = None
        for j, other in enumerate(out.networks):
            if network_distance(net, other) <= config.dedup:
                dup = j
                break
        if dup is None:
            out.networks.append(net)
        else:
            out.duplicates.append((dup, results.index(res)))
    return out
