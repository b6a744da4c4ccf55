"""Independent reference computations used by the tests.

Nothing here calls into the package except for plain data types, so these
give a second opinion rather than a restatement of the implementation.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad, solve_ivp

# -- combinatorics -------------------------------------------------------------


def all_binary_trees(k: int) -> list[frozenset]:
    """Every unrooted binary tree with leaves ``0..k-1``, as a set of leaf splits.

    Built by the classical leaf-insertion construction: start from the triod
    on leaves 0, 1, 2 and attach each further leaf to the midpoint of every
    existing edge. Each labelled tree arises exactly once, (2k-5)!! in all.
    """
    if k < 3:
        raise ValueError("need k >= 3")
    start = [(0, "c"), (1, "c"), (2, "c")]
    trees = [start]
    for leaf in range(3, k):
        grown = []
        for edges in trees:
            for i, (a, b) in enumerate(edges):
                mid = ("m", leaf)
                rest = edges[:i] + edges[i + 1:]
                grown.append(rest + [(a, mid), (mid, b), (leaf, mid)])
        trees = grown
    return [_splits(edges, k) for edges in trees]


def _splits(edges, k: int) -> frozenset:
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    out = set()
    for a, b in edges:
        if isinstance(a, int) or isinstance(b, int):
            continue
        side = _leaves_from(adj, a, b)
        if 0 in side:
            side = frozenset(range(k)) - side
        out.add(side)
    return frozenset(out)


def _leaves_from(adj, u, v) -> frozenset:
    seen, stack, leaves = {u, v}, [v], set()
    while stack:
        x = stack.pop()
        if isinstance(x, int):
            leaves.add(x)
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return frozenset(leaves)


def is_cyclic_interval(subset, k: int) -> bool:
    s = set(subset)
    starts = [i for i in s if (i - 1) % k not in s]
    return len(starts) == 1


def planar_binary_trees(k: int) -> set[frozenset]:
    """Brute force: keep the trees whose every split is an interval of the circle."""
    return {t for t in all_binary_trees(k) if all(is_cyclic_interval(s, k) for s in t)}


def all_perfect_matchings(items) -> list[list[tuple[int, int]]]:
    items = list(items)
    if not items:
        return [[]]
    first = items[0]
    out = []
    for j in range(1, len(items)):
        rest = items[1:j] + items[j + 1:]
        for m in all_perfect_matchings(rest):
            out.append([(first, items[j])] + m)
    return out


def chords_intersect(p: tuple[int, int], q: tuple[int, int]) -> bool:
    """Chords of a circle with labelled points; true iff they cross in the interior."""
    a, b = sorted(p)
    return (a < q[0] < b) != (a < q[1] < b)


def noncrossing_matchings(k: int) -> list[list[tuple[int, int]]]:
    return [m for m in all_perfect_matchings(range(k))
            if not any(chords_intersect(p, q) for p, q in itertools.combinations(m, 2))]


def catalan_closed_form(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


# -- geometry --------------------------------------------------------------------


def radial_g_length(a: float) -> float:
    """``int_0^a exp(r^2 / 2) dr`` by adaptive quadrature."""
    return quad(lambda r: math.exp(0.5 * r * r), 0.0, a, epsabs=0.0, epsrel=1e-13)[0]


def _geodesic_field(_s, y):
    # g = exp(2 phi)|dx|^2 with phi = |x|^2 / 2, parametrised by Euclidean arclength:
    # x' = T, T' = (grad phi - (grad phi . T) T) rotated into the normal, i.e.
    # the curvature vector equals the normal part of grad phi
    x, y_, tx, ty = y
    gx, gy = x, y_
    dot = gx * tx + gy * ty
    return [tx, ty, gx - dot * tx, gy - dot * ty]


def shoot_cartesian(p, direction: float, r_stop: float = 9.0, rtol: float = 1e-12):
    """Trace the geodesic from ``p`` leaving at angle ``direction`` until ``|x| = r_stop``.

    Uses scipy's DOP853 on the Cartesian equations, which share no code with
    the polar shooting in the package. Returns the dense solution and the end point.
    """
    def leave(_s, y):
        return math.hypot(y[0], y[1]) - r_stop
    leave.terminal = True
    leave.direction = 1
    y0 = [p[0], p[1], math.cos(direction), math.sin(direction)]
    sol = solve_ivp(_geodesic_field, (0.0, 200.0), y0, method="DOP853", rtol=rtol, atol=1e-14,
                    events=leave, dense_output=True)
    if not sol.t_events[0].size:
        raise RuntimeError("geodesic did not leave the disc")
    return sol, sol.y_events[0][0]


def asymptotic_angle(p, direction: float, r_stop: float = 9.0) -> float:
    """Polar angle where the geodesic leaves the disc of radius ``r_stop``.

    Beyond radius 9 the curve turns by less than ``exp(-40)``, so this is the
    asymptote to double precision.
    """
    _, end = shoot_cartesian(p, direction, r_stop)
    return math.atan2(end[1], end[0])


def apex_width_cartesian(r0: float) -> float:
    """Width of the geodesic with apex ``(r0, 0)``: difference of its two asymptotic angles."""
    a = asymptotic_angle((r0, 0.0), 0.5 * math.pi)
    b = asymptotic_angle((r0, 0.0), -0.5 * math.pi)
    return (a - b) % (2.0 * math.pi)


def rotate(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.asarray(points) @ np.array([[c, s], [-s, c]])
