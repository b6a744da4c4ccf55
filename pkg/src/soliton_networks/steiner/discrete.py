"""Exact g-length of straight segments and of polyline networks.

Along the segment ``p + s d`` (``|d| = 1``) the length element is
``exp((h^2 + s^2) / 2) ds`` where ``h`` is the distance of the line from the
origin, so the length has a closed form through the Dawson function
``F(y) = exp(-y^2) int_0^y exp(u^2) du``:

    L(p, q) = sqrt(2) * (E(q) F(q.d / sqrt 2) - E(p) F(p.d / sqrt 2)),

with ``E(x) = exp(|x|^2 / 2)``. Very short segments, where this difference
cancels, fall back to Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import dawsn

SQRT2 = math.sqrt(2.0)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
SHORT = 1e-3


def _dawson_prime(y):
    return 1.0 - 2.0 * y * dawsn(y)


def segment_lengths(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """g-lengths of the segments ``P[i] -> Q[i]``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    D = Q - P
    dist = np.hypot(D[:, 0], D[:, 1])
    out = np.empty(len(P))
    short = dist * (1.0 + np.hypot(P[:, 0], P[:, 1]) + np.hypot(Q[:, 0], Q[:, 1])) < SHORT
    if np.any(short):
        out[short] = _gl_lengths(P[short], Q[short])
    lng = ~short
    if np.any(lng):
        p, q, dd = P[lng], Q[lng], dist[lng]
        d = D[lng] / dd[:, None]
        up = np.sum(p * d, axis=1) / SQRT2
        uq = np.sum(q * d, axis=1) / SQRT2
        ep = np.exp(0.5 * np.sum(p * p, axis=1))
        eq = np.exp(0.5 * np.sum(q * q, axis=1))
        out[lng] = SQRT2 * (eq * dawsn(uq) - ep * dawsn(up))
    return out


def _gl_lengths(P, Q):
    D = Q - P
    dist = np.hypot(D[:, 0], D[:, 1])
    X = P[:, None, :] + _GL_T[None, :, None] * D[:, None, :]
    phi = np.exp(0.5 * np.sum(X * X, axis=2))
    return dist * (phi @ _GL_W)


def segment_gradients(P: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`segment_lengths` with respect to ``P`` and ``Q``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    D = Q - P
    dist = np.hypot(D[:, 0], D[:, 1])
    gP = np.empty_like(P)
    gQ = np.empty_like(Q)
    short = dist * (1.0 + np.hypot(P[:, 0], P[:, 1]) + np.hypot(Q[:, 0], Q[:, 1])) < SHORT
    if np.any(short):
        gP[short], gQ[short] = _gl_gradients(P[short], Q[short])
    lng = ~short
    if np.any(lng):
        p, q, dd = P[lng], Q[lng], dist[lng]
        d = D[lng] / dd[:, None]
        up = np.sum(p * d, axis=1) / SQRT2
        uq = np.sum(q * d, axis=1) / SQRT2
        ep = np.exp(0.5 * np.sum(p * p, axis=1))
        eq = np.exp(0.5 * np.sum(q * q, axis=1))
        # foot of the perpendicular from the origin, divided by the segment length
        foot = p - np.sum(p * d, axis=1)[:, None] * d
        m = foot / dd[:, None]
        cp = (ep * _dawson_prime(up))[:, None]
        cq = (eq * _dawson_prime(uq))[:, None]
        gQ[lng] = SQRT2 * (eq * dawsn(uq))[:, None] * q + cq * (d + m) - cp * m
        gP[lng] = -SQRT2 * (ep * dawsn(up))[:, None] * p + cp * (m - d) - cq * m
    return gP, gQ


def _gl_gradients(P, Q):
    D = Q - P
    dist = np.hypot(D[:, 0], D[:, 1])
    # a zero-length segment has no direction; its one-sided derivative is taken as zero
    d = D / np.where(dist > 0, dist, 1.0)[:, None]
    X = P[:, None, :] + _GL_T[None, :, None] * D[:, None, :]
    phi = np.exp(0.5 * np.sum(X * X, axis=2))
    base = (phi @ _GL_W)[:, None] * d
    wq = (_GL_W * _GL_T)[None, :, None] * phi[:, :, None] * X
    wp = (_GL_W * (1.0 - _GL_T))[None, :, None] * phi[:, :, None] * X
    gQ = base + dist[:, None] * wq.sum(axis=1)
    gP = -base + dist[:, None] * wp.sum(axis=1)
    return gP, gQ


@dataclass
class PolylineNetwork:
    """Nodes joined by straight segments; some nodes are pinned.

    ``segments`` is an ``(m, 2)`` integer array of node indices and ``free`` a
    boolean mask over nodes.
    """

    nodes: np.ndarray
    segments: np.ndarray
    free: np.ndarray

    def length(self, nodes: np.ndarray | None = None) -> float:
        X = self.nodes if nodes is None else nodes
        return float(np.sum(segment_lengths(X[self.segments[:, 0]], X[self.segments[:, 1]])))

    def gradient(self, nodes: np.ndarray | None = None) -> np.ndarray:
        """Gradient of the total length with respect to every node (pinned rows zeroed)."""
        X = self.nodes if nodes is None else nodes
        gP, gQ = segment_gradients(X[self.segments[:, 0]], X[self.segments[:, 1]])
        g = np.zeros_like(X)
        np.add.at(g, self.segments[:, 0], gP)
        np.add.at(g, self.segments[:, 1], gQ)
        g[~self.free] = 0.0
        return g
