"""Pointwise formulas for the conformal metric ``g = exp(x^2 + y^2) (dx^2 + dy^2)``.

Everything here is a pure function of its arguments. Scalar helpers use the
``math`` module because they sit inside integrator inner loops; the few
vectorised helpers accept numpy arrays.

Orientation convention: for a curve with unit tangent ``T = (cos a, sin a)``
the normal ``nu`` is the *left* normal ``(-sin a, cos a)`` and the signed
curvature satisfies ``dT/ds = kappa * nu``. With this choice a polar graph
traversed with increasing angle has ``nu`` pointing towards the origin side,
and both sides of the soliton equation equal ``-r0`` at the apex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised when a formula is evaluated outside its domain."""


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    @classmethod
    def from_polar(cls, r: float, theta: float) -> "PlanePoint":
        return cls(r * math.cos(theta), r * math.sin(theta))

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def theta(self) -> float:
        if self.x == 0.0 and self.y == 0.0:
            raise GeometryError("polar angle undefined at the origin")
        return math.atan2(self.y, self.x) % TWO_PI

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class IdealPoint:
    """A direction at infinity, i.e. a point of the boundary circle of the ball."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])


@dataclass(frozen=True)
class PolarGraphState:
    """State ``(theta, r, r')`` of a curve written as a polar graph ``r(theta)``."""

    theta: float
    r: float
    dr: float

    @property
    def sigma(self) -> float:
        return math.hypot(self.r, self.dr)

    @property
    def v(self) -> float:
        return self.dr / self.r


def wrap_angle(a: float) -> float:
    return a % TWO_PI


def angle_diff(a: float, b: float) -> float:
    """Signed difference ``a - b`` reduced to ``(-pi, pi]``."""
    d = (a - b) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


def ccw_gap(a: float, b: float) -> float:
    """Counter-clockwise angular distance from ``a`` to ``b`` in ``[0, 2 pi)``."""
    return (b - a) % TWO_PI


def conformal_factor(p: PlanePoint) -> float:
    """Return ``exp(r^2)``; the length element is ``exp(r^2 / 2)`` times Euclidean."""
    return math.exp(p.x * p.x + p.y * p.y)


def gauss_curvature(p: PlanePoint) -> float:
    return -2.0 * math.exp(-(p.x * p.x + p.y * p.y))


def _require_positive(r: float) -> None:
    if not r > 0.0:
        raise GeometryError(f"polar formulas need r > 0, got r={r!r}")


def polar_ode_rhs(s: PolarGraphState) -> float:
    """Second derivative ``r''`` of a soliton written as a polar graph."""
    _require_positive(s.r)
    return rpp(s.r, s.dr)


def rpp(r: float, dr: float) -> float:
    # r r'' = r^2 + 2 r'^2 + r^2 (r^2 + r'^2), unchecked fast path
    return r + 2.0 * dr * dr / r + r * (r * r + dr * dr)


def geodesic_rhs(r: float, theta: float, rdot: float, thetadot: float) -> tuple[float, float]:
    """Accelerations of the affinely parametrised geodesic equations in polar form."""
    _require_positive(r)
    rddot = (r ** 3 + r) * thetadot * thetadot - r * rdot * rdot
    thetaddot = -2.0 * (r + 1.0 / r) * rdot * thetadot
    return rddot, thetaddot


def geodesic_rhs_euclidean(r: float, theta: float, rdot: float, thetadot: float) -> tuple[float, float]:
    """Same geodesics reparametrised by Euclidean arclength.

    Obtained from :func:`geodesic_rhs` by the change of parameter
    ``du = exp(r^2 / 2) ds``; the curve traced is identical.
    """
    scale = math.exp(-0.5 * r * r)
    ru, tu = geodesic_rhs(r, theta, scale * rdot, scale * thetadot)
    e = math.exp(r * r)
    return e * ru + r * rdot * rdot, e * tu + r * rdot * thetadot


def curvature_of_graph(s: PolarGraphState, r2: float) -> float:
    """Euclidean signed curvature of the polar graph, given ``r''``."""
    _require_positive(s.r)
    sigma = s.sigma
    return (2.0 * s.dr * s.dr - s.r * r2 + s.r * s.r) / sigma ** 3


def position_dot_normal(s: PolarGraphState) -> float:
    """``F . nu`` for the polar graph, equal to ``-r^2 / sigma``."""
    return -s.r * s.r / s.sigma


def graph_tangent(s: PolarGraphState) -> np.ndarray:
    """Unit tangent of the polar graph in the direction of increasing angle."""
    c, sn = math.cos(s.theta), math.sin(s.theta)
    sigma = s.sigma
    tr, tn = s.dr / sigma, s.r / sigma
    return np.array([tr * c - tn * sn, tr * sn + tn * c])


def left_normal(tangent: np.ndarray) -> np.ndarray:
    return np.array([-tangent[1], tangent[0]])


def soliton_residual(p: PlanePoint, tangent, kappa: float, time: float = 0.5) -> float:
    """``kappa - (x, y) . nu / (2 t)`` with ``nu`` the left normal of ``tangent``.

    At the reference time ``t = 1/2`` this is the stationary soliton equation.
    """
    t = np.asarray(tangent, dtype=float)
    norm = math.hypot(t[0], t[1])
    if abs(norm - 1.0) > 1e-9:
        raise GeometryError(f"tangent must be a unit vector, |t|={norm}")
    nu = left_normal(t)
    return kappa - (p.x * nu[0] + p.y * nu[1]) / (2.0 * time)


def stereographic(points: np.ndarray) -> np.ndarray:
    """Compactify the plane into the open unit disc, ``p -> p / (1 + sqrt(1 + |p|^2))``.

    This is the composite of the gnomonic lift to the upper hemisphere with
    stereographic projection from the south pole; rays map to radii.
    """
    pts = np.asarray(points, dtype=float)
    rho = np.sqrt(np.sum(pts * pts, axis=-1, keepdims=True))
    return pts / (1.0 + np.sqrt(1.0 + rho * rho))


# -- lengths ----------------------------------------------------------------


def g_length(polyline) -> float:
    """g-length of a polyline, composite midpoint rule on each segment.

    Second-order accurate in the segment size.
    """
    pts = _as_points(polyline)
    if len(pts) < 2:
        raise GeometryError("g_length needs at least two points")
    seg = np.diff(pts, axis=0)
    ds = np.hypot(seg[:, 0], seg[:, 1])
    mid = 0.5 * (pts[1:] + pts[:-1])
    return float(np.sum(ds * np.exp(0.5 * np.sum(mid * mid, axis=1))))


def _as_points(polyline) -> np.ndarray:
    if isinstance(polyline, np.ndarray):
        pts = polyline.astype(float)
    else:
        pts = np.array([[p.x, p.y] if isinstance(p, PlanePoint) else p for p in polyline], dtype=float)
    return pts.reshape(-1, 2)
