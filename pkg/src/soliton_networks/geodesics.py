"""Geodesics of ``g``: apex shooting, widths, and two-point connection.

Every geodesic not through the origin is a polar graph ``r(theta)`` with a
unique apex ``(theta0, r0)`` and two asymptotic directions ``a < b``. Arcs are
produced by integrating the polar graph equation outward from the apex in
both directions. Near the asymptote the radius blows up at finite angle, so
once ``r' > r`` the integration switches to ``s = log r`` as independent
variable with ``theta(s)`` and ``psi = dtheta/ds = r / r'`` as unknowns;
``psi`` then decays like ``exp(-r^2 / 2)``.

The rotational symmetry of the metric gives a first integral (Clairaut),
``exp(r^2 / 2) r^2 / sigma = r0 exp(r0^2 / 2)``, so the angle swept between
the apex and radius ``rho`` is a one-dimensional integral. It is evaluated by
composite Gauss-Legendre quadrature and used to solve boundary value problems
quickly; the shooting integrator then realises the arc itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import dawsn

from .geometry import (
    TWO_PI,
    IdealPoint,
    PlanePoint,
    PolarGraphState,
    angle_diff,
    geodesic_rhs_euclidean,
    graph_tangent,
    rpp,
)
from .integrators import IntegrationError, Trajectory, integrate_adaptive, rkf45_step

RTOL = 1e-10
ATOL = 1e-14
ASYMPTOTE_TOL = 1e-7
RESIDUAL_TOL = 1e-6
FD_STEP = 1e-3
# connections passing closer than this to the origin are taken as lines through it
NEAR_ORIGIN = 1e-12
# Below this apex radius the apex region is integrated as a graph over the
# apex tangent line, out to radius GRAPH_RADIUS. Polar variables carry an
# absolute error of order rtol * r there, which swamps the O(r0) curvature.
GRAPH_R0 = 1e-2
GRAPH_RADIUS = 0.5
GRAPH_FD_STEP = 1e-2

# squared-radius excess beyond which the Clairaut integrand is below 1e-17
_CUT_EXCESS = 80.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
SQRT2 = math.sqrt(2.0)


class GeodesicError(RuntimeError):
    """Shooting or boundary-value failure."""


class BracketError(GeodesicError):
    def __init__(self, message: str, table: list[tuple[float, float]]):
        rows = "\n".join(f"  r0={x:.6g}  value={y:.12g}" for x, y in table)
        super().__init__(f"{message}\n{rows}")
        self.table = table


# -- Clairaut quadrature ------------------------------------------------------


def _theta_integrand(u: np.ndarray, r0: float) -> np.ndarray:
    sh2 = np.sinh(u) ** 2
    expo = np.log1p(sh2) + r0 * r0 * sh2
    return np.tanh(u) / np.sqrt(np.expm1(expo))


def _excess_integrand(u: np.ndarray, r0: float) -> np.ndarray:
    # exp(r^2/2) (1/cos(beta) - 1) dr/du, written through sin^2(beta) to avoid cancellation
    sh2 = np.sinh(u) ** 2
    expo = np.log1p(sh2) + r0 * r0 * sh2
    cos_b = np.sqrt(-np.expm1(-expo))
    r = r0 * np.cosh(u)
    return np.exp(0.5 * r * r - expo) / (cos_b * (1.0 + cos_b)) * r0 * np.sinh(u)


def _apex_quadrature(integrand, rho: float, r0: float) -> float:
    """Integrate ``integrand(u, r0)`` over ``r = r0 cosh u`` from the apex out to ``rho``."""
    if not r0 > 0.0:
        raise GeodesicError(f"apex radius must be positive, got {r0!r}")
    if rho <= r0:
        return 0.0
    r_cut = math.sqrt(r0 * r0 + _CUT_EXCESS)
    upper = math.acosh(min(rho, r_cut) / r0)
    panel = 0.5 / math.sqrt(1.0 + r0 * r0)
    n_panels = max(1, math.ceil(upper / panel))
    half = 0.5 * upper / n_panels
    u = ((2.0 * np.arange(n_panels) + 1.0)[:, None] + _GL_NODES[None, :]).ravel() * half
    return half * float(np.dot(np.tile(_GL_WEIGHTS, n_panels), integrand(u, r0)))


def apex_offset(rho: float, r0: float) -> float:
    """Angle swept by the apex-``r0`` geodesic between its apex and radius ``rho``.

    ``rho = inf`` gives the half-width. Substituting ``r = r0 cosh u`` removes
    the inverse square-root singularity at the apex.
    """
    return _apex_quadrature(_theta_integrand, rho, r0)


def radial_length(x: float) -> float:
    """g-length of the straight segment from the origin to radius ``x`` (odd in ``x``)."""
    return SQRT2 * math.exp(0.5 * x * x) * float(dawsn(x / SQRT2))


def length_from_apex(rho: float, r0: float) -> float:
    """g-length of the apex-``r0`` geodesic between its apex and radius ``rho``.

    For ``rho = inf`` the divergent radial part is dropped, i.e. the value is
    the limit of that length minus :func:`radial_length` ``(R)`` as ``R`` grows.
    """
    excess = _apex_quadrature(_excess_integrand, rho, r0)
    if math.isinf(rho):
        return excess - radial_length(r0)
    return radial_length(rho) - radial_length(r0) + excess


def half_width_quadrature(r0: float) -> float:
    return apex_offset(math.inf, r0)


def width_quadrature(r0: float) -> float:
    """Width ``b - a`` from the Clairaut integral (independent of the shooting path)."""
    return 2.0 * half_width_quadrature(r0)


@lru_cache(maxsize=None)
def verify_width_monotone(lo: float = 1e-6, hi: float = 100.0, n: int = 200) -> None:
    """Raise unless the width strictly decreases on a geometric grid of apex radii.

    Inverting the width relies on this, so a violation is a hard error rather
    than something to work around.
    """
    radii = np.geomspace(lo, hi, n)
    w = np.array([width_quadrature(r) for r in radii])
    bad = np.flatnonzero(np.diff(w) >= 0.0)
    if bad.size:
        i = int(bad[0])
        raise GeodesicError(f"width is not decreasing between r0={radii[i]:.6g} and r0={radii[i + 1]:.6g}")


def clairaut_constant(r: float, dr: float) -> float:
    """Normalised first integral ``log(r^2 exp(r^2/2) / sigma)``; equals ``log r0 + r0^2/2``."""
    return 2.0 * math.log(r) + 0.5 * r * r - math.log(math.hypot(r, dr))


# -- shooting ---------------------------------------------------------------


def _phase1_rhs(_theta: float, y: tuple) -> tuple:
    r, dr = y
    return (dr, rpp(r, dr))


def _graph_rhs(x: float, y: tuple) -> tuple:
    # height over the apex tangent line as a function of the distance along it
    f, df = y
    return (df, (1.0 + df * df) * (f - x * df))


def _graph_to_polar(x, f, df, side: int):
    """``(eta, r, r')`` of graph points; ``x >= 0`` is the distance from the apex."""
    r = np.hypot(x, f)
    return side * np.arctan2(x, f), r, side * (x + f * df) * r / (f - x * df)


def _phase2_rhs_factory(side: int):
    # unknowns (offset, chi) with psi = side * exp(chi); log |psi| is nearly polynomial in s
    def rhs(s: float, y: tuple) -> tuple:
        e = math.exp(y[1])
        return (side * e, -(1.0 + e * e) * (1.0 + math.exp(2.0 * s)))
    return rhs


_PHASE2 = {1: _phase2_rhs_factory(1), -1: _phase2_rhs_factory(-1)}


def _bound_from_psi(r: float, psi: float) -> float:
    # v = 1/psi satisfies v' >= (1 + v^2)(1 + R^2) beyond radius R
    return math.atan(abs(psi)) / (1.0 + r * r)


@dataclass(eq=False)
class _Branch:
    """One side of an apex arc; offsets ``eta`` are measured from the apex, sign included."""

    side: int
    eta1: np.ndarray  # phase 1: offset, r, r'
    r1: np.ndarray
    dr1: np.ndarray
    h1: np.ndarray  # accepted step sizes, len = len(eta1) - 1
    s2: np.ndarray  # phase 2: log r, offset, log|psi|
    eta2: np.ndarray
    chi2: np.ndarray
    h2: np.ndarray
    # graph phase (small apex radius only): distance along the tangent line, height, slope
    gx: np.ndarray | None = None
    gf: np.ndarray | None = None
    gdf: np.ndarray | None = None

    def graph_at(self, x: float) -> tuple[float, float]:
        """Height and slope of the graph phase at distance ``|x|`` from the apex."""
        x = abs(x)
        if x > self.gx[-1]:
            raise GeodesicError("distance beyond the graph part of the arc")
        i = int(np.searchsorted(self.gx, x, side="right")) - 1
        i = min(max(i, 0), len(self.gx) - 1)
        if x == self.gx[i]:
            return float(self.gf[i]), float(self.gdf[i])
        y, _ = rkf45_step(_graph_rhs, self.gx[i], (self.gf[i], self.gdf[i]), x - self.gx[i])
        return y

    def _graph_solve(self, g, i: int) -> tuple[float, float, float]:
        # root of g, monotone in the graph distance, between nodes i and i + 1
        j = min(i + 1, len(self.gx) - 1)
        x = float(self.gx[i])
        if i != j and g(x) != 0.0:
            x = brentq(g, x, self.gx[j], xtol=1e-300, rtol=1e-15)
        f, df = self.graph_at(x)
        eta, r, dr = _graph_to_polar(x, f, df, self.side)
        return float(eta), float(r), float(dr)

    @property
    def psi2(self) -> np.ndarray:
        return self.side * np.exp(self.chi2)

    @property
    def asymptote_offset(self) -> float:
        return float(self.eta2[-1]) if len(self.eta2) else float(self.eta1[-1])

    @property
    def r_end(self) -> float:
        return math.exp(self.s2[-1]) if len(self.s2) else float(self.r1[-1])

    def bound(self) -> float:
        if len(self.s2):
            return _bound_from_psi(math.exp(self.s2[-1]), math.exp(self.chi2[-1]))
        r, dr = self.r1[-1], self.dr1[-1]
        return math.atan(abs(r / dr)) / (1.0 + r * r) if dr else math.inf

    def states(self) -> np.ndarray:
        """``(eta, r, r')`` rows outward from the apex."""
        p1 = np.column_stack([self.eta1, self.r1, self.dr1])
        if len(self.s2) <= 1:
            return p1
        r2 = np.exp(self.s2[1:])
        p2 = np.column_stack([self.eta2[1:], r2, r2 / self.psi2[1:]])
        return np.vstack([p1, p2])

    def state_at_offset(self, eta: float) -> tuple[float, float]:
        """``(r, r')`` at signed offset ``eta`` on this side."""
        x = abs(eta)
        e1 = np.abs(self.eta1)
        if x <= e1[-1] or len(self.s2) <= 1:
            i = int(np.searchsorted(e1, x, side="right")) - 1
            i = min(max(i, 0), len(e1) - 1)
            h = self.side * (x - e1[i])
            if h == 0.0:
                return float(self.r1[i]), float(self.dr1[i])
            if self.gx is not None:
                if x > e1[-1]:
                    raise GeodesicError("offset beyond the integrated part of the arc")
                return self._graph_solve(lambda u: math.atan2(u, self.graph_at(u)[0]) - x, i)[1:]
            y, _ = rkf45_step(_phase1_rhs, 0.0, (self.r1[i], self.dr1[i]), h)
            return y
        e2 = np.abs(self.eta2)
        if x >= e2[-1]:
            raise GeodesicError("offset beyond the integrated part of the arc")
        i = int(np.searchsorted(e2, x, side="right")) - 1
        i = min(max(i, 0), len(e2) - 2)
        rhs = _PHASE2[self.side]
        s0, y0 = self.s2[i], (self.eta2[i], self.chi2[i])
        s = s0
        for _ in range(30):
            if s == s0:
                th, chi = y0
            else:
                (th, chi), _ = rkf45_step(rhs, s0, y0, s - s0)
            ds = (eta - th) / (self.side * math.exp(chi))
            s = min(max(s + ds, s0), self.s2[i + 1])
            if abs(ds) < 1e-15 * (1.0 + abs(s)):
                break
        (th, chi), _ = rkf45_step(rhs, s0, y0, s - s0)
        r = math.exp(s)
        return r, self.side * r * math.exp(-chi)

    def state_at_radius(self, rho: float) -> tuple[float, float, float]:
        """``(eta, r, r')`` where the branch reaches radius ``rho``."""
        if len(self.s2) > 1 and math.log(rho) >= self.s2[0]:
            s = math.log(rho)
            if s > self.s2[-1] + 1e-13:
                raise GeodesicError("radius beyond the integrated part of the arc")
            s = min(s, self.s2[-1])
            i = int(np.searchsorted(self.s2, s, side="right")) - 1
            i = min(max(i, 0), len(self.s2) - 1)
            if s == self.s2[i]:
                th, chi = self.eta2[i], self.chi2[i]
            else:
                (th, chi), _ = rkf45_step(_PHASE2[self.side], self.s2[i], (self.eta2[i], self.chi2[i]),
                                          s - self.s2[i])
            return th, rho, self.side * rho * math.exp(-chi)
        i = int(np.searchsorted(self.r1, rho, side="right")) - 1
        i = min(max(i, 0), len(self.r1) - 1)
        if self.gx is not None:
            return self._graph_solve(lambda u: math.hypot(u, self.graph_at(u)[0]) - rho, i)
        x = abs(self.eta1[i])
        r, dr = self.r1[i], self.dr1[i]
        for _ in range(50):
            if dr == 0.0:
                # at the apex r is quadratic in the offset
                step = math.sqrt(max(2.0 * (rho - r) / rpp(r, 0.0), 0.0))
            else:
                step = (rho - r) / abs(dr)
            x += step
            r, dr = self.state_at_offset(self.side * x)
            if abs(rho - r) <= 1e-14 * rho:
                break
        return self.side * x, r, dr


def _shoot_branch(r0: float, side: int, *, rtol: float, asymptote_tol: float, r_max: float,
                  h0: float | None = None) -> _Branch:
    if h0 is None:
        h0 = min(1e-2, 0.1 / (1.0 + r0 * r0))
    graph = None
    if r0 < GRAPH_R0:
        # the ODE is even in x, so one sweep over x >= 0 serves either side
        trg = integrate_adaptive(
            _graph_rhs, 0.0, (r0, 0.0), stop=lambda x, y: math.hypot(x, y[0]) >= GRAPH_RADIUS,
            rtol=rtol, atol=ATOL * r0, h0=h0,
        )
        yg = np.array(trg.y)
        graph = np.array(trg.t), yg[:, 0], yg[:, 1]
        eta, r, dr = _graph_to_polar(*graph, side)
        tr1 = Trajectory(list(eta), list(zip(r, dr)), list(np.diff(eta)))
    else:
        tr1 = integrate_adaptive(
            _phase1_rhs, 0.0, (r0, 0.0), direction=side,
            stop=lambda t, y: abs(y[1]) >= y[0], rtol=rtol, atol=ATOL * r0, h0=h0,
        )
    eta_sw = tr1.t[-1]
    r_sw, dr_sw = tr1.y[-1]
    s_sw = math.log(r_sw)
    chi_sw = math.log(abs(r_sw / dr_sw))
    s_target = math.log(r_max) if r_max > r_sw else None

    def done(s, y):
        return _bound_from_psi(math.exp(s), math.exp(y[1])) <= asymptote_tol and (
            s_target is None or s >= s_target)

    if done(s_sw, (eta_sw, chi_sw)):
        tr2 = Trajectory([s_sw], [(eta_sw, chi_sw)])
    else:
        # absolute control on chi is relative control on psi
        tr2 = integrate_adaptive(
            _PHASE2[side], s_sw, (eta_sw, chi_sw), stop=done, rtol=0.0, atol=rtol, h0=0.01,
            hmax=0.25,
        )
    y1 = np.array(tr1.y)
    y2 = np.array(tr2.y)
    return _Branch(
        side=side,
        eta1=np.array(tr1.t), r1=y1[:, 0], dr1=y1[:, 1], h1=np.array(tr1.steps),
        s2=np.array(tr2.t), eta2=y2[:, 0], chi2=y2[:, 1], h2=np.array(tr2.steps),
        **(dict(zip(("gx", "gf", "gdf"), graph)) if graph else {}),
    )


def _fd_derivative(f, x: float, h: float) -> float:
    """Fourth-order finite difference, one-sided where ``f`` is undefined on one side."""
    try:
        return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)
    except GeodesicError:
        pass
    try:
        vals = [f(x - j * h) for j in range(5)]
        sign = -1.0
    except GeodesicError:
        vals = [f(x + j * h) for j in range(5)]
        sign = 1.0
    return sign * (-25 * vals[0] + 48 * vals[1] - 36 * vals[2] + 16 * vals[3] - 3 * vals[4]) / (12 * h)


# -- arcs ------------------------------------------------------------------


@dataclass(eq=False)
class GeodesicArc:
    """A piece of a geodesic of ``g`` (or of its dilate by ``scale``).

    ``kind`` is ``"origin_line"`` (a line through 0 with direction ``theta0``;
    samples are signed positions ``s`` along it) or ``"graph_arc"`` (samples are
    polar graph states ``theta, r, dr``). ``span`` holds the parameter range of
    the piece: angles for graph arcs, signed positions for lines. An infinite
    end means the piece runs out to the ideal boundary.
    """

    kind: str
    theta0: float
    r0: float = 0.0
    a: float = math.nan
    b: float = math.nan
    theta: np.ndarray | None = None
    r: np.ndarray | None = None
    dr: np.ndarray | None = None
    s: np.ndarray | None = None
    span: tuple[float, float] = (-math.inf, math.inf)
    scale: float = 1.0
    _branches: tuple | None = field(default=None, repr=False)

    # construction helpers

    @classmethod
    def origin_line(cls, theta0: float, span=(-math.inf, math.inf), extent: float = 6.0,
                    spacing: float = 0.05) -> "GeodesicArc":
        lo = max(span[0], -extent)
        hi = min(span[1], extent)
        if math.isfinite(span[0]) and math.isfinite(span[1]):
            lo, hi = span
        n = max(2, int(math.ceil(abs(hi - lo) / spacing)) + 1)
        s = np.linspace(lo, hi, n)
        return cls("origin_line", theta0, 0.0, theta0 + math.pi, theta0, s=s, span=tuple(span))

    @property
    def is_line(self) -> bool:
        return self.kind == "origin_line"

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.theta0), math.sin(self.theta0)])

    @property
    def width(self) -> float:
        return self.b - self.a

    def points(self) -> np.ndarray:
        if self.is_line:
            return self.scale * self.s[:, None] * self.direction[None, :]
        return self.scale * np.column_stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)])

    def states(self) -> list[PolarGraphState]:
        """Polar states at the samples, in the dilated frame."""
        if self.is_line:
            raise GeodesicError("origin lines are not polar graphs")
        lam = self.scale
        return [PolarGraphState(float(t), lam * float(r), lam * float(d))
                for t, r, d in zip(self.theta, self.r, self.dr)]

    def scaled(self, lam: float) -> "GeodesicArc":
        return replace(self, scale=self.scale * lam)

    def state_at(self, theta: float) -> PolarGraphState:
        """Exact (integrator-accurate) state at angle ``theta`` of an undilated graph arc."""
        if self.is_line or self._branches is None:
            raise GeodesicError("dense evaluation needs a shot graph arc")
        eta = theta - self.theta0
        br = self._branches[1] if eta >= 0 else self._branches[0]
        r, dr = br.state_at_offset(eta)
        return PolarGraphState(theta, r, dr)

    def r_at(self, theta: float) -> float:
        return self.state_at(theta).r

    def tangent_at(self, param: float) -> np.ndarray:
        """Unit tangent in the direction of increasing parameter."""
        if self.is_line:
            return self.direction
        return graph_tangent(self.state_at(param))

    def position_at(self, param: float) -> np.ndarray:
        if self.is_line:
            return self.scale * param * self.direction
        st = self.state_at(param)
        return self.scale * st.r * np.array([math.cos(param), math.sin(param)])

    def endpoint_state(self, theta: float, rho: float | None = None) -> PolarGraphState:
        """State at an endpoint known by angle and, optionally, radius.

        Far from the apex ``r(theta)`` is extremely steep, so there the radius
        pins the point down and the angle is read off the arc instead.
        """
        br = self._branches[1] if theta >= self.theta0 else self._branches[0]
        try:
            st = self.state_at(theta)
        except GeodesicError:
            # beyond r ~ 6 the angle is constant to rounding and may land past the integrated end
            if rho is None:
                raise
            eta, r, dr = br.state_at_radius(rho)
            return PolarGraphState(self.theta0 + eta, r, dr)
        if rho is None or abs(st.dr) <= st.r:
            return st
        eta, r, dr = br.state_at_radius(rho)
        return PolarGraphState(self.theta0 + eta, r, dr)

    def dense_points(self, max_gap: float = 0.002, r_max: float = math.inf) -> np.ndarray:
        """Points along the arc no more than about ``max_gap`` apart, clipped to ``r <= r_max``.

        Between samples the arc is filled in by cubic Hermite interpolation,
        of ``r(theta)`` near the apex and of ``theta(log r)`` where the graph is
        steep, so the added points carry the integrator's accuracy up to a
        fourth-order interpolation error.
        """
        lam = self.scale
        if self.is_line:
            lo, hi = self.s[0], self.s[-1]
            lim = r_max / lam
            lo, hi = max(lo, -lim), min(hi, lim)
            n = max(2, int(math.ceil((hi - lo) / (max_gap / lam))) + 1)
            s = np.linspace(lo, hi, n)
            return lam * s[:, None] * self.direction[None, :]
        out = []
        th, r, dr = self.theta, self.r, self.dr
        for i in range(len(th) - 1):
            p0 = r[i] * np.array([math.cos(th[i]), math.sin(th[i])])
            p1 = r[i + 1] * np.array([math.cos(th[i + 1]), math.sin(th[i + 1])])
            n = max(1, int(math.ceil(lam * np.hypot(*(p1 - p0)) / max_gap)))
            t = np.arange(n) / n
            h00, h10 = 2 * t ** 3 - 3 * t ** 2 + 1, t ** 3 - 2 * t ** 2 + t
            h01, h11 = -2 * t ** 3 + 3 * t ** 2, t ** 3 - t ** 2
            steep = min(abs(dr[i]) / r[i], abs(dr[i + 1]) / r[i + 1]) > 0.5 and dr[i] * dr[i + 1] > 0
            if steep:
                s0, s1 = math.log(r[i]), math.log(r[i + 1])
                ds = s1 - s0
                tt = h00 * th[i] + h10 * ds * r[i] / dr[i] + h01 * th[i + 1] + h11 * ds * r[i + 1] / dr[i + 1]
                rr = np.exp(s0 + t * ds)
            else:
                dth = th[i + 1] - th[i]
                tt = th[i] + t * dth
                rr = h00 * r[i] + h10 * dth * dr[i] + h01 * r[i + 1] + h11 * dth * dr[i + 1]
            out.append(np.column_stack([rr * np.cos(tt), rr * np.sin(tt)]))
        out.append(np.array([[r[-1] * math.cos(th[-1]), r[-1] * math.sin(th[-1])]]))
        pts = lam * np.concatenate(out)
        keep = np.hypot(pts[:, 0], pts[:, 1]) <= r_max
        if keep.all() or not keep.any() or self._branches is None:
            return pts[keep]
        # end exactly on the clipping circle
        ends = []
        for branch, clipped in ((self._branches[0], not keep[0]), (self._branches[1], not keep[-1])):
            if clipped:
                eta, rho, _ = branch.state_at_radius(r_max / lam)
                ends.append(r_max * np.array([[math.cos(self.theta0 + eta), math.sin(self.theta0 + eta)]]))
            else:
                ends.append(np.empty((0, 2)))
        return np.concatenate([ends[0], pts[keep], ends[1]])

    def truncated(self, lo: float, hi: float, rho_lo: float | None = None,
                  rho_hi: float | None = None) -> "GeodesicArc":
        """Sub-arc over parameter range ``[lo, hi]`` (either may be infinite)."""
        if lo > hi:
            raise ValueError("empty parameter range")
        if self.is_line:
            return GeodesicArc.origin_line(self.theta0, (lo, hi))
        st_lo = self.endpoint_state(lo, rho_lo) if math.isfinite(lo) else None
        st_hi = self.endpoint_state(hi, rho_hi) if math.isfinite(hi) else None
        # an open end keeps every sample: far out the angle equals the asymptote to rounding
        lo_in = st_lo.theta if st_lo else -math.inf
        hi_in = st_hi.theta if st_hi else math.inf
        mask = (self.theta > lo_in) & (self.theta < hi_in)
        th = [self.theta[mask]]
        rr = [self.r[mask]]
        dd = [self.dr[mask]]
        if st_lo:
            th.insert(0, [st_lo.theta]); rr.insert(0, [st_lo.r]); dd.insert(0, [st_lo.dr])
        if st_hi:
            th.append([st_hi.theta]); rr.append([st_hi.r]); dd.append([st_hi.dr])
        span = (st_lo.theta if st_lo else -math.inf, st_hi.theta if st_hi else math.inf)
        return replace(self, theta=np.concatenate(th), r=np.concatenate(rr),
                       dr=np.concatenate(dd), span=span)

    # verification

    def soliton_residuals(self, time: float | None = None, *, flipped: bool = False) -> np.ndarray:
        """``|kappa - F.nu / (2t)|`` at every sample, ``t`` defaulting to ``scale^2 / 2``.

        The curvature is measured from the integrated curve itself by
        fourth-order finite differences of the dense output, not taken from
        the equation being checked: near the apex from ``v = r'/r`` as a
        function of the angle (or, for a small apex radius, from the height
        over the apex tangent line), on the steep part from ``log|r / r'|`` as
        a function of ``log r``. Lines through the origin have zero residual.
        With ``flipped`` the normal is reversed, which detects a curve that
        solves the equation only under the opposite orientation convention.
        """
        lam = self.scale
        t = 0.5 * lam * lam if time is None else time
        if self.is_line:
            return np.zeros(len(self.s))
        out = np.empty(len(self.theta))
        for i, (th, r, dr) in enumerate(zip(self.theta, self.r, self.dr)):
            sigma = math.hypot(r, dr)
            kappa = self._measured_curvature(th, r, dr)
            # kappa scales like 1/lam and F.nu like lam under dilation
            drift = lam * r * r / sigma / (2.0 * t)
            out[i] = abs(kappa / lam - drift) if flipped else abs(kappa / lam + drift)
        return out

    def _measured_curvature(self, th: float, r: float, dr: float) -> float:
        if self._branches is None:
            raise GeodesicError("curvature measurement needs a shot graph arc")
        sigma = math.hypot(r, dr)
        h = FD_STEP / (1.0 + r * r)
        br = self._branches[1] if th >= self.theta0 else self._branches[0]
        x = r * abs(math.sin(th - self.theta0))
        if br.gx is not None and x + 2 * GRAPH_FD_STEP <= br.gx[-1]:
            # graph phase; the height is even in x, so the stencil may cross the apex
            f = [br.graph_at(x + j * GRAPH_FD_STEP)[0] for j in (-2, -1, 0, 1, 2)]
            d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * GRAPH_FD_STEP ** 2)
            df = br.graph_at(x)[1]
            return -d2 / (1.0 + df * df) ** 1.5
        if abs(dr) <= r:
            def v(x):
                st = self.state_at(x)
                return st.dr / st.r
            vv = dr / r
            deriv = _fd_derivative(v, th, h) / (1.0 + vv * vv)
        else:
            def chi(x):
                _, rr, dd = br.state_at_radius(math.exp(x))
                return math.log(abs(rr / dd))
            psi = r / dr
            deriv = -_fd_derivative(chi, math.log(r), h) / (1.0 + psi * psi)
        return (1.0 - deriv) / sigma

    def clairaut_drift(self) -> float:
        """Max relative deviation of the Clairaut integral from its apex value."""
        if self.is_line:
            return 0.0
        ref = math.log(self.r0) + 0.5 * self.r0 ** 2
        return max(abs(clairaut_constant(r, d) - ref) for r, d in zip(self.r, self.dr))


def shoot_from_apex(theta0: float, r0: float, *, rtol: float = RTOL,
                    asymptote_tol: float = ASYMPTOTE_TOL, r_max: float = 0.0) -> GeodesicArc:
    """Integrate the polar graph equation both ways from the apex ``(theta0, r0)``.

    Integration on each side stops once the asymptote error bound falls below
    ``asymptote_tol`` and, if given, the radius has reached ``r_max``.
    """
    if not r0 > 0.0 or not math.isfinite(r0):
        raise GeodesicError(f"apex radius must be positive and finite, got {r0!r}")
    try:
        lo = _shoot_branch(r0, -1, rtol=rtol, asymptote_tol=asymptote_tol, r_max=r_max)
        hi = _shoot_branch(r0, +1, rtol=rtol, asymptote_tol=asymptote_tol, r_max=r_max)
    except IntegrationError as exc:
        raise GeodesicError(f"integration failed for apex r0={r0!r}: {exc}") from exc
    s_lo, s_hi = lo.states(), hi.states()
    rows = np.vstack([s_lo[:0:-1], s_hi])
    return GeodesicArc(
        "graph_arc", theta0, r0,
        a=theta0 + lo.asymptote_offset, b=theta0 + hi.asymptote_offset,
        theta=theta0 + rows[:, 0], r=rows[:, 1], dr=rows[:, 2],
        _branches=(lo, hi),
    )


def width(r0: float, *, rtol: float = RTOL, asymptote_tol: float = ASYMPTOTE_TOL) -> float:
    """Width ``b - a`` of the maximal geodesic with apex radius ``r0``, by shooting.

    Only one side is integrated since the arc is symmetric about its apex.
    """
    if not r0 > 0.0:
        raise GeodesicError(f"apex radius must be positive, got {r0!r}")
    try:
        br = _shoot_branch(r0, +1, rtol=rtol, asymptote_tol=asymptote_tol, r_max=0.0)
    except IntegrationError as exc:
        raise GeodesicError(f"integration failed for apex r0={r0!r}: {exc}") from exc
    return 2.0 * br.asymptote_offset


def asymptote_error_bound(arc: GeodesicArc, R: float) -> float:
    """Upper bound on the asymptote error if integration stops at radius ``R``.

    Beyond radius ``R`` the ratio ``v = r'/r`` obeys ``v' >= (1 + v^2)(1 + R^2)``,
    so ``arctan v`` reaches ``pi/2`` within ``arctan(r/r') / (1 + R^2)`` more
    radians. The maximum over both sides is returned.
    """
    if arc.is_line:
        return 0.0
    if not R > arc.r0:
        raise GeodesicError(f"bound needs R > r0 = {arc.r0}, got {R}")
    branches = arc._branches
    if branches is None or min(b.r_end for b in branches) < R:
        branches = shoot_from_apex(arc.theta0, arc.r0, r_max=R)._branches
    out = 0.0
    for br in branches:
        _eta, r, dr = br.state_at_radius(R)
        out = max(out, math.atan(abs(r / dr)) / (1.0 + r * r))
    return out


# -- boundary value problems ---------------------------------------------


@dataclass(frozen=True)
class BoundarySpec:
    endpoint1: PlanePoint | IdealPoint
    endpoint2: PlanePoint | IdealPoint

    def __post_init__(self):
        p, q = self.endpoint1, self.endpoint2
        if isinstance(p, IdealPoint) and isinstance(q, IdealPoint):
            same = abs(angle_diff(p.angle, q.angle)) < 1e-15
        elif isinstance(p, PlanePoint) and isinstance(q, PlanePoint):
            same = math.hypot(p.x - q.x, p.y - q.y) < 1e-15
        else:
            same = False
        if same:
            raise GeodesicError("boundary endpoints coincide")


@dataclass(frozen=True)
class Connection:
    """Solution of a two-point problem in apex coordinates.

    For ``origin_line`` the parameters are signed positions along direction
    ``theta0``; for ``graph_arc`` they are absolute angles on the apex-``r0`` arc.
    ``tangent1`` / ``tangent2`` are unit tangents at each end pointing into the
    arc (``None`` at an ideal end).
    """

    kind: str
    theta0: float
    r0: float
    param1: float
    param2: float
    tangent1: np.ndarray | None
    tangent2: np.ndarray | None
    rho1: float | None = None
    rho2: float | None = None


def _polar(p: PlanePoint) -> tuple[float, float]:
    return math.hypot(p.x, p.y), math.atan2(p.y, p.x)


def _find_r0(func, upper: float, what: str) -> float:
    """Root of ``func`` on ``(0, upper]`` with ``func(0+) > 0 > func(upper)`` or the reverse."""
    f_hi = func(upper)
    lo = upper * 1e-3
    table = [(upper, f_hi)]
    f_lo = func(lo)
    table.append((lo, f_lo))
    while f_lo * f_hi > 0.0:
        if lo < 1e-300:
            raise BracketError(f"no sign change bracketing the apex radius ({what})", table)
        lo *= 1e-4
        f_lo = func(lo)
        table.append((lo, f_lo))
    if f_lo == 0.0:
        return lo
    return brentq(func, lo, upper, xtol=1e-300, rtol=1e-15, maxiter=200)


def _tangent(rho: float, theta: float, r0: float, outward: bool, ccw: bool) -> np.ndarray:
    # sin(beta) = r0 exp(r0^2/2) / (rho exp(rho^2/2)), beta measured from the radial direction
    lg = math.log(r0 / rho) + 0.5 * (r0 * r0 - rho * rho)
    sin_b = math.exp(lg)
    cos_b = math.sqrt(max(-math.expm1(lg) * (1.0 + sin_b), 0.0))
    rad = cos_b if outward else -cos_b
    ang = sin_b if ccw else -sin_b
    c, s = math.cos(theta), math.sin(theta)
    return np.array([rad * c - ang * s, rad * s + ang * c])


def solve_connection(p, q) -> Connection:
    """Apex data of the unique geodesic joining ``p`` and ``q`` (points of the closed ball)."""
    if isinstance(p, IdealPoint) and isinstance(q, PlanePoint):
        c = solve_connection(q, p)
        return Connection(c.kind, c.theta0, c.r0, c.param2, c.param1, c.tangent2, c.tangent1,
                          c.rho2, c.rho1)
    if isinstance(p, IdealPoint):
        return _connect_ideal_ideal(p.angle, q.angle)
    rho1, th1 = _polar(p)
    if isinstance(q, IdealPoint):
        return _connect_point_ideal(rho1, th1, q.angle)
    rho2, th2 = _polar(q)
    return _connect_point_point(rho1, th1, rho2, th2)


def _connect_ideal_ideal(alpha: float, beta: float) -> Connection:
    gap = (beta - alpha) % TWO_PI
    if gap == 0.0:
        raise GeodesicError("ideal endpoints coincide")
    if abs(gap - math.pi) < 1e-15:
        return Connection("origin_line", alpha, 0.0, math.inf, -math.inf, None, None)
    if gap < math.pi:
        start, delta, ccw = alpha, gap, True
    else:
        start, delta, ccw = beta, TWO_PI - gap, False
    r0 = apex_radius_for_width(delta)
    theta0 = start + 0.5 * delta
    if ccw:
        return Connection("graph_arc", theta0, r0, -math.inf, math.inf, None, None)
    return Connection("graph_arc", theta0, r0, math.inf, -math.inf, None, None)


def apex_radius_for_width(delta: float) -> float:
    """Apex radius of the maximal geodesic of width ``delta`` in ``(0, pi)``."""
    if not 0.0 < delta < math.pi:
        raise GeodesicError(f"width must lie in (0, pi), got {delta!r}")
    verify_width_monotone()
    hi = 1.0
    table = []
    while width_quadrature(hi) > delta:
        table.append((hi, width_quadrature(hi)))
        hi *= 2.0
        if hi > 1e8:
            raise BracketError("width never drops below the target", table)
    return _find_r0(lambda r0: width_quadrature(r0) - delta, hi, f"width={delta!r}")


def _connect_point_ideal(rho: float, th: float, phi: float) -> Connection:
    if rho == 0.0:
        u = np.array([math.cos(phi), math.sin(phi)])
        return Connection("origin_line", phi, 0.0, 0.0, math.inf, u, None)
    d = angle_diff(phi, th)
    delta = abs(d)
    if rho * abs(math.sin(d)) < NEAR_ORIGIN:
        u = np.array([math.cos(phi), math.sin(phi)])
        return Connection("origin_line", phi, 0.0, rho * math.cos(d), math.inf, u, None)
    if delta < 1e-15:
        u = np.array([math.cos(th), math.sin(th)])
        return Connection("origin_line", th, 0.0, rho, math.inf, u, None)
    if abs(delta - math.pi) < 1e-15:
        u = np.array([math.cos(th), math.sin(th)])
        return Connection("origin_line", th, 0.0, rho, -math.inf, -u, None)
    sgn = 1.0 if d > 0 else -1.0
    h_at = half_width_quadrature(rho)
    if delta < h_at:
        # the point lies between the apex and the ideal end
        r0 = _find_r0(lambda x: half_width_quadrature(x) - apex_offset(rho, x) - delta, rho, "point-ideal")
        off = apex_offset(rho, r0)
        theta0 = th - sgn * off
        outward = True
    else:
        r0 = _find_r0(lambda x: half_width_quadrature(x) + apex_offset(rho, x) - delta, rho, "point-ideal")
        off = apex_offset(rho, r0)
        theta0 = th + sgn * off
        outward = False
    t1 = _tangent(rho, th, r0, outward, sgn > 0)
    return Connection("graph_arc", theta0, r0, th, sgn * math.inf, t1, None, rho, None)


def _connect_point_point(rho1: float, th1: float, rho2: float, th2: float) -> Connection:
    if rho1 == 0.0 or rho2 == 0.0:
        far_rho, far_th = (rho2, th2) if rho1 == 0.0 else (rho1, th1)
        u = np.array([math.cos(far_th), math.sin(far_th)])
        if rho1 == 0.0:
            return Connection("origin_line", far_th, 0.0, 0.0, rho2, u, -u)
        return Connection("origin_line", far_th, 0.0, rho1, 0.0, -u, u)
    d = angle_diff(th2, th1)
    delta = abs(d)
    chord = np.array([rho2 * math.cos(th2) - rho1 * math.cos(th1), rho2 * math.sin(th2) - rho1 * math.sin(th1)])
    u = chord / math.hypot(*chord)
    p1 = rho1 * np.array([math.cos(th1), math.sin(th1)])
    p2 = p1 + chord
    if abs(p1[0] * u[1] - p1[1] * u[0]) < NEAR_ORIGIN and p1 @ u < 0.0 < p2 @ u:
        return Connection("origin_line", math.atan2(u[1], u[0]), 0.0, float(p1 @ u), float(p2 @ u), u, -u)
    if delta < 1e-15:
        u = np.array([math.cos(th1), math.sin(th1)])
        sg = 1.0 if rho2 > rho1 else -1.0
        return Connection("origin_line", th1, 0.0, rho1, rho2, sg * u, -sg * u)
    if abs(delta - math.pi) < 1e-15:
        u = np.array([math.cos(th1), math.sin(th1)])
        return Connection("origin_line", th1, 0.0, rho1, -rho2, -u, u)
    sgn = 1.0 if d > 0 else -1.0
    m, big = min(rho1, rho2), max(rho1, rho2)
    at_min = apex_offset(big, m)
    if delta < at_min:
        r0 = _find_r0(lambda x: abs(apex_offset(rho1, x) - apex_offset(rho2, x)) - delta, m, "point-point")
        through = False
    else:
        r0 = _find_r0(lambda x: apex_offset(rho1, x) + apex_offset(rho2, x) - delta, m, "point-point")
        through = True
    o1 = apex_offset(rho1, r0)
    if through:
        theta0 = th1 + sgn * o1
        out1, out2 = False, False
    elif rho1 <= rho2:
        theta0 = th1 - sgn * o1
        out1, out2 = True, False
    else:
        theta0 = th1 + sgn * o1
        out1, out2 = False, True
    p2 = th1 + d
    t1 = _tangent(rho1, th1, r0, out1, sgn > 0)
    t2 = _tangent(rho2, th2, r0, out2, sgn < 0)
    return Connection("graph_arc", theta0, r0, th1, p2, t1, t2, rho1, rho2)


def connection_tangents(p, q) -> tuple[np.ndarray | None, np.ndarray | None]:
    c = solve_connection(p, q)
    return c.tangent1, c.tangent2


def connection_length(c: Connection) -> float:
    """g-length of a connection; every ideal end contributes its renormalised length.

    An ideal end is accounted as in :func:`length_from_apex`: the radial length
    out to ``R`` is subtracted before letting ``R`` grow, so a network with ``k``
    ideal ends gets the finite limit of ``L(B_R) - k * radial_length(R)``.
    """
    ends = [(c.param1, c.rho1), (c.param2, c.rho2)]
    if c.kind == "origin_line":
        vals = [0.0 if math.isinf(p) else radial_length(p) for p, _ in ends]
        signs = [math.copysign(1.0, p) if math.isinf(p) else 0.0 for p, _ in ends]
        if signs[0] and signs[1]:
            return 0.0
        if signs[0] or signs[1]:
            sg = signs[0] or signs[1]
            finite = vals[1] if signs[0] else vals[0]
            return -sg * finite
        return abs(vals[1] - vals[0])
    pieces = []
    for param, rho in ends:
        side = math.copysign(1.0, param - c.theta0)
        radius = math.inf if math.isinf(param) else rho
        pieces.append((side, radius))
    (s1, a1), (s2, a2) = pieces
    l1, l2 = length_from_apex(a1, c.r0), length_from_apex(a2, c.r0)
    if s1 != s2:
        return l1 + l2
    return abs(l1 - l2) if not (math.isinf(a1) or math.isinf(a2)) else (l1 - l2 if math.isinf(a1) else l2 - l1)


def connect(spec: BoundarySpec, *, r_max: float = 0.0) -> GeodesicArc:
    """The unique geodesic through or terminating at the two endpoints of ``spec``.

    The returned arc's span runs from ``endpoint1`` to ``endpoint2``; for graph
    arcs the span may therefore be decreasing (``span[0] > span[1]``), in which
    case it is stored sorted and ``reversed`` orientation is implied by
    comparing with the endpoints.
    """
    c = solve_connection(spec.endpoint1, spec.endpoint2)
    return arc_from_connection(c, r_max=r_max)


def arc_from_connection(c: Connection, *, r_max: float = 0.0) -> GeodesicArc:
    if c.kind == "origin_line":
        lo, hi = sorted((c.param1, c.param2))
        extent = max(6.0, r_max)
        return GeodesicArc.origin_line(c.theta0, (lo, hi), extent=extent)
    # a nearly radial arc meets its asymptote tolerance early; it must still reach its endpoints
    reach = max([r_max] + [1.01 * rho for rho in (c.rho1, c.rho2) if rho is not None])
    full = shoot_from_apex(c.theta0, c.r0, r_max=reach)
    (lo, rho_lo), (hi, rho_hi) = sorted([(c.param1, c.rho1), (c.param2, c.rho2)],
                                        key=lambda e: e[0])
    return full.truncated(lo, hi, rho_lo, rho_hi)


# -- independent shooting oracle ----------------------------------------------


def shoot_direction(p: PlanePoint, direction: float, *, r_stop: float = 6.0,
                    rtol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Integrate the geodesic system from ``p`` with initial Euclidean direction angle.

    Uses the polar geodesic equations reparametrised by Euclidean arclength and
    returns ``(polar angle where r reaches r_stop, sampled points)``. Independent
    of the apex shooting and of the Clairaut quadrature.
    """
    rho, th = _polar(p)
    if rho == 0.0:
        raise GeodesicError("polar geodesic system is singular at the origin")
    c, s = math.cos(direction - th), math.sin(direction - th)

    def rhs(_t, y):
        r, theta, rd, td = y
        ra, ta = geodesic_rhs_euclidean(r, theta, rd, td)
        return (rd, td, ra, ta)

    tr = integrate_adaptive(rhs, 0.0, (rho, th, c, s / rho), stop=lambda t, y: y[0] >= r_stop,
                            rtol=rtol, atol=1e-15, h0=1e-3, hmax=0.05, max_steps=400_000)
    y = np.array(tr.y)
    # land exactly on r_stop with a final partial step
    t_prev, y_prev = tr.t[-2], tuple(tr.y[-2])
    lo_h, hi_h = 0.0, tr.t[-1] - t_prev
    for _ in range(80):
        mid = 0.5 * (lo_h + hi_h)
        ym, _ = rkf45_step(rhs, t_prev, y_prev, mid)
        if ym[0] < r_stop:
            lo_h = mid
        else:
            hi_h = mid
    ym, _ = rkf45_step(rhs, t_prev, y_prev, hi_h)
    pts = np.column_stack([y[:, 0] * np.cos(y[:, 1]), y[:, 0] * np.sin(y[:, 1])])
    return ym[1], pts
