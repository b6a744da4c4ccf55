from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from oracles import apex_width_cartesian, asymptotic_angle, shoot_cartesian
from soliton_networks.geometry import IdealPoint, PlanePoint, angle_diff, g_length, polar_ode_rhs
from soliton_networks.geodesics import (
    BoundarySpec,
    GeodesicError,
    apex_radius_for_width,
    asymptote_error_bound,
    connect,
    connection_length,
    ASYMPTOTE_TOL,
    RTOL,
    half_width_quadrature,
    shoot_from_apex,
    solve_connection,
    verify_width_monotone,
    width,
    width_quadrature,
)

# -- widths ------------------------------------------------------------------------


def test_width_of_unit_apex_is_below_a_right_angle():
    assert width(1.0) < 0.5 * math.pi
    assert width(1.0) == pytest.approx(width_quadrature(1.0), abs=1e-6)


def test_small_apex_is_nearly_a_line():
    w = width(0.05)
    assert math.pi - 0.2 < w < math.pi
    assert w == pytest.approx(width(0.05, rtol=1e-12), abs=1e-7)


@pytest.mark.parametrize("r0", [0.2, 1.0, 2.5])
def test_width_matches_cartesian_shooting(r0):
    oracle = apex_width_cartesian(r0)
    assert width_quadrature(r0) == pytest.approx(oracle, abs=1e-11)
    # shooting stops once each side is within the asymptote tolerance
    assert 0.0 <= oracle - width(r0) <= 2.0 * ASYMPTOTE_TOL


def test_width_is_strictly_decreasing():
    radii = np.geomspace(1e-3, 20.0, 40)
    w = [width_quadrature(r0) for r0 in radii]
    assert all(b < a for a, b in zip(w, w[1:]))
    # so a given width has exactly one apex radius
    target = 1.3
    signs = np.sign(np.array(w) - target)
    assert np.count_nonzero(np.diff(signs)) == 1


def test_width_grid_check_passes():
    verify_width_monotone()
    verify_width_monotone(1e-3, 5.0, 1000)


def test_width_values_are_pinned_by_reintegration():
    widths = [width(r0) for r0 in (0.5, 1.0, 2.0)]
    assert widths[0] > widths[1] > widths[2]
    for r0, w in zip((0.5, 1.0, 2.0), widths):
        finer = width(r0, rtol=0.5 * RTOL, asymptote_tol=0.5 * ASYMPTOTE_TOL)
        assert w == pytest.approx(finer, abs=2.0 * ASYMPTOTE_TOL)


def test_apex_radius_inverts_width():
    for r0 in (0.01, 0.4, 3.0):
        assert apex_radius_for_width(width_quadrature(r0)) == pytest.approx(r0, rel=1e-9)
    for bad in (0.0, math.pi, 4.0):
        with pytest.raises(GeodesicError):
            apex_radius_for_width(bad)


# -- apex arcs --------------------------------------------------------------------------


def test_apex_arc_is_symmetric_and_convex():
    arc = shoot_from_apex(0.7, 0.8)
    assert abs(arc.r_at(0.7 + 0.3) - arc.r_at(0.7 - 0.3)) <= 1e-9
    assert arc.r.min() == pytest.approx(0.8, abs=1e-12)
    assert np.all(np.diff(np.sign(arc.dr)) >= 0)
    assert arc.a < 0.7 < arc.b
    assert arc.b - arc.a == pytest.approx(width_quadrature(0.8), abs=1e-6)


def test_apex_arc_rejects_bad_radius():
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(GeodesicError):
            shoot_from_apex(0.0, bad)


@pytest.mark.parametrize("r0", [1e-3, 1e-5, 1e-7])
def test_tiny_apex_solves_the_soliton_equation(r0):
    arc = shoot_from_apex(0.3, r0)
    assert arc.soliton_residuals().max() <= 1e-6
    assert arc.b - arc.a == pytest.approx(width_quadrature(r0), abs=1e-6)


@pytest.mark.parametrize("r0", [0.3, 1.5, 4.0])
def test_clairaut_integral_is_conserved(r0):
    # global error of the shooting at its default tolerance
    assert shoot_from_apex(0.0, r0).clairaut_drift() <= 1e-8


def test_asymptote_bound_decreases_with_radius():
    arc = shoot_from_apex(0.0, 1.0)
    bounds = [asymptote_error_bound(arc, R) for R in (1.5, 2.0, 3.0, 4.0, 5.0)]
    assert all(b < a for a, b in zip(bounds, bounds[1:]))
    assert bounds[-1] <= 1e-7
    with pytest.raises(GeodesicError):
        asymptote_error_bound(arc, 1.0)


def test_asymptote_bound_is_an_upper_bound():
    arc = shoot_from_apex(0.0, 1.0, r_max=2.0)
    br = arc._branches[1]
    eta, r, _dr = br.state_at_radius(2.0)
    remaining = half_width_quadrature(1.0) - eta
    assert 0.0 < remaining <= asymptote_error_bound(arc, 2.0)


# -- boundary value problems -----------------------------------------------------------


def test_antipodal_ideal_points_give_a_line():
    arc = connect(BoundarySpec(IdealPoint(0.0), IdealPoint(math.pi)))
    assert arc.kind == "origin_line"
    assert arc.soliton_residuals().max() <= 1e-12


def test_quarter_turn_ideal_pair():
    arc = connect(BoundarySpec(IdealPoint(0.0), IdealPoint(0.5 * math.pi)))
    assert arc.kind == "graph_arc"
    assert arc.theta0 == pytest.approx(0.25 * math.pi, abs=1e-14)
    assert width_quadrature(arc.r0) == pytest.approx(0.5 * math.pi, abs=1e-12)
    assert arc.soliton_residuals().max() <= 1e-6


def test_connection_is_symmetric_in_its_endpoints():
    p, q = IdealPoint(0.4), PlanePoint(-0.3, 1.1)
    c1, c2 = solve_connection(p, q), solve_connection(q, p)
    assert (c1.theta0, c1.r0) == pytest.approx((c2.theta0, c2.r0), abs=1e-14)
    assert np.allclose(c1.tangent2, c2.tangent1)


def test_point_to_ideal_matches_cartesian_shooting():
    p = PlanePoint(1.0, 0.0)
    for phi in (0.5 * math.pi, 2.0, -2.5):
        t1 = solve_connection(p, IdealPoint(phi)).tangent1
        end = asymptotic_angle((1.0, 0.0), math.atan2(t1[1], t1[0]))
        assert abs(angle_diff(end, phi)) <= 1e-8


def test_point_to_point_matches_cartesian_shooting():
    for p, q in [((1.0, 0.0), (0.0, 1.5)), ((0.5, 0.2), (-0.4, 0.6)), ((2.0, 0.5), (1.2, 1.0))]:
        t1 = solve_connection(PlanePoint(*p), PlanePoint(*q)).tangent1
        sol, _ = shoot_cartesian(p, math.atan2(t1[1], t1[0]))

        def dist(s):
            x, y = sol.sol(s)[:2]
            return math.hypot(x - q[0], y - q[1])

        grid = np.linspace(0.0, sol.t[-1], 20_001)
        i = int(np.argmin([dist(s) for s in grid]))
        best = minimize_scalar(dist, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
                               method="bounded", options={"xatol": 1e-12})
        assert best.fun <= 1e-7


def test_connection_length_matches_polyline_length():
    spec = BoundarySpec(PlanePoint(1.0, 0.0), PlanePoint(-0.5, 1.2))
    arc = connect(spec)
    pts = arc.dense_points(5e-4)
    assert np.allclose(pts[[0, -1]][np.argsort(pts[[0, -1], 0])[::-1]], [[1.0, 0.0], [-0.5, 1.2]], atol=1e-9)
    c = solve_connection(spec.endpoint1, spec.endpoint2)
    assert connection_length(c) == pytest.approx(g_length(pts), abs=1e-5)


def test_coincident_endpoints_are_rejected():
    with pytest.raises(GeodesicError):
        BoundarySpec(IdealPoint(1.0), IdealPoint(1.0))
    with pytest.raises(GeodesicError):
        BoundarySpec(PlanePoint(1.0, 2.0), PlanePoint(1.0, 2.0))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.01, 2 * math.pi - 0.01))
def test_ideal_pairs_solve_the_soliton_equation(alpha, gap):
    arc = connect(BoundarySpec(IdealPoint(alpha), IdealPoint(alpha + gap)))
    assert arc.soliton_residuals().max() <= 1e-6
    if arc.kind == "graph_arc":
        for want in (alpha, alpha + gap):
            assert min(abs(angle_diff(want, arc.a)), abs(angle_diff(want, arc.b))) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_point_ideal_arcs_solve_the_soliton_equation(rho, th, phi):
    arc = connect(BoundarySpec(PlanePoint.from_polar(rho, th), IdealPoint(phi)))
    assert arc.soliton_residuals().max() <= 1e-6


def test_opposite_normal_does_not_solve_the_equation():
    arc = shoot_from_apex(0.2, 0.7)
    assert arc.soliton_residuals().max() <= 1e-6
    # reversing the normal doubles the drift term instead of cancelling it; at the apex
    # curvature and drift both have size r0
    assert arc.soliton_residuals(flipped=True).max() == pytest.approx(2 * 0.7, rel=1e-5)


def test_nearly_radial_arc_reaches_its_interior_endpoint():
    # the point sits 6e-8 off the ray through the ideal end, so the arc nearly passes
    # the origin and meets its asymptote tolerance well inside radius 1
    p = PlanePoint.from_polar(1.0, 5.960464477539063e-08)
    arc = connect(BoundarySpec(p, IdealPoint(0.0)))
    assert arc.soliton_residuals().max() <= 1e-6
    pts = arc.dense_points(1e-3, 2.0)
    assert min(np.hypot(*(pts[[0, -1]] - [p.x, p.y]).T)) <= 1e-9


@pytest.mark.parametrize("r0", [0.1, 1.0, 3.0])
def test_samples_satisfy_the_polar_equation(r0):
    # r'' from a fourth-order difference of the integrated r', against the right-hand side.
    # On the steep part r changes on the angular scale r / |r'|, so the step follows it.
    # The dense-output interpolant limits the measured agreement to about 1e-6.
    arc = shoot_from_apex(0.0, r0)

    def dr(theta):
        return arc.state_at(theta).dr

    worst = 0.0
    for th, r, d in zip(arc.theta, arc.r, arc.dr):
        h = 1e-3 * min(1.0, r / max(abs(d), 1e-300) / (1.0 + r * r))
        if r > 4.0 or not arc.a + 3 * h < th < arc.b - 3 * h:
            continue
        d2 = (-dr(th + 2 * h) + 8 * dr(th + h) - 8 * dr(th - h) + dr(th - 2 * h)) / (12 * h)
        rhs = polar_ode_rhs(arc.state_at(th))
        worst = max(worst, abs(d2 - rhs) / abs(rhs))
    assert worst <= 1e-6
