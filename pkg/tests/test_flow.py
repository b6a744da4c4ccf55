from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import GENERIC_TRIPLE
from soliton_networks.flow import (
    FlowError,
    WorldSheet,
    blowup_lift,
    circle_flow_check,
    direct_flow_check,
    evolve,
    scale_network,
    tangent_cone_at_infinity,
    vertex_trajectories,
)
from soliton_networks.geometry import angle_diff
from soliton_networks.steiner import solve_expander


@pytest.fixture(scope="module")
def line_network():
    (net,) = solve_expander((0.3, 0.3 + math.pi), "matchings").networks
    return net


def _cone_error(cone, rays) -> float:
    assert len(cone) == len(rays)
    return max(min(abs(angle_diff(a, b)) for a in cone) for b in rays)


def test_half_time_frame_is_the_base(generic_triod):
    frame = evolve(generic_triod, 0.5)
    assert frame.lam == 1.0
    assert np.array_equal(frame.network.vertex_positions, generic_triod.vertex_positions)
    for a, b in zip(frame.polylines(0.01, 5.0), generic_triod.polylines(0.01, 5.0)):
        assert np.array_equal(a, b)


def test_frames_are_dilations(generic_triod):
    frame = evolve(generic_triod, 2.0)
    assert frame.lam == 2.0
    assert np.allclose(frame.network.vertex_positions, 2.0 * generic_triod.vertex_positions, rtol=0, atol=1e-15)
    for a, b in zip(frame.network.samples(), generic_triod.samples()):
        assert np.allclose(a, 2.0 * b, rtol=1e-14, atol=1e-14)


def test_dilations_compose(generic_triod):
    once = scale_network(generic_triod, 3.0)
    twice = scale_network(scale_network(generic_triod, 1.5), 2.0)
    for a, b in zip(once.samples(), twice.samples()):
        assert np.max(np.abs(a - b)) <= 1e-12


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_nonpositive_time_is_rejected(generic_triod, t):
    with pytest.raises(FlowError):
        evolve(generic_triod, t)


def test_only_regular_networks_flow(generic_triod):
    failed = scale_network(generic_triod, 1.0)
    failed.status = "failed"
    with pytest.raises(FlowError):
        evolve(failed, 1.0)
    with pytest.raises(FlowError):
        direct_flow_check(failed, 1.0)


def test_small_times_approach_the_cone(generic_triod):
    # at t = 1e-6 the whole network within radius 1 is a thin neighbourhood of three rays
    frame = evolve(generic_triod, 1e-6)
    U = np.column_stack([np.cos(GENERIC_TRIPLE), np.sin(GENERIC_TRIPLE)])
    for P in frame.polylines(1e-3, 1.0):
        dist = np.min(np.abs(P[:, None, 0] * U[None, :, 1] - P[:, None, 1] * U[None, :, 0]), axis=1)
        assert dist.max() <= 1e-2


def test_evolved_frames_solve_the_scaled_equation(generic_triod):
    for t in (0.25, 2.0):
        frame = evolve(generic_triod, t)
        for e in frame.network.edges:
            assert e.arc.soliton_residuals(time=t).max() <= 1e-6


def test_vertex_trajectories_are_rays(generic_triod):
    (tr,) = vertex_trajectories(generic_triod)
    P = tr.at(np.array([0.1, 0.5, 1.0, 3.0]))
    assert np.allclose(P[1], generic_triod.vertex_positions[0], atol=1e-15)
    q = tr.q / np.hypot(*tr.q)
    assert np.max(np.abs(P[:, 0] * q[1] - P[:, 1] * q[0])) <= 1e-12
    assert np.all(tr.at(0.0) == 0.0)
    with pytest.raises(FlowError):
        tr.at(-0.1)
    assert not tr.stationary


def test_equal_angle_triod_is_stationary(triod_solutions):
    (tr,) = vertex_trajectories(triod_solutions.networks[0])
    assert tr.stationary


def test_tangent_cones(generic_triod, cross_solutions, line_network):
    assert _cone_error(tangent_cone_at_infinity(generic_triod), GENERIC_TRIPLE) <= 1e-6
    for net in cross_solutions.connected:
        assert _cone_error(tangent_cone_at_infinity(net), net.angles) <= 1e-6
    cone = tangent_cone_at_infinity(line_network)
    assert _cone_error(cone, [0.3, 0.3 + math.pi]) <= 1e-12


def test_blowup_f_trace_is_constant(generic_triod):
    lift = blowup_lift(WorldSheet(generic_triod, np.array([0.5, 1.0, 4.0])))
    assert lift.f_drift <= 1e-12
    for a, b in zip(lift.f_traces[0], generic_triod.polylines(0.01, 8.0)):
        assert np.allclose(a, b, atol=1e-14)


def test_straight_line_stays_put(line_network):
    rep = direct_flow_check(line_network, 1.0, h=0.05)
    assert rep.max_deviation <= 1e-10


def test_shrinking_circle_matches_exact_radius():
    got, exact = circle_flow_check(1.0, 0.2, h=0.02)
    assert got == pytest.approx(exact, abs=1e-4)
    with pytest.raises(FlowError):
        circle_flow_check(1.0, 0.6)


def test_unstable_time_step_is_reported(generic_triod):
    with pytest.raises(FlowError):
        direct_flow_check(generic_triod, 1.0, h=0.05, cfl=2.0)


def test_direct_flow_tracks_the_dilation(generic_triod):
    rep = direct_flow_check(generic_triod, 1.0, h=0.05, n_records=3)
    assert rep.max_deviation <= 5e-3
    rows = rep.rows()
    assert [r[0] for r in rows] == pytest.approx([0.5, 0.75, 1.0])
    assert all(len(r) == 4 for r in rows)
    assert np.allclose(rep.vertex_paths, rep.exact_vertex_paths, atol=5e-2)
