from __future__ import annotations

import math

import pytest

from soliton_networks.integrators import (
    IntegrationError,
    integrate_adaptive,
    integrate_fixed,
    observed_order,
    rkf45_step,
)


def decay(_t, y):
    return (-y[0],)


def oscillator(_t, y):
    return (y[1], -y[0])


def test_single_step_error_estimate_tracks_true_error():
    y, err = rkf45_step(decay, 0.0, (1.0,), 0.1)
    true = abs(y[0] - math.exp(-0.1))
    assert true < 1e-7
    assert abs(err[0]) == pytest.approx(true, rel=0.5)


def test_fixed_steps_are_fourth_order():
    runs = [integrate_fixed(oscillator, 0.0, (1.0, 0.0), 2.0, n) for n in (8, 16, 32)]
    assert observed_order(runs) == pytest.approx(4.0, abs=0.2)


def test_adaptive_hits_end_time_and_meets_tolerance():
    tr = integrate_adaptive(oscillator, 0.0, (1.0, 0.0), t_end=10.0, rtol=1e-10, atol=1e-12)
    assert tr.t[-1] == 10.0
    assert tr.y[-1][0] == pytest.approx(math.cos(10.0), abs=1e-8)
    assert len(tr.steps) == len(tr.t) - 1


def test_adaptive_backwards_with_stop_predicate():
    tr = integrate_adaptive(decay, 0.0, (1.0,), direction=-1, stop=lambda t, y: y[0] >= 2.0)
    assert tr.t[-1] < 0.0
    assert tr.y[-1][0] >= 2.0
    assert tr.y[-1][0] == pytest.approx(math.exp(-tr.t[-1]), rel=1e-8)  # global error, not per step


def test_blow_up_is_reported():
    # y' = y^2 from y(0) = 1 blows up at t = 1
    with pytest.raises(IntegrationError):
        integrate_adaptive(lambda t, y: (y[0] * y[0],), 0.0, (1.0,), t_end=2.0)


def test_needs_an_end_condition():
    with pytest.raises(ValueError):
        integrate_adaptive(decay, 0.0, (1.0,))
