"""Runge-Kutta-Fehlberg 4(5) for small autonomous-ish systems.

States are tuples of Python floats; the right-hand sides used in this package
are two-dimensional, so plain floats beat numpy arrays by a wide margin.
The 4th order solution is propagated and the embedded 5th order one only
drives step-size control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

State = tuple
RHS = Callable[[float, State], State]

# Fehlberg tableau
C2, C3, C4, C5, C6 = 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2
A21 = 1 / 4
A31, A32 = 3 / 32, 9 / 32
A41, A42, A43 = 1932 / 2197, -7200 / 2197, 7296 / 2197
A51, A52, A53, A54 = 439 / 216, -8.0, 3680 / 513, -845 / 4104
A61, A62, A63, A64, A65 = -8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40
B1, B3, B4, B5 = 25 / 216, 1408 / 2565, 2197 / 4104, -1 / 5
E1, E3, E4, E5, E6 = 1 / 360, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55


class IntegrationError(RuntimeError):
    pass


def rkf45_step(f: RHS, t: float, y: State, h: float) -> tuple[State, State]:
    """One Fehlberg step; returns the 4th order update and the error vector."""
    n = len(y)
    k1 = f(t, y)
    k2 = f(t + C2 * h, tuple(y[i] + h * A21 * k1[i] for i in range(n)))
    k3 = f(t + C3 * h, tuple(y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(n)))
    k4 = f(t + C4 * h, tuple(y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(n)))
    k5 = f(t + C5 * h, tuple(y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                             for i in range(n)))
    k6 = f(t + C6 * h, tuple(y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                         + A65 * k5[i]) for i in range(n)))
    y4 = tuple(y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i]) for i in range(n))
    err = tuple(h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]) for i in range(n))
    return y4, err


def integrate_fixed(f: RHS, t0: float, y0: State, t1: float, n_steps: int) -> State:
    """Propagate with ``n_steps`` equal steps (used for convergence-order checks)."""
    h = (t1 - t0) / n_steps
    t, y = t0, tuple(y0)
    for i in range(n_steps):
        y, _ = rkf45_step(f, t, y, h)
        t = t0 + (i + 1) * h
    return y


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    rejected: int = 0


def integrate_adaptive(
    f: RHS,
    t0: float,
    y0: State,
    *,
    direction: float = 1.0,
    t_end: float | None = None,
    stop: Callable[[float, State], bool] | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    h0: float = 1e-3,
    hmax: float = math.inf,
    hmin: float = 1e-14,
    max_steps: int = 100_000,
) -> Trajectory:
    """Adaptive integration until ``t_end`` is hit exactly or ``stop(t, y)`` holds.

    The trajectory includes the initial point. Raises :class:`IntegrationError`
    on step-size underflow, non-finite states or an exhausted step budget.
    """
    if t_end is None and stop is None:
        raise ValueError("need t_end or a stop predicate")
    sgn = 1.0 if direction >= 0 else -1.0
    t, y = t0, tuple(y0)
    out = Trajectory([t], [y])
    h = min(abs(h0), hmax)
    for _ in range(max_steps):
        if t_end is not None:
            remaining = (t_end - t) * sgn
            if remaining <= 0.0:
                return out
            h = min(h, remaining)
        y_new, err = rkf45_step(f, t, y, sgn * h)
        scale_err = 0.0
        for yi, yn, ei in zip(y, y_new, err):
            sc = atol + rtol * max(abs(yi), abs(yn))
            scale_err = max(scale_err, abs(ei) / sc)
        if not all(math.isfinite(v) for v in y_new) or not math.isfinite(scale_err):
            scale_err = math.inf
        if scale_err <= 1.0:
            t = t + sgn * h
            if t_end is not None and abs(t - t_end) < 1e-15 * max(1.0, abs(t_end)):
                t = t_end
            y = y_new
            out.t.append(t)
            out.y.append(y)
            out.steps.append(sgn * h)
            if stop is not None and stop(t, y):
                return out
            fac = 5.0 if scale_err == 0.0 else min(5.0, 0.9 * scale_err ** -0.2)
            h = min(h * fac, hmax)
        else:
            out.rejected += 1
            fac = 0.2 if not math.isfinite(scale_err) else max(0.1, 0.9 * scale_err ** -0.25)
            h *= fac
            if h < hmin:
                raise IntegrationError(f"step size underflow at t={t!r}, y={y!r}")
    raise IntegrationError(f"step budget of {max_steps} exhausted at t={t!r}")


def observed_order(values: Sequence[Sequence[float]]) -> float:
    """Richardson estimate of the convergence order from solutions at h, h/2, h/4."""
    y1, y2, y4 = values
    e1 = max(abs(a - b) for a, b in zip(y1, y2))
    e2 = max(abs(a - b) for a, b in zip(y2, y4))
    return math.log2(e1 / e2)
