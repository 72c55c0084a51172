"""Vehicle state/control types, kinematic bicycle dynamics, and box limits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple


@dataclass(frozen=True)
class VehicleState:
    """Planar state (position, speed, heading).

    Heading is deliberately unnormalized: it accumulates across maneuvers so
    finite-difference smoothness terms never jump across +-pi.
    """

    x_x: float
    x_y: float
    x_v: float
    x_phi: float

    def __post_init__(self):
        for v in (self.x_x, self.x_y, self.x_v, self.x_phi):
            if not math.isfinite(v):
                raise ValueError(f"non-finite vehicle state {self}")


@dataclass(frozen=True)
class ControlInput:
    delta: float   # steering angle, rad
    a: float       # acceleration, m/s^2

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.a)):
            raise ValueError(f"non-finite control {self}")


@dataclass(frozen=True)
class VehicleLimits:
    """Box limits on controls, speed, and steering rate.

    Defaults match the robustness-experiment setup: steering +-0.5 rad at
    +-0.5 rad/s, acceleration in [-1, 1] m/s^2, speed in [-1, 2] m/s,
    wheelbase 2.8 m.
    """

    delta_range: Tuple[float, float] = (-0.5, 0.5)
    delta_rate_range: Tuple[float, float] = (-0.5, 0.5)
    a_range: Tuple[float, float] = (-1.0, 1.0)
    v_range: Tuple[float, float] = (-1.0, 2.0)
    wheelbase: float = 2.8

    def __post_init__(self):
        for name in ("delta_range", "delta_rate_range", "a_range", "v_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy lower < upper, got ({lo}, {hi})")
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")

    @property
    def v_max(self) -> float:
        return self.v_range[1]

    @property
    def a_max(self) -> float:
        return self.a_range[1]

    @property
    def delta_max(self) -> float:
        return self.delta_range[1]


def step_dynamics(state: VehicleState, control: ControlInput, dt: float, L: float) -> VehicleState:
    """One explicit-Euler step of the kinematic bicycle model.

    All right-hand sides use pre-step values.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if L <= 0:
        raise ValueError("wheelbase must be positive")
    return VehicleState(
        x_x=state.x_x + state.x_v * math.cos(state.x_phi) * dt,
        x_y=state.x_y + state.x_v * math.sin(state.x_phi) * dt,
        x_v=state.x_v + control.a * dt,
        x_phi=state.x_phi + state.x_v * math.tan(control.delta) / L * dt,
    )


def rollout(x0: VehicleState, controls: Sequence[ControlInput], dt: float, L: float) -> List[VehicleState]:
    """Apply step_dynamics repeatedly; returns len(controls) + 1 states."""
    if len(controls) == 0:
        raise ValueError("control list must be nonempty")
    states = [x0]
    for u in controls:
        states.append(step_dynamics(states[-1], u, dt, L))
    return states


@dataclass(frozen=True)
class LimitViolation:
    index: int
    quantity: str      # "delta" | "delta_rate" | "a" | "v"
    value: float
    bound: Tuple[float, float]


def check_limits(states: Sequence[VehicleState], controls: Sequence[ControlInput],
                 limits: VehicleLimits, dt: float,
                 tol: float = 1e-9) -> List[LimitViolation]:
    """Report every index where a box limit or the steering rate is violated.

    An empty list means the trajectory is feasible w.r.t. the limits.
    """
    if len(states) != len(controls) + 1:
        raise ValueError("need exactly len(controls) + 1 states")
    out: List[LimitViolation] = []

    def check(idx, name, value, rng):
        if value < rng[0] - tol or value > rng[1] + tol:
            out.append(LimitViolation(idx, name, value, rng))

    for k, s in enumerate(states):
        check(k, "v", s.x_v, limits.v_range)
    prev_delta: Optional[float] = None
    for k, u in enumerate(controls):
        check(k, "delta", u.delta, limits.delta_range)
        check(k, "a", u.a, limits.a_range)
        if prev_delta is not None:
            check(k, "delta_rate", (u.delta - prev_delta) / dt, limits.delta_rate_range)
        prev_delta = u.delta
    return out
