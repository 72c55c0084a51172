"""Temporal-profile warm start.

Each gear segment of the coarse path gets a longitudinal speed profile: a
small QP over traverse distance, speed, and acceleration on a uniform time
grid.  The profiles are then used to resample the geometric path onto the
MPC's time grid, giving a dynamically plausible state/control warm start.
A naive finite-difference profile is kept as the ablation baseline.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .grid_search import Gear, GearSegment
from .qp import QpStatus, QuadraticProgram, solve_qp
from .vehicle import ControlInput, VehicleLimits, VehicleState


class ProfileError(RuntimeError):
    pass


class NonPositiveInput(ValueError):
    pass


class InfeasibleProfile(ProfileError):
    pass


class SolverFailure(ProfileError):
    pass


class MismatchedSegments(ValueError):
    pass


@dataclass(frozen=True)
class HorizonParams:
    """Inputs of the total-horizon heuristic T = r (v_max^2 + s a_max)/(a_max v_max)."""

    r: float
    v_max: float
    a_max: float
    s_total: float

    def __post_init__(self):
        if self.r <= 0 or self.v_max <= 0 or self.a_max <= 0 or self.s_total <= 0:
            raise NonPositiveInput("horizon parameters must be positive")


def compute_horizon(p: HorizonParams) -> float:
    """Heuristic total horizon in seconds; r is typically in [1.2, 1.5]."""
    return p.r * (p.v_max ** 2 + p.s_total * p.a_max) / (p.a_max * p.v_max)


def min_traverse_time(length: float, v_max: float, a_max: float) -> float:
    """Exact minimum time of a rest-to-rest trapezoidal speed profile."""
    if length <= 0:
        return 0.0
    if length >= v_max ** 2 / a_max:
        return v_max / a_max + length / v_max
    return 2.0 * math.sqrt(length / a_max)


@dataclass(frozen=True)
class SpeedProfile:
    """Arc-length profile on a uniform time grid: s, v at K+1 knots, a on K intervals."""

    dt: float
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @property
    def duration(self) -> float:
        return self.dt * (len(self.s) - 1)


@dataclass(frozen=True)
class WarmStartTrajectory:
    """Coarse path resampled onto the uniform MPC time grid."""

    dt: float
    states: Tuple[VehicleState, ...]
    controls: Tuple[ControlInput, ...]


def profile_objective(profile: SpeedProfile, w_j: float = 1.0) -> float:
    a = profile.a
    jerk = np.diff(a) / profile.dt
    return float(a @ a + w_j * (jerk @ jerk))


def optimize_speed_profile(segment_length: float, limits: VehicleLimits, K_seg: int,
                           T_seg: float, reverse: bool = False,
                           w_j: float = 1.0) -> SpeedProfile:
    """Rest-to-rest longitudinal QP: minimize accel + jerk energy.

    Decision variables are {s_i, v_i} at the K+1 knots and {a_i} on the K
    intervals, linked by trapezoidal consistency.  ``reverse`` caps speed by
    the reverse speed limit instead of the forward one.
    """
    if segment_length <= 0 or K_seg < 1 or T_seg <= 0:
        raise NonPositiveInput("segment_length, K_seg and T_seg must be positive")
    v_cap = abs(limits.v_range[0]) if reverse else limits.v_range[1]
    a_max = limits.a_max
    if T_seg < min_traverse_time(segment_length, v_cap, a_max) - 1e-12:
        raise InfeasibleProfile(
            f"horizon {T_seg:.3f}s below trapezoidal minimum "
            f"{min_traverse_time(segment_length, v_cap, a_max):.3f}s")
    K = K_seg
    dt = T_seg / K
    n = 2 * (K + 1) + K   # s, v, a
    iS, iV, iA = 0, K + 1, 2 * (K + 1)

    P = np.zeros((n, n))
    D = np.zeros((K - 1, K)) if K > 1 else np.zeros((0, K))
    for i in range(K - 1):
        D[i, i] = -1.0
        D[i, i + 1] = 1.0
    P[iA:, iA:] = 2.0 * (np.eye(K) + (w_j / dt ** 2) * (D.T @ D))
    q = np.zeros(n)

    rows = []
    rhs = []
    for i in range(K):
        r = np.zeros(n)
        r[iS + i + 1] = 1.0
        r[iS + i] = -1.0
        r[iV + i] = -dt
        r[iA + i] = -0.5 * dt ** 2
        rows.append(r)
        rhs.append(0.0)
        r = np.zeros(n)
        r[iV + i + 1] = 1.0
        r[iV + i] = -1.0
        r[iA + i] = -dt
        rows.append(r)
        rhs.append(0.0)
    for idx, val in ((iS, 0.0), (iV, 0.0), (iS + K, segment_length), (iV + K, 0.0)):
        r = np.zeros(n)
        r[idx] = 1.0
        rows.append(r)
        rhs.append(val)
    A_eq = np.array(rows)
    b_eq = np.array(rhs)

    A_in = np.zeros((2 * K + 1 + K, n))
    lower = np.zeros(2 * K + 1 + K)
    upper = np.zeros(2 * K + 1 + K)
    for i in range(K + 1):
        A_in[i, iV + i] = 1.0
        lower[i], upper[i] = 0.0, v_cap
    for i in range(K):
        A_in[K + 1 + i, iA + i] = 1.0
        lower[K + 1 + i], upper[K + 1 + i] = -a_max, a_max
    for i in range(K):                       # monotone arc length
        j = 2 * K + 1 + i
        A_in[j, iS + i + 1] = 1.0
        A_in[j, iS + i] = -1.0
        lower[j], upper[j] = 0.0, np.inf

    qp = QuadraticProgram(P=P, q=q, A_eq=A_eq, b_eq=b_eq,
                          A_in=A_in, lower=lower, upper=upper)
    x, report = solve_qp(qp)
    if report.status is QpStatus.INFEASIBLE:
        raise InfeasibleProfile("speed-profile QP infeasible")
    if report.status is not QpStatus.OPTIMAL:
        raise SolverFailure(f"speed-profile QP did not converge: {report.status}")
    return SpeedProfile(dt=dt, s=x[iS:iS + K + 1].copy(),
                        v=x[iV:iV + K + 1].copy(), a=x[iA:].copy())


def naive_profile(arc_lengths: Sequence[float], dt: float,
                  limits: VehicleLimits, reverse: bool = False) -> SpeedProfile:
    """Finite-difference baseline: differentiate arc length over uniform time.

    Mirrors differentiating raw path points directly; speeds are central
    differences clipped to the limits, accelerations forward differences.
    """
    s = np.asarray(arc_lengths, float)
    if len(s) < 2 or dt <= 0:
        raise NonPositiveInput("need >= 2 samples and dt > 0")
    v_cap = abs(limits.v_range[0]) if reverse else limits.v_range[1]
    v = np.gradient(s, dt)
    v = np.clip(v, 0.0, v_cap)
    v[0] = 0.0   # the vehicle starts and ends each gear segment at rest
    v[-1] = 0.0
    a = np.clip(np.diff(v) / dt, limits.a_range[0], limits.a_range[1])
    return SpeedProfile(dt=dt, s=s, v=v, a=a)


def allocate_segment_times(segment_lengths: Sequence[float], limits: VehicleLimits,
                           T_total: float,
                           reverse_flags: Optional[Sequence[bool]] = None) -> List[float]:
    """Split T_total across segments proportionally to trapezoidal minimum times."""
    if reverse_flags is None:
        reverse_flags = [False] * len(segment_lengths)
    mins = []
    for length, rev in zip(segment_lengths, reverse_flags):
        cap = abs(limits.v_range[0]) if rev else limits.v_range[1]
        mins.append(max(min_traverse_time(length, cap, limits.a_max), 1e-6))
    total = sum(mins)
    return [T_total * m / total for m in mins]


def _segment_geometry(seg: GearSegment):
    xs = np.array([p.x for p in seg.points])
    ys = np.array([p.y for p in seg.points])
    phis = np.unwrap(np.array([p.phi for p in seg.points]))
    ds = np.hypot(np.diff(xs), np.diff(ys))
    arcs = np.concatenate([[0.0], np.cumsum(ds)])
    return xs, ys, phis, arcs


def resample_warm_start(path: Sequence[GearSegment], profiles: Sequence[SpeedProfile],
                        K: int, wheelbase: float = 2.8) -> WarmStartTrajectory:
    """Interpolate poses along each gear segment at the profiled arc lengths.

    Produces exactly K+1 states and K controls on the uniform grid
    dt = T_total / K; speeds and accelerations are signed by gear, and
    steering comes from the discrete curvature delta = atan(L * kappa).
    """
    if len(path) != len(profiles):
        raise MismatchedSegments(f"{len(path)} segments vs {len(profiles)} profiles")
    if not path:
        raise MismatchedSegments("empty path")
    durations = [p.duration for p in profiles]
    T_total = sum(durations)
    if K < sum(len(p.s) - 1 for p in profiles):
        raise MismatchedSegments("K smaller than total profile steps")
    dt = T_total / K
    starts = np.concatenate([[0.0], np.cumsum(durations)])

    geoms = [_segment_geometry(seg) for seg in path]

    xs_out, ys_out, phis_out, vs_out, as_out = [], [], [], [], []
    seg_idx, arc_pos = [], []
    for j in range(K + 1):
        t = min(j * dt, T_total)
        si = min(bisect.bisect_right(starts, t) - 1, len(path) - 1)
        tau = t - starts[si]
        prof = profiles[si]
        tgrid = prof.dt * np.arange(len(prof.s))
        s_loc = float(np.interp(tau, tgrid, prof.s))
        v_loc = float(np.interp(tau, tgrid, prof.v))
        ia = min(int(tau / prof.dt), len(prof.a) - 1) if len(prof.a) else 0
        a_loc = float(prof.a[ia]) if len(prof.a) else 0.0
        xs, ys, phis, arcs = geoms[si]
        s_loc = min(s_loc, arcs[-1])
        x = float(np.interp(s_loc, arcs, xs))
        y = float(np.interp(s_loc, arcs, ys))
        phi = float(np.interp(s_loc, arcs, phis))
        sign = 1.0 if path[si].gear is Gear.FORWARD else -1.0
        seg_idx.append(si)
        arc_pos.append(sign * s_loc)
        xs_out.append(x)
        ys_out.append(y)
        phis_out.append(phi)
        vs_out.append(sign * v_loc)
        as_out.append(sign * a_loc)

    # steering from discrete curvature of the resampled states
    # (phi rate over signed displacement v*dt)
    states = tuple(VehicleState(xs_out[j], ys_out[j], vs_out[j], phis_out[j])
                   for j in range(K + 1))
    deltas = []
    for j in range(K):
        if seg_idx[j] == seg_idx[j + 1]:
            ds = arc_pos[j + 1] - arc_pos[j]
        else:
            ds = vs_out[j] * dt
        if abs(ds) > 1e-9:
            kappa = (phis_out[j + 1] - phis_out[j]) / ds
            deltas.append(math.atan(wheelbase * kappa))
        else:
            deltas.append(deltas[-1] if deltas else 0.0)
    controls = tuple(ControlInput(delta=deltas[j], a=as_out[j]) for j in range(K))
    return WarmStartTrajectory(dt=dt, states=states, controls=controls)
