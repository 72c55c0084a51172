import math

import numpy as np
import pytest

from freeplan.grid_search import CoarsePathPoint, Gear, GearSegment
from freeplan.speed_profile import (
    HorizonParams,
    InfeasibleProfile,
    MismatchedSegments,
    NonPositiveInput,
    SpeedProfile,
    allocate_segment_times,
    compute_horizon,
    min_traverse_time,
    naive_profile,
    optimize_speed_profile,
    profile_objective,
    resample_warm_start,
)
from freeplan.vehicle import VehicleLimits

LIMITS = VehicleLimits()


class TestComputeHorizon:
    def test_formula(self):
        assert compute_horizon(HorizonParams(1.2, 2, 1, 10)) == pytest.approx(8.4)

    def test_formula_other(self):
        assert compute_horizon(HorizonParams(1.5, 2, 1, 6)) == pytest.approx(7.5)

    def test_small_s_limit(self):
        # s -> 0 gives r * v_max / a_max
        t = compute_horizon(HorizonParams(1.3, 2, 1, 1e-9))
        assert t == pytest.approx(1.3 * 2 / 1, abs=1e-6)

    def test_nonpositive(self):
        with pytest.raises(NonPositiveInput):
            HorizonParams(1.2, 0, 1, 10)
        with pytest.raises(NonPositiveInput):
            HorizonParams(1.2, 2, 1, -1)

    def test_r_one_matches_trapezoid_min(self):
        # with r=1 and s >= v_max^2/a_max the formula is the exact minimum time
        for s in (4.0, 7.5, 12.0):
            t = compute_horizon(HorizonParams(1.0, 2, 1, s))
            assert t == pytest.approx(min_traverse_time(s, 2, 1), abs=1e-12)


class TestOptimizeSpeedProfile:
    def resimulate(self, prof: SpeedProfile):
        s, v = [prof.s[0]], [prof.v[0]]
        for a in prof.a:
            s.append(s[-1] + v[-1] * prof.dt + 0.5 * a * prof.dt ** 2)
            v.append(v[-1] + a * prof.dt)
        return np.array(s), np.array(v)

    def test_reference_case(self):
        prof = optimize_speed_profile(10.0, LIMITS, K_seg=84, T_seg=8.4)
        assert prof.s[0] == pytest.approx(0, abs=1e-6)
        assert prof.v[0] == pytest.approx(0, abs=1e-6)
        assert prof.s[-1] == pytest.approx(10.0, abs=1e-6)
        assert prof.v[-1] == pytest.approx(0, abs=1e-6)
        assert prof.v.max() <= 2.0 + 1e-6
        assert np.all(np.abs(prof.a) <= 1.0 + 1e-6)
        # trapezoidal recurrences hold
        s, v = self.resimulate(prof)
        assert np.allclose(s, prof.s, atol=1e-6)
        assert np.allclose(v, prof.v, atol=1e-6)
        # monotone arc length
        assert np.all(np.diff(prof.s) >= -1e-8)

    def test_degenerate_segment(self):
        prof = optimize_speed_profile(1e-4, LIMITS, K_seg=10, T_seg=5.0)
        assert profile_objective(prof) == pytest.approx(0.0, abs=1e-4)
        assert prof.s[-1] == pytest.approx(1e-4, abs=1e-6)

    def test_too_short_horizon(self):
        # minimal trapezoidal time for s=10, v_max=2, a_max=1 is 2 + 5 = 7 s
        with pytest.raises(InfeasibleProfile):
            optimize_speed_profile(10.0, LIMITS, K_seg=40, T_seg=6.5)

    def test_reverse_cap(self):
        # reverse speed cap is |v_range[0]| = 1
        prof = optimize_speed_profile(3.0, LIMITS, K_seg=40, T_seg=6.0, reverse=True)
        assert prof.v.max() <= 1.0 + 1e-6

    def test_beats_naive_objective(self):
        prof = optimize_speed_profile(8.0, LIMITS, K_seg=60, T_seg=9.0)
        arcs = np.linspace(0, 8.0, 61)
        base = naive_profile(arcs, prof.dt, LIMITS)
        assert profile_objective(prof) <= profile_objective(base) + 1e-9


def straight_segment(length, n, gear=Gear.FORWARD, y=0.0):
    pts = [CoarsePathPoint(length * i / (n - 1) * (1 if gear is Gear.FORWARD else -1),
                           y, 0.0 if gear is Gear.FORWARD else math.pi, gear)
           for i in range(n)]
    return GearSegment(gear, tuple(pts))


def arc_segment(radius, sweep, n):
    pts = []
    for i in range(n):
        th = sweep * i / (n - 1)
        pts.append(CoarsePathPoint(radius * math.sin(th),
                                   radius * (1 - math.cos(th)), th, Gear.FORWARD))
    return GearSegment(Gear.FORWARD, tuple(pts))


class TestResampleWarmStart:
    def test_straight_forward(self):
        seg = straight_segment(10.0, 41)
        prof = optimize_speed_profile(10.0, LIMITS, K_seg=80, T_seg=8.4)
        warm = resample_warm_start([seg], [prof], K=80)
        assert len(warm.states) == 81 and len(warm.controls) == 80
        assert all(abs(c.delta) < 1e-9 for c in warm.controls)
        phis = [s.x_phi for s in warm.states]
        assert max(phis) - min(phis) < 1e-9
        assert all(s.x_v >= -1e-9 for s in warm.states)
        assert warm.states[-1].x_x == pytest.approx(10.0, abs=1e-6)

    def test_reverse_sign(self):
        seg = straight_segment(4.0, 21, gear=Gear.REVERSE)
        prof = optimize_speed_profile(4.0, LIMITS, K_seg=40, T_seg=8.0, reverse=True)
        warm = resample_warm_start([seg], [prof], K=40)
        assert all(s.x_v <= 1e-9 for s in warm.states)
        assert min(s.x_v for s in warm.states) < -0.1

    def test_constant_curvature_arc(self):
        radius = 8.0
        seg = arc_segment(radius, math.pi / 2, 200)
        length = radius * math.pi / 2
        prof = optimize_speed_profile(length, LIMITS, K_seg=100,
                                      T_seg=2.0 + length / 2.0 + 2.0)
        warm = resample_warm_start([seg], [prof], K=100, wheelbase=2.8)
        expect = math.atan(2.8 / radius)
        mid = [c.delta for c, s in zip(warm.controls, warm.states)
               if abs(s.x_v) > 0.2]
        assert mid, "expected moving samples"
        assert np.allclose(mid, expect, atol=0.02)

    def test_mismatched(self):
        seg = straight_segment(10.0, 41)
        with pytest.raises(MismatchedSegments):
            resample_warm_start([seg], [], K=40)


class TestAllocation:
    def test_proportional(self):
        times = allocate_segment_times([10.0, 10.0], LIMITS, 16.0)
        assert times[0] == pytest.approx(times[1])
        assert sum(times) == pytest.approx(16.0)

    def test_reverse_weighting(self):
        # reverse segments are slower (cap 1 m/s), so they get more time
        times = allocate_segment_times([5.0, 5.0], LIMITS, 20.0, [False, True])
        assert times[1] > times[0]
