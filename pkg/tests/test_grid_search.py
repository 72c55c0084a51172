import math

import numpy as np
import pytest

from freeplan.geometry import (
    Point2,
    VehicleFootprint,
    footprint_at,
    polygon_distance,
    polygon_from_vertices,
    pose_transform,
    segment_to_obstacle,
)
from freeplan.grid_search import (
    CoarsePathPoint,
    EmptyPath,
    Gear,
    GridConfig,
    NoPathFound,
    StartInCollision,
    partition_by_gear,
    plan_coarse_path,
)
from freeplan.vehicle import VehicleLimits, VehicleState

FOOTPRINT = VehicleFootprint(length=4.8, width=2.0, rear_axle_to_center=1.4)
LIMITS = VehicleLimits()


def box(x0, y0, x1, y1):
    return polygon_from_vertices(
        [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)])


def audit_path(path, obstacles, limits=LIMITS, cfg=GridConfig()):
    """Post-hoc collision and curvature audit using the geometry oracle."""
    for p in path:
        world = footprint_at(FOOTPRINT, pose_transform(
            VehicleState(p.x, p.y, 0.0, p.phi)))
        for obs in obstacles:
            assert polygon_distance(world, obs) >= 0.0
            from freeplan.geometry import polygons_intersect
            assert not polygons_intersect(world, obs, tol=-1e-9)
    max_dphi = cfg.primitive_arc * math.tan(limits.delta_max) / limits.wheelbase
    for a, b in zip(path, path[1:]):
        assert abs(math.remainder(b.phi - a.phi, 2 * math.pi)) <= max_dphi + 1e-9
        assert math.hypot(b.x - a.x, b.y - a.y) <= cfg.primitive_arc + 1e-9


class TestPlanCoarsePath:
    def test_empty_scene_straight(self):
        x0 = VehicleState(0, 0, 0, 0)
        xF = VehicleState(10, 0, 0, 0)
        path = plan_coarse_path([], FOOTPRINT, x0, xF, LIMITS)
        assert path[0].x == pytest.approx(0) and path[0].y == pytest.approx(0)
        cfg = GridConfig()
        assert math.hypot(path[-1].x - 10, path[-1].y) <= cfg.xy_resolution + 1e-9
        # monotone forward, single gear
        xs = [p.x for p in path]
        assert all(b >= a - 1e-9 for a, b in zip(xs, xs[1:]))
        assert all(p.gear is Gear.FORWARD for p in path)
        audit_path(path, [])

    def test_walled_off_goal(self):
        # goal enclosed in a box of boundary rectangles
        walls = [
            segment_to_obstacle(Point2(4.5, -2.5), Point2(18, -2.5), 0.2),
            segment_to_obstacle(Point2(4.5, 2.5), Point2(18, 2.5), 0.2),
            segment_to_obstacle(Point2(4.5, -2.5), Point2(4.5, 2.5), 0.2),
            segment_to_obstacle(Point2(18, -2.5), Point2(18, 2.5), 0.2),
        ]
        x0 = VehicleState(0, 0, 0, 0)
        xF = VehicleState(10, 0, 0, 0)
        with pytest.raises(NoPathFound):
            plan_coarse_path(walls, FOOTPRINT, x0, xF, LIMITS, max_expansions=4000)

    def test_reverse_goal(self):
        x0 = VehicleState(0, 0, 0, 0)
        xF = VehicleState(-5, 0, 0, 0)
        obstacles = [box(4.5, -2, 6.5, 2)]
        path = plan_coarse_path(obstacles, FOOTPRINT, x0, xF, LIMITS)
        assert any(p.gear is Gear.REVERSE for p in path)
        audit_path(path, obstacles)

    def test_start_in_collision(self):
        obstacles = [box(-1, -1, 1, 1)]
        with pytest.raises(StartInCollision):
            plan_coarse_path(obstacles, FOOTPRINT, VehicleState(0, 0, 0, 0),
                             VehicleState(10, 0, 0, 0), LIMITS)

    def test_obstacle_avoidance_audit(self):
        x0 = VehicleState(-8, 0, 0, 0)
        xF = VehicleState(8, 0, 0, 0)
        obstacles = [box(-1, -4, 1, 0.5)]
        path = plan_coarse_path(obstacles, FOOTPRINT, x0, xF, LIMITS)
        audit_path(path, obstacles)

    def test_deterministic(self):
        x0 = VehicleState(-6, 1, 0, 0.3)
        xF = VehicleState(6, -1, 0, 0)
        obstacles = [box(-1, -3, 1, 1)]
        p1 = plan_coarse_path(obstacles, FOOTPRINT, x0, xF, LIMITS)
        p2 = plan_coarse_path(obstacles, FOOTPRINT, x0, xF, LIMITS)
        assert p1 == p2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GridConfig(steering_samples=4)
        with pytest.raises(ValueError):
            GridConfig(xy_resolution=0.0)


class TestPartitionByGear:
    def make(self, gears):
        return [CoarsePathPoint(float(i), 0.0, 0.0, g) for i, g in enumerate(gears)]

    def test_all_forward(self):
        segs = partition_by_gear(self.make([Gear.FORWARD] * 4))
        assert len(segs) == 1 and len(segs[0].points) == 4

    def test_runs(self):
        path = self.make([Gear.FORWARD, Gear.FORWARD, Gear.REVERSE,
                          Gear.REVERSE, Gear.FORWARD])
        segs = partition_by_gear(path)
        assert [len(s.points) for s in segs] == [2, 2, 1]
        assert [s.gear for s in segs] == [Gear.FORWARD, Gear.REVERSE, Gear.FORWARD]
        # concatenation reproduces the input
        flat = [p for s in segs for p in s.points]
        assert flat == path

    def test_empty(self):
        with pytest.raises(EmptyPath):
            partition_by_gear([])

    def test_recount_on_planned_path(self):
        # parallel-parking-like maneuver likely to include gear changes
        x0 = VehicleState(0, 0, 0, 0)
        xF = VehicleState(-5, 0, 0, 0)
        obstacles = [box(4.5, -2, 6.5, 2)]
        path = plan_coarse_path(obstacles, FOOTPRINT, x0, xF, LIMITS)
        changes = sum(1 for a, b in zip(path, path[1:]) if a.gear is not b.gear)
        segs = partition_by_gear(path)
        assert len(segs) == changes + 1
        for s0, s1 in zip(segs, segs[1:]):
            assert s0.gear is not s1.gear
