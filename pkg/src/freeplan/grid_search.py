"""Hybrid A* coarse planner: gear-aware, collision-free geometric paths.

Search states live on an (x, y, heading, gear) lattice expanded with
fixed-length arc primitives.  The heuristic is the max of an
obstacle-aware 2D grid distance (ignoring heading) and the Reeds-Shepp
length (ignoring obstacles); an analytic Reeds-Shepp expansion toward the
goal finishes searches early.  Tie-breaking is total, so searches are
deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import reeds_shepp as rs
from .geometry import ConvexObstacle, VehicleFootprint
from .vehicle import VehicleLimits, VehicleState

TWO_PI = 2.0 * math.pi


class SearchError(RuntimeError):
    pass


class NoPathFound(SearchError):
    pass


class StartInCollision(SearchError):
    pass


class GoalInCollision(SearchError):
    pass


class EmptyPath(ValueError):
    pass


class Gear(Enum):
    FORWARD = 1
    REVERSE = -1


@dataclass(frozen=True)
class CoarsePathPoint:
    x: float
    y: float
    phi: float
    gear: Gear


@dataclass(frozen=True)
class GearSegment:
    gear: Gear
    points: Tuple[CoarsePathPoint, ...]


@dataclass(frozen=True)
class GridConfig:
    xy_resolution: float = 0.5
    phi_resolution: float = math.radians(15.0)
    primitive_arc: float = 0.5
    steering_samples: int = 7
    reverse_penalty: float = 1.5
    gear_switch_penalty: float = 3.0
    analytic_expansion: bool = True
    safety_margin: float = 0.05   # extra clearance required during search

    def __post_init__(self):
        if self.xy_resolution <= 0 or self.phi_resolution <= 0 or self.primitive_arc <= 0:
            raise ValueError("resolutions and primitive arc must be positive")
        if self.steering_samples < 3 or self.steering_samples % 2 == 0:
            raise ValueError("steering_samples must be odd and >= 3")


# ---------------------------------------------------------------------------
# collision checking


class CollisionChecker:
    """Separating-axis footprint-vs-polygon tests with precomputed obstacle data."""

    def __init__(self, obstacles: Sequence[ConvexObstacle], footprint: VehicleFootprint,
                 margin: float = 0.0):
        self.margin = margin
        self.obstacles = list(obstacles)
        self._verts = [o.vertices() for o in self.obstacles]
        self._normals = [o.normals for o in self.obstacles]
        self._offsets = [o.offsets for o in self.obstacles]
        fp = footprint.polygon().vertices()
        self._body = fp  # (4, 2) CCW corners in body frame
        centers = np.mean(fp, axis=0)
        self._body_radius = float(np.max(np.linalg.norm(fp - centers, axis=1)))
        self._body_center = centers
        self._obs_centers = [v.mean(axis=0) for v in self._verts]
        self._obs_radii = [float(np.max(np.linalg.norm(v - c, axis=1)))
                           for v, c in zip(self._verts, self._obs_centers)]

    def collides(self, x: float, y: float, phi: float) -> bool:
        c, s = math.cos(phi), math.sin(phi)
        R = np.array([[c, -s], [s, c]])
        corners = self._body @ R.T + np.array([x, y])
        center = R @ self._body_center + np.array([x, y])
        axes_fp = R  # columns are the rectangle axes
        m = self.margin
        for verts, normals, offsets, oc, orad in zip(
                self._verts, self._normals, self._offsets, self._obs_centers, self._obs_radii):
            if np.linalg.norm(center - oc) > self._body_radius + orad + m:
                continue
            separated = False
            # obstacle edge normals
            proj = corners @ normals.T - offsets
            if np.any(proj.min(axis=0) > m):
                separated = True
            if not separated:
                # footprint axes
                for axis in (axes_fp[:, 0], axes_fp[:, 1]):
                    pc = corners @ axis
                    pv = verts @ axis
                    if pv.min() - pc.max() > m or pc.min() - pv.max() > m:
                        separated = True
                        break
            if not separated:
                return True
        return False

    def path_collides(self, poses) -> bool:
        return any(self.collides(px, py, pphi) for px, py, pphi, *_ in poses)


# ---------------------------------------------------------------------------
# 2D obstacle-aware distance heuristic


class GridDistanceField:
    """8-connected Dijkstra distance-to-goal over the xy grid, ignoring heading."""

    def __init__(self, obstacles: Sequence[ConvexObstacle], goal_xy, resolution: float,
                 bounds: Tuple[float, float, float, float]):
        self.res = resolution
        x0, y0, x1, y1 = bounds
        self.x0, self.y0 = x0, y0
        self.nx = max(2, int(math.ceil((x1 - x0) / resolution)) + 1)
        self.ny = max(2, int(math.ceil((y1 - y0) / resolution)) + 1)
        xs = x0 + resolution * np.arange(self.nx)
        ys = y0 + resolution * np.arange(self.ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        blocked = np.zeros(len(pts), bool)
        for obs in obstacles:
            inside = np.all(pts @ obs.normals.T <= obs.offsets + 1e-12, axis=1)
            blocked |= inside
        self.blocked = blocked.reshape(self.nx, self.ny)
        self.dist = np.full((self.nx, self.ny), np.inf)
        gi, gj = self.index(*goal_xy)
        if not self.blocked[gi, gj]:
            self._dijkstra(gi, gj)

    def index(self, x: float, y: float) -> Tuple[int, int]:
        i = int(np.clip(round((x - self.x0) / self.res), 0, self.nx - 1))
        j = int(np.clip(round((y - self.y0) / self.res), 0, self.ny - 1))
        return i, j

    def _dijkstra(self, gi: int, gj: int):
        nbrs = [(di, dj, math.hypot(di, dj) * self.res)
                for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
        self.dist[gi, gj] = 0.0
        heap = [(0.0, gi, gj)]
        while heap:
            d, i, j = heapq.heappop(heap)
            if d > self.dist[i, j]:
                continue
            for di, dj, w in nbrs:
                ni, nj = i + di, j + dj
                if 0 <= ni < self.nx and 0 <= nj < self.ny and not self.blocked[ni, nj]:
                    nd = d + w
                    if nd < self.dist[ni, nj]:
                        self.dist[ni, nj] = nd
                        heapq.heappush(heap, (nd, ni, nj))

    def __call__(self, x: float, y: float) -> float:
        i, j = self.index(x, y)
        return float(self.dist[i, j])


# ---------------------------------------------------------------------------
# search


@dataclass
class _Node:
    x: float
    y: float
    phi: float
    gear: Optional[Gear]
    g: float
    parent: Optional[int]          # index into the closed list
    trace: List[Tuple[float, float, float]]  # poses from parent to here (exclusive of parent)


def _wrap_index(phi: float, res: float) -> int:
    return int(round((phi % TWO_PI) / res)) % max(1, int(round(TWO_PI / res)))


def plan_coarse_path(obstacles: Sequence[ConvexObstacle], footprint: VehicleFootprint,
                     x0: VehicleState, xF: VehicleState, limits: VehicleLimits,
                     grid_config: GridConfig = GridConfig(),
                     distance_field: Optional[GridDistanceField] = None,
                     max_expansions: int = 200000) -> List[CoarsePathPoint]:
    """Search a collision-free, curvature-bounded path from x0 to xF poses.

    Returns densely sampled path points tagged with gear.  Raises
    StartInCollision / GoalInCollision / NoPathFound.
    """
    cfg = grid_config
    checker = CollisionChecker(obstacles, footprint, margin=cfg.safety_margin)
    if checker.collides(x0.x_x, x0.x_y, x0.x_phi):
        raise StartInCollision("start pose intersects an obstacle")
    if checker.collides(xF.x_x, xF.x_y, xF.x_phi):
        raise GoalInCollision("goal pose intersects an obstacle")

    r_min = limits.wheelbase / math.tan(limits.delta_max)
    goal = (xF.x_x, xF.x_y, xF.x_phi)

    if distance_field is None:
        pts = [np.array([x0.x_x, x0.x_y]), np.array([xF.x_x, xF.x_y])]
        for o in obstacles:
            pts.append(o.vertices().min(axis=0))
            pts.append(o.vertices().max(axis=0))
        lo = np.min(pts, axis=0) - 5.0
        hi = np.max(pts, axis=0) + 5.0
        distance_field = GridDistanceField(obstacles, (xF.x_x, xF.x_y), cfg.xy_resolution,
                                           (lo[0], lo[1], hi[0], hi[1]))

    def heuristic(x, y, phi):
        h2d = distance_field(x, y)
        hrs = rs.path_length((x, y, phi), goal, r_min)
        if math.isinf(h2d):
            return hrs
        return max(h2d, hrs)

    motion_res = min(0.25, cfg.primitive_arc / 2.0)
    steers = np.linspace(-limits.delta_max, limits.delta_max, cfg.steering_samples)

    def primitive(x, y, phi, steer, direction):
        """Sample poses along one arc primitive; returns list incl. endpoint."""
        kappa = math.tan(steer) / limits.wheelbase
        n = max(2, int(math.ceil(cfg.primitive_arc / motion_res)))
        ds = cfg.primitive_arc / n * direction
        poses = []
        for _ in range(n):
            if abs(kappa) < 1e-12:
                x += ds * math.cos(phi)
                y += ds * math.sin(phi)
            else:
                radius = 1.0 / kappa
                cx = x - radius * math.sin(phi)
                cy = y + radius * math.cos(phi)
                phi += ds * kappa
                x = cx + radius * math.sin(phi)
                y = cy - radius * math.cos(phi)
            poses.append((x, y, phi))
        return poses

    def key(x, y, phi, gear):
        return (int(round(x / cfg.xy_resolution)), int(round(y / cfg.xy_resolution)),
                _wrap_index(phi, cfg.phi_resolution), gear)

    start = _Node(x0.x_x, x0.x_y, x0.x_phi, None, 0.0, None, [])
    closed: List[_Node] = []
    best_g: Dict[tuple, float] = {}
    counter = 0
    h0 = heuristic(start.x, start.y, start.phi)
    heap = [(h0, h0, counter, start)]
    pops = 0
    goal_xy_tol = cfg.xy_resolution
    goal_phi_tol = cfg.phi_resolution

    def at_goal(n: _Node) -> bool:
        return (math.hypot(n.x - goal[0], n.y - goal[1]) <= goal_xy_tol
                and abs(math.remainder(n.phi - goal[2], TWO_PI)) <= goal_phi_tol)

    def reconstruct(n: _Node, extra=None) -> List[CoarsePathPoint]:
        chain: List[_Node] = []
        cur: Optional[_Node] = n
        while cur is not None:
            chain.append(cur)
            cur = closed[cur.parent] if cur.parent is not None else None
        chain.reverse()
        out: List[CoarsePathPoint] = []
        first_gear = next((c.gear for c in chain if c.gear is not None), Gear.FORWARD)
        out.append(CoarsePathPoint(chain[0].x, chain[0].y, chain[0].phi, first_gear))
        for c in chain[1:]:
            for (px, py, pphi) in c.trace:
                out.append(CoarsePathPoint(px, py, pphi, c.gear))
        if extra is not None:
            for (px, py, pphi, d) in extra[1:]:
                out.append(CoarsePathPoint(px, py, pphi,
                                           Gear.FORWARD if d > 0 else Gear.REVERSE))
        return out

    while heap:
        f, h, _, node = heapq.heappop(heap)
        k = key(node.x, node.y, node.phi, node.gear)
        if k in best_g and node.g > best_g[k] + 1e-12:
            continue
        node_idx = len(closed)
        closed.append(node)
        pops += 1
        if pops > max_expansions:
            break

        if at_goal(node):
            return reconstruct(node)

        # analytic expansion toward the exact goal pose
        if cfg.analytic_expansion and pops % 5 == 1:
            path = rs.shortest_path((node.x, node.y, node.phi), goal, r_min)
            if path is not None:
                samples = rs.sample_path((node.x, node.y, node.phi), path, r_min, motion_res)
                if not checker.path_collides(samples):
                    return reconstruct(node, extra=samples)

        for direction in (1, -1):
            gear = Gear.FORWARD if direction > 0 else Gear.REVERSE
            for steer in steers:
                poses = primitive(node.x, node.y, node.phi, steer, direction)
                if any(checker.collides(px, py, pphi) for px, py, pphi in poses):
                    continue
                ex, ey, ephi = poses[-1]
                cost = cfg.primitive_arc * (cfg.reverse_penalty if direction < 0 else 1.0)
                if node.gear is not None and gear is not node.gear:
                    cost += cfg.gear_switch_penalty
                g = node.g + cost
                nk = key(ex, ey, ephi, gear)
                if nk in best_g and g >= best_g[nk] - 1e-12:
                    continue
                best_g[nk] = g
                nh = heuristic(ex, ey, ephi)
                if math.isinf(nh):
                    continue
                counter += 1
                heapq.heappush(heap, (g + nh, nh, counter,
                                      _Node(ex, ey, ephi, gear, g, node_idx, poses)))

    raise NoPathFound(f"search exhausted after {pops} expansions")


def partition_by_gear(path: Sequence[CoarsePathPoint]) -> List[GearSegment]:
    """Run-length partition; concatenating the segments reproduces the input."""
    if not path:
        raise EmptyPath("cannot partition an empty path")
    segments: List[GearSegment] = []
    run: List[CoarsePathPoint] = [path[0]]
    for p in path[1:]:
        if p.gear is run[-1].gear:
            run.append(p)
        else:
            segments.append(GearSegment(run[-1].gear, tuple(run)))
            run = [p]
    segments.append(GearSegment(run[-1].gear, tuple(run)))
    return segments
