"""Convex polygon primitives used by the planner.

Obstacles and the vehicle footprint are convex polygons stored in halfspace
form (A z <= b with unit-norm rows).  A brute-force polygon distance serves
as the independent oracle against which dual distance certificates are
checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_NORMAL_TOL = 1e-12


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class TooFewVertices(GeometryError):
    pass


class CollinearVertices(GeometryError):
    pass


class NonConvex(GeometryError):
    pass


class ZeroLengthSegment(GeometryError):
    pass


class ObstacleKind(Enum):
    BOUNDARY_A = "boundary_a"   # road / region-of-interest boundary pieces
    AGENT_B = "agent_b"         # vehicles, pedestrians, parked cars


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConvexObstacle:
    """Nonempty bounded polygon {z : normals @ z <= offsets}.

    Rows of ``normals`` are outward unit vectors; there are at least three
    halfspaces.
    """

    normals: np.ndarray
    offsets: np.ndarray
    kind: ObstacleKind = ObstacleKind.AGENT_B

    def __post_init__(self):
        normals = _freeze(np.atleast_2d(self.normals))
        offsets = _freeze(np.atleast_1d(self.offsets))
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        if normals.ndim != 2 or normals.shape[1] != 2 or normals.shape[0] != offsets.shape[0]:
            raise GeometryError("normals must be (n, 2) matching offsets (n,)")
        if normals.shape[0] < 3:
            raise TooFewVertices("a bounded polygon needs at least 3 halfspaces")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise GeometryError("normals must be unit length")
        if not np.all(np.isfinite(offsets)):
            raise GeometryError("offsets must be finite")

    @property
    def num_edges(self) -> int:
        return self.normals.shape[0]

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.normals @ np.asarray(point, float) <= self.offsets + tol))

    def vertices(self) -> np.ndarray:
        """Recover the CCW vertex list by intersecting angularly adjacent edges."""
        angles = np.arctan2(self.normals[:, 1], self.normals[:, 0])
        order = np.argsort(angles, kind="stable")
        n = len(order)
        verts = []
        for i in range(n):
            a0, b0 = self.normals[order[i]], self.offsets[order[i]]
            a1, b1 = self.normals[order[(i + 1) % n]], self.offsets[order[(i + 1) % n]]
            det = a0[0] * a1[1] - a0[1] * a1[0]
            if abs(det) < _NORMAL_TOL:
                raise GeometryError("parallel adjacent halfspaces; polygon unbounded or degenerate")
            x = (b0 * a1[1] - b1 * a0[1]) / det
            y = (a0[0] * b1 - a1[0] * b0) / det
            verts.append((x, y))
        out = np.array(verts)
        # vertex i lies on edges order[i] and order[i+1]; shift so the list is CCW
        return out


def polygon_from_vertices(vertices, kind: ObstacleKind = ObstacleKind.AGENT_B) -> ConvexObstacle:
    """Build the halfspace form of a strictly convex CCW vertex list.

    Edge i runs from vertex i to vertex i+1; its outward normal is the edge
    direction rotated -90 degrees.
    """
    pts = np.array([[p.x, p.y] if isinstance(p, Point2) else [p[0], p[1]] for p in vertices], float)
    if pts.shape[0] < 3:
        raise TooFewVertices(f"need >= 3 vertices, got {pts.shape[0]}")
    n = pts.shape[0]
    normals = np.zeros((n, 2))
    offsets = np.zeros(n)
    for i in range(n):
        p0 = pts[i]
        p1 = pts[(i + 1) % n]
        p2 = pts[(i + 2) % n]
        e0 = p1 - p0
        e1 = p2 - p1
        cross = e0[0] * e1[1] - e0[1] * e1[0]
        if abs(cross) <= 1e-12 * max(1.0, np.linalg.norm(e0) * np.linalg.norm(e1)):
            raise CollinearVertices(f"vertices {i}, {i+1}, {i+2} are collinear")
        if cross < 0:
            raise NonConvex("vertices must be in strictly convex CCW order")
        length = np.linalg.norm(e0)
        if length < _NORMAL_TOL:
            raise CollinearVertices(f"duplicate vertex at index {i}")
        normals[i] = np.array([e0[1], -e0[0]]) / length
        offsets[i] = normals[i] @ p0
    return ConvexObstacle(normals=normals, offsets=offsets, kind=kind)


def segment_to_obstacle(p0: Point2, p1: Point2, thickness: float = 0.1,
                        kind: ObstacleKind = ObstacleKind.BOUNDARY_A) -> ConvexObstacle:
    """Thicken a boundary segment into a full-dimensional rectangle.

    The dual distance formulation needs full-dimensional sets, so boundary
    line segments become rectangles of the given thickness centered on the
    segment.
    """
    a = p0.as_array()
    b = p1.as_array()
    d = b - a
    length = np.linalg.norm(d)
    if length < _NORMAL_TOL:
        raise ZeroLengthSegment(f"segment endpoints coincide at ({p0.x}, {p0.y})")
    if thickness <= 0:
        raise GeometryError("thickness must be positive")
    u = d / length
    n = np.array([-u[1], u[0]]) * (thickness / 2.0)
    corners = [a - n, b - n, b + n, a + n]
    e0 = corners[1] - corners[0]
    e1 = corners[2] - corners[1]
    if e0[0] * e1[1] - e0[1] * e1[0] < 0:
        corners = corners[::-1]
    return polygon_from_vertices([Point2(*c) for c in corners], kind=kind)


@dataclass(frozen=True)
class VehicleFootprint:
    """Body-frame rectangle G y <= g, origin at the rear axle, x forward."""

    length: float
    width: float
    rear_axle_to_center: float
    body_normals: np.ndarray = field(init=False)
    body_offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise GeometryError("footprint dimensions must be positive")
        front = self.rear_axle_to_center + self.length / 2.0
        back = self.rear_axle_to_center - self.length / 2.0
        G = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        g = np.array([front, self.width / 2.0, -back, self.width / 2.0])
        object.__setattr__(self, "body_normals", _freeze(G))
        object.__setattr__(self, "body_offsets", _freeze(g))

    def polygon(self) -> ConvexObstacle:
        return ConvexObstacle(normals=self.body_normals, offsets=self.body_offsets)


@dataclass(frozen=True)
class PoseTransform:
    """World pose of the vehicle body: z_world = rotation @ y_body + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _freeze(self.rotation)
        t = _freeze(self.translation)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if R.shape != (2, 2) or t.shape != (2,):
            raise GeometryError("rotation must be 2x2 and translation length 2")
        if abs(np.linalg.det(R) - 1.0) > 1e-9 or np.max(np.abs(R.T @ R - np.eye(2))) > 1e-9:
            raise GeometryError("rotation must be a proper orthonormal matrix")


def pose_transform(state) -> PoseTransform:
    """Rotation/translation of a vehicle state (anything with x_x, x_y, x_phi)."""
    c, s = math.cos(state.x_phi), math.sin(state.x_phi)
    return PoseTransform(rotation=np.array([[c, -s], [s, c]]),
                         translation=np.array([state.x_x, state.x_y]))


def footprint_at(footprint: VehicleFootprint, pose: PoseTransform) -> ConvexObstacle:
    """World-frame polygon of the footprint at the given pose."""
    R, t = pose.rotation, pose.translation
    A = footprint.body_normals @ R.T
    b = footprint.body_offsets + A @ t
    return ConvexObstacle(normals=A, offsets=b)


def _project(vertices: np.ndarray, axis: np.ndarray):
    proj = vertices @ axis
    return proj.min(), proj.max()


def polygons_intersect(P: ConvexObstacle, Q: ConvexObstacle, tol: float = 0.0) -> bool:
    """Separating-axis test on the edge normals of both polygons."""
    vp, vq = P.vertices(), Q.vertices()
    for axis in np.vstack([P.normals, Q.normals]):
        pmin, pmax = _project(vp, axis)
        qmin, qmax = _project(vq, axis)
        if pmax < qmin - tol or qmax < pmin - tol:
            return False
    return True


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    den = d @ d
    if den < _NORMAL_TOL:
        return float(np.linalg.norm(p - a))
    t = np.clip((p - a) @ d / den, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def polygon_distance(P: ConvexObstacle, Q: ConvexObstacle) -> float:
    """Euclidean set distance, 0 if the polygons intersect.

    Brute force over every vertex-edge pair of both polygons; used as the
    trusted oracle for dual distance certificates.
    """
    if polygons_intersect(P, Q):
        return 0.0
    vp, vq = P.vertices(), Q.vertices()
    best = math.inf
    np_, nq = len(vp), len(vq)
    for i in range(np_):
        for j in range(nq):
            best = min(best, _point_segment_distance(vp[i], vq[j], vq[(j + 1) % nq]))
            best = min(best, _point_segment_distance(vq[j], vp[i], vp[(i + 1) % np_]))
    return best
