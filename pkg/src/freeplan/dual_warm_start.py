"""Dual-variable warm start for the collision-avoidance MPC.

The distance between the posed vehicle rectangle and each obstacle has a
dual certificate (lambda, mu, d).  Rather than solving the exact
norm-constrained program, a relaxed QP penalizes ||A' lambda||^2 and is
solved independently per (obstacle, step) block; a positive scaling then
restores feasibility of the norm constraint without breaking the two
equality constraints (they are homogeneous in (lambda, mu, d)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ConvexObstacle, VehicleFootprint, footprint_at, pose_transform
from .qp import QpReport, QpStatus, QuadraticProgram, solve_qp, solve_qp_with_duals

EPS_D = 1e-6


class EmptyObstacleSet(ValueError):
    pass


class PropositionViolated(AssertionError):
    pass


@dataclass(frozen=True)
class DualWarmStart:
    """Per-(obstacle m, step k) dual variables; lam[m][k] has one entry per edge."""

    lam: Tuple[Tuple[np.ndarray, ...], ...]
    mu: Tuple[Tuple[np.ndarray, ...], ...]
    d: np.ndarray                       # (M, K+1), each entry <= -EPS_D
    reports: Tuple[QpReport, ...] = ()

    @property
    def num_obstacles(self) -> int:
        return len(self.lam)

    @property
    def num_steps(self) -> int:
        return self.d.shape[1]


@dataclass(frozen=True)
class DualBlock:
    """One (m, k) block of the relaxed QP; variables are [lambda, mu, d]."""

    m: int
    k: int
    qp: QuadraticProgram
    n_edges: int


@dataclass(frozen=True)
class RelaxedDualQp:
    blocks: Tuple[DualBlock, ...]
    num_obstacles: int
    num_steps: int
    beta: float


def _pose_data(state, footprint: VehicleFootprint):
    pose = pose_transform(state)
    return pose.rotation, pose.translation


def build_relaxed_dual_qp(warm_states: Sequence, obstacles: Sequence[ConvexObstacle],
                          footprint: VehicleFootprint, beta: float = 1.0) -> RelaxedDualQp:
    """Relaxed dual QP: min (1/beta) sum ||A'lam||^2 + sum d, per-block separable.

    Equalities per block:  -g'mu + (A t - b)'lam + d = 0  and
    G'mu + R'A'lam = 0; signs lam, mu >= 0 and d <= -EPS_D.
    """
    if not obstacles:
        raise EmptyObstacleSet("need at least one obstacle for the dual warm start")
    if beta <= 0:
        raise ValueError("beta must be positive")
    G = footprint.body_normals
    g = footprint.body_offsets
    blocks: List[DualBlock] = []
    for m, obs in enumerate(obstacles):
        A, b = obs.normals, obs.offsets
        n = A.shape[0]
        nv = n + 4 + 1
        P = np.zeros((nv, nv))
        P[:n, :n] = (2.0 / beta) * (A @ A.T)
        q = np.zeros(nv)
        q[-1] = 1.0
        for k, state in enumerate(warm_states):
            R, t = _pose_data(state, footprint)
            A_eq = np.zeros((3, nv))
            A_eq[0, :n] = A @ t - b
            A_eq[0, n:n + 4] = -g
            A_eq[0, -1] = 1.0
            A_eq[1:3, :n] = (R.T @ A.T)
            A_eq[1:3, n:n + 4] = G.T
            b_eq = np.zeros(3)
            A_in = np.eye(nv)
            lower = np.zeros(nv)
            upper = np.full(nv, np.inf)
            lower[-1] = -np.inf
            upper[-1] = -EPS_D
            qp = QuadraticProgram(P=P, q=q, A_eq=A_eq, b_eq=b_eq,
                                  A_in=A_in, lower=lower, upper=upper)
            blocks.append(DualBlock(m=m, k=k, qp=qp, n_edges=n))
    return RelaxedDualQp(blocks=tuple(blocks), num_obstacles=len(obstacles),
                         num_steps=len(list(warm_states)), beta=beta)


def solve_dual_warm_start(relaxed: RelaxedDualQp) -> DualWarmStart:
    """Solve every block; assembly order is (m, k) regardless of solve order."""
    M, K1 = relaxed.num_obstacles, relaxed.num_steps
    lam: List[List[Optional[np.ndarray]]] = [[None] * K1 for _ in range(M)]
    mu: List[List[Optional[np.ndarray]]] = [[None] * K1 for _ in range(M)]
    d = np.zeros((M, K1))
    reports = []
    for blk in relaxed.blocks:
        x, report = solve_qp(blk.qp)
        if report.status is not QpStatus.OPTIMAL:
            raise RuntimeError(
                f"dual warm-start block (m={blk.m}, k={blk.k}) ended {report.status}")
        n = blk.n_edges
        lam[blk.m][blk.k] = np.maximum(x[:n], 0.0)
        mu[blk.m][blk.k] = np.maximum(x[n:n + 4], 0.0)
        d[blk.m, blk.k] = min(x[-1], -EPS_D)
        reports.append(report)
    return DualWarmStart(lam=tuple(tuple(row) for row in lam),
                         mu=tuple(tuple(row) for row in mu),
                         d=d, reports=tuple(reports))


def scale_to_feasible(dual: DualWarmStart, obstacles: Sequence[ConvexObstacle]) -> DualWarmStart:
    """If ||A'lam|| > 1 for a block, scale (lam, mu, d) jointly by its inverse.

    Both equality constraints are homogeneous of degree one in (lam, mu, d),
    so the scaled block stays feasible and additionally satisfies the norm
    bound required by the exact dual formulation.
    """
    lam_out, mu_out = [], []
    d_out = dual.d.copy()
    for m, obs in enumerate(obstacles):
        A = obs.normals
        lrow, murow = [], []
        for k in range(dual.num_steps):
            lam = dual.lam[m][k]
            mu = dual.mu[m][k]
            nrm = float(np.linalg.norm(A.T @ lam))
            if nrm > 1.0:
                s = 1.0 / nrm
                lam = lam * s
                mu = mu * s
                d_out[m, k] = min(d_out[m, k] * s, -EPS_D)
            lrow.append(lam)
            murow.append(mu)
        lam_out.append(tuple(lrow))
        mu_out.append(tuple(murow))
    return DualWarmStart(lam=tuple(lam_out), mu=tuple(mu_out), d=d_out,
                         reports=dual.reports)


def dual_residuals(dual: DualWarmStart, warm_states: Sequence,
                   obstacles: Sequence[ConvexObstacle],
                   footprint: VehicleFootprint) -> Dict[str, float]:
    """Max residuals of the exact dual constraints over all blocks."""
    G = footprint.body_normals
    g = footprint.body_offsets
    eq1 = eq2 = norm_excess = sign = 0.0
    for m, obs in enumerate(obstacles):
        A, b = obs.normals, obs.offsets
        for k, state in enumerate(warm_states):
            R, t = _pose_data(state, footprint)
            lam = dual.lam[m][k]
            mu = dual.mu[m][k]
            d = dual.d[m, k]
            eq1 = max(eq1, abs(-g @ mu + (A @ t - b) @ lam + d))
            eq2 = max(eq2, float(np.max(np.abs(G.T @ mu + R.T @ (A.T @ lam)))))
            norm_excess = max(norm_excess, float(np.linalg.norm(A.T @ lam)) - 1.0)
            sign = max(sign, float(-min(lam.min(initial=0.0), mu.min(initial=0.0), 0.0)))
    return {"equality_scalar": eq1, "equality_vector": eq2,
            "norm_excess": max(norm_excess, 0.0), "sign_violation": sign}


def relaxed_objective(dual: DualWarmStart, obstacles: Sequence[ConvexObstacle],
                      beta: float) -> float:
    """Recompute the relaxed QP objective from assembled variables."""
    total = 0.0
    for m, obs in enumerate(obstacles):
        A = obs.normals
        for k in range(dual.num_steps):
            total += float(np.linalg.norm(A.T @ dual.lam[m][k]) ** 2) / beta
            total += dual.d[m, k]
    return total


def max_certificate(state, obstacle: ConvexObstacle,
                    footprint: VehicleFootprint) -> Tuple[np.ndarray, np.ndarray, float]:
    """Maximized dual certificate of one (state, obstacle) pair.

    Solves the primal closest-points QP between the posed footprint and the
    obstacle; its multipliers, normalized by the distance, achieve
    -g'mu + (A t - b)'lam equal to the separation distance with
    ||A'lam|| = 1.  Requires strictly positive separation.
    """
    pose = pose_transform(state)
    world = footprint_at(footprint, pose)
    A_e, b_e = world.normals, world.offsets
    A_o, b_o = obstacle.normals, obstacle.offsets
    P = np.zeros((4, 4))
    P[:2, :2] = np.eye(2)
    P[2:, 2:] = np.eye(2)
    P[:2, 2:] = -np.eye(2)
    P[2:, :2] = -np.eye(2)
    ne, no = A_e.shape[0], A_o.shape[0]
    A_in = np.zeros((ne + no, 4))
    A_in[:ne, :2] = A_e
    A_in[ne:, 2:] = A_o
    lower = np.full(ne + no, -np.inf)
    upper = np.concatenate([b_e, b_o])
    qp = QuadraticProgram(P=P, q=np.zeros(4), A_in=A_in, lower=lower, upper=upper)
    z, y, report = solve_qp_with_duals(qp)
    if report.status is not QpStatus.OPTIMAL:
        raise RuntimeError(f"closest-point QP ended {report.status}")
    dist = float(np.linalg.norm(z[:2] - z[2:]))
    if dist <= 1e-9:
        raise ValueError("certificate undefined for touching or overlapping sets")
    y = np.maximum(y, 0.0)
    # the posed footprint rows are the body rows rotated in order, so the
    # multipliers transfer directly to the body-frame formulation
    mu = y[:ne] / dist
    lam = y[ne:] / dist
    cert = float(-footprint.body_offsets @ mu
                 + (A_o @ pose.translation - b_o) @ lam)
    return lam, mu, cert


def check_propositions(qcqp_sum_d: float, scaled: DualWarmStart,
                       obstacles: Sequence[ConvexObstacle],
                       warm_states: Sequence, footprint: VehicleFootprint,
                       beta: float, tol: float = 1e-8) -> Dict[str, float]:
    """Verify the two warm-start propositions on a solved instance.

    ``qcqp_sum_d`` is the exact optimum sum of d over blocks (equal to minus
    the sum of geometric distances).  Checks that the scaled solution is
    feasible for the exact dual program (the first proposition) and the
    chain qcqp_sum_d <= sum d <= (1/beta) sum ||A'lam||^2 + sum d on the
    scaled solution (the second).
    """
    res = dual_residuals(scaled, warm_states, obstacles, footprint)
    if res["equality_scalar"] > 1e-8 or res["equality_vector"] > 1e-8:
        raise PropositionViolated(f"scaled duals infeasible: {res}")
    if res["norm_excess"] > 1e-9 or res["sign_violation"] > 0:
        raise PropositionViolated(f"scaled duals violate cone constraints: {res}")
    sum_d_scaled = float(scaled.d.sum())
    relaxed_obj = relaxed_objective(scaled, obstacles, beta)
    if qcqp_sum_d > sum_d_scaled + tol:
        raise PropositionViolated(
            f"chain broken: qcqp {qcqp_sum_d} > scaled sum d {sum_d_scaled}")
    if sum_d_scaled > relaxed_obj + tol:
        raise PropositionViolated(
            f"chain broken: scaled sum d {sum_d_scaled} > relaxed objective {relaxed_obj}")
    return {"qcqp_sum_d": qcqp_sum_d, "sum_d_scaled": sum_d_scaled,
            "relaxed_objective": relaxed_obj, **res}
