"""Direct-transcription MPC over states, controls, and collision duals.

Two problem forms share one transcription: the original hard-constrained
program (hard terminal state, collision certificate >= d_min) used by the
Base and TD ablations, and the reformulated program where each certificate
gets a slack distance d_m(k) driven negative through the cost and the
terminal state becomes a soft quadratic penalty.  The NLP is solved by the
interior-point method in :mod:`freeplan.nlp` with analytic first and
second derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .dual_warm_start import EPS_D, DualWarmStart
from .geometry import ConvexObstacle, VehicleFootprint, footprint_at, pose_transform
from .nlp import NlpProblem, NlpResult, NlpStatus, solve_nlp
from .speed_profile import WarmStartTrajectory
from .vehicle import ControlInput, VehicleLimits, VehicleState, check_limits, step_dynamics


class MpcMode(Enum):
    BASE = "base"
    TD = "td"
    TDR = "tdr"


class DimensionMismatch(ValueError):
    pass


class ModeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MpcConfig:
    alpha_x: float = 0.0
    alpha_xp: float = 1.0
    alpha_u: float = 1.0
    alpha_utilde: float = 5.0
    alpha_e: float = 100.0
    beta: float = 1.0
    K: int = 160
    d_min: float = 0.1
    kkt_tol: float = 1e-6
    max_iter: int = 150
    mode: MpcMode = MpcMode.TDR

    def __post_init__(self):
        if min(self.alpha_x, self.alpha_xp, self.alpha_u, self.alpha_utilde) < 0:
            raise ValueError("weights must be nonnegative")
        if self.mode is MpcMode.TDR and (self.alpha_e <= 0 or self.beta <= 0):
            raise ValueError("alpha_e and beta must be positive in the slack mode")
        if self.K < 2:
            raise ValueError("K must be >= 2")


@dataclass
class MpcReport:
    status: NlpStatus
    iterations: int
    kkt_residuals: Dict[str, float]
    wall_time: float
    objective: float


@dataclass
class MpcSolution:
    states: Tuple[VehicleState, ...]
    controls: Tuple[ControlInput, ...]
    duals: DualWarmStart
    report: MpcReport
    dt: float


def evaluate_cost(states: Sequence[VehicleState], controls: Sequence[ControlInput],
                  d: Optional[np.ndarray], config: MpcConfig, x_F: VehicleState,
                  u_prev: Optional[Sequence[ControlInput]] = None) -> float:
    """Smoothness + terminal + slack cost; the independent reference evaluator.

    ``u_prev`` supplies the reference controls u-tilde: a full previous
    sequence (replanning) or a single control used only for the first step;
    absent, the first step is compared against the zero control and later
    steps against their predecessor (a control-rate penalty).
    """
    K = len(controls)
    if len(states) != K + 1:
        raise DimensionMismatch(f"{len(states)} states for {K} controls")
    sv = np.array([[s.x_x, s.x_y, s.x_v, s.x_phi] for s in states])
    uv = np.array([[c.delta, c.a] for c in controls])
    if u_prev is not None and len(u_prev) == K:
        ut = np.array([[c.delta, c.a] for c in u_prev])
    else:
        ut = np.vstack([np.zeros((1, 2)), uv[:-1]])
        if u_prev is not None and len(u_prev) >= 1:
            ut[0] = [u_prev[0].delta, u_prev[0].a]
    cost = 0.0
    cost += config.alpha_x * float(np.sum(sv[1:] ** 2))
    cost += config.alpha_xp * float(np.sum((sv[1:] - sv[:-1]) ** 2))
    cost += config.alpha_u * float(np.sum(uv ** 2))
    cost += config.alpha_utilde * float(np.sum((uv - ut) ** 2))
    if config.mode is MpcMode.TDR:
        xf = np.array([x_F.x_x, x_F.x_y, x_F.x_v, x_F.x_phi])
        cost += config.alpha_e * float(np.sum((sv[-1] - xf) ** 2))
        if d is not None:
            cost += config.beta * float(np.sum(d))
    return cost


def _constant_duals(obstacles: Sequence[ConvexObstacle], K: int,
                    value: float = 0.1) -> DualWarmStart:
    """Uniform dual initialization (the Base-mode ablation's warm start)."""
    lam, mu = [], []
    d = np.zeros((len(obstacles), K + 1))
    for m, obs in enumerate(obstacles):
        n = obs.num_edges
        lam.append(tuple(np.full(n, value) for _ in range(K + 1)))
        mu.append(tuple(np.full(4, value) for _ in range(K + 1)))
        d[m, :] = -value
    return DualWarmStart(lam=tuple(lam), mu=tuple(mu), d=d)


class MpcNlp:
    """Transcribed NLP with variable indexing and derivative assembly."""

    def __init__(self, x0: VehicleState, x_F: VehicleState, warm: WarmStartTrajectory,
                 duals: Optional[DualWarmStart], obstacles: Sequence[ConvexObstacle],
                 footprint: VehicleFootprint, limits: VehicleLimits, config: MpcConfig):
        K = config.K
        if len(warm.states) != K + 1 or len(warm.controls) != K:
            raise DimensionMismatch(
                f"warm start has {len(warm.states)} states for K={K}")
        if duals is None:
            if config.mode is not MpcMode.BASE:
                raise ModeMismatch("dual warm start required outside Base mode")
            duals = _constant_duals(obstacles, K)
        self.config = config
        self.x0 = x0
        self.x_F = x_F
        self.warm = warm
        self.obstacles = list(obstacles)
        self.footprint = footprint
        self.limits = limits
        self.dt = warm.dt
        self.K = K
        self.slack_mode = config.mode is MpcMode.TDR

        self.nx = 4 * (K + 1)
        self.nu = 2 * K
        self.edge_counts = [o.num_edges for o in self.obstacles]
        off = self.nx + self.nu
        self.lam0, self.mu0, self.d0 = [], [], []
        for n in self.edge_counts:
            self.lam0.append(off)
            off += n * (K + 1)
            self.mu0.append(off)
            off += 4 * (K + 1)
            if self.slack_mode:
                self.d0.append(off)
                off += K + 1
            else:
                self.d0.append(-1)
        self.n = off
        self.M = len(self.obstacles)

        self.u_ref0 = (np.array([warm.controls[0].delta, warm.controls[0].a])
                       if warm.controls else np.zeros(2))

        self._build_cost()
        self._build_offsets()
        self.z0 = self._initial_point(duals)
        self.problem = NlpProblem(
            n=self.n, objective=self.objective, gradient=self.gradient,
            eq=self.eq, eq_jac=self.eq_jac, ineq=self.ineq, ineq_jac=self.ineq_jac,
            hess_lagrangian=self.hess_lagrangian)

    # -- indexing helpers ---------------------------------------------------

    def ix(self, k: int, j: int) -> int:
        return 4 * k + j

    def iu(self, k: int, j: int) -> int:
        return self.nx + 2 * k + j

    def ilam(self, m: int, k: int, j: int = 0) -> int:
        return self.lam0[m] + self.edge_counts[m] * k + j

    def imu(self, m: int, k: int, j: int = 0) -> int:
        return self.mu0[m] + 4 * k + j

    def idd(self, m: int, k: int) -> int:
        return self.d0[m] + k

    # -- structure ----------------------------------------------------------

    def _build_offsets(self):
        K, M = self.K, self.M
        self.eq_dyn0 = 4                       # after the initial-state rows
        self.eq_term0 = 4 + 4 * K if not self.slack_mode else -1
        base = 4 + 4 * K + (0 if self.slack_mode else 4)
        self.col_rows = 3 if self.slack_mode else 2
        self.eq_col0 = base
        self.m_e = base + self.col_rows * M * (K + 1)

        self.in_u0 = 0
        self.in_v0 = 4 * K
        self.in_rate0 = self.in_v0 + 2 * (K + 1)
        self.in_col0 = self.in_rate0 + 2 * (K - 1)
        # per (m,k): norm, lambda (n_m), mu (4), scalar (Base) or -d (TDR)
        self.block_rows = [1 + n + 4 + 1 for n in self.edge_counts]
        self.in_block0 = []
        off = self.in_col0
        for m in range(M):
            self.in_block0.append(off)
            off += self.block_rows[m] * (K + 1)
        self.m_i = off

    def _build_cost(self):
        """Constant Hessian and the linear/offset pieces of the quadratic cost."""
        cfg = self.config
        n = self.n
        rows, cols, vals = [], [], []
        q = np.zeros(n)

        def add(i, j, v):
            rows.append(i)
            cols.append(j)
            vals.append(v)

        K = self.K
        for k in range(1, K + 1):
            for j in range(4):
                add(self.ix(k, j), self.ix(k, j), 2 * cfg.alpha_x)
        for k in range(1, K + 1):
            for j in range(4):
                a, b = self.ix(k, j), self.ix(k - 1, j)
                add(a, a, 2 * cfg.alpha_xp)
                add(b, b, 2 * cfg.alpha_xp)
                add(a, b, -2 * cfg.alpha_xp)
                add(b, a, -2 * cfg.alpha_xp)
        for k in range(K):
            for j in range(2):
                add(self.iu(k, j), self.iu(k, j), 2 * cfg.alpha_u)
        # u-tilde: first step against the fixed reference, later steps rates
        for j in range(2):
            i0 = self.iu(0, j)
            add(i0, i0, 2 * cfg.alpha_utilde)
            q[i0] += -2 * cfg.alpha_utilde * self.u_ref0[j]
        for k in range(1, K):
            for j in range(2):
                a, b = self.iu(k, j), self.iu(k - 1, j)
                add(a, a, 2 * cfg.alpha_utilde)
                add(b, b, 2 * cfg.alpha_utilde)
                add(a, b, -2 * cfg.alpha_utilde)
                add(b, a, -2 * cfg.alpha_utilde)
        if self.slack_mode:
            xf = np.array([self.x_F.x_x, self.x_F.x_y, self.x_F.x_v, self.x_F.x_phi])
            for j in range(4):
                i = self.ix(K, j)
                add(i, i, 2 * cfg.alpha_e)
                q[i] += -2 * cfg.alpha_e * xf[j]
            for m in range(self.M):
                for k in range(K + 1):
                    q[self.idd(m, k)] += cfg.beta
        self.cost_H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.cost_q = q
        self.cost_c = (cfg.alpha_utilde * float(self.u_ref0 @ self.u_ref0))
        if self.slack_mode:
            xf = np.array([self.x_F.x_x, self.x_F.x_y, self.x_F.x_v, self.x_F.x_phi])
            self.cost_c += cfg.alpha_e * float(xf @ xf)

    def _initial_point(self, duals: DualWarmStart) -> np.ndarray:
        z = np.zeros(self.n)
        for k, s in enumerate(self.warm.states):
            z[self.ix(k, 0)] = s.x_x
            z[self.ix(k, 1)] = s.x_y
            z[self.ix(k, 2)] = s.x_v
            z[self.ix(k, 3)] = s.x_phi
        for k, c in enumerate(self.warm.controls):
            z[self.iu(k, 0)] = c.delta
            z[self.iu(k, 1)] = c.a
        for m in range(self.M):
            n = self.edge_counts[m]
            for k in range(self.K + 1):
                z[self.ilam(m, k):self.ilam(m, k) + n] = np.maximum(duals.lam[m][k], 1e-4)
                z[self.imu(m, k):self.imu(m, k) + 4] = np.maximum(duals.mu[m][k], 1e-4)
                if self.slack_mode:
                    z[self.idd(m, k)] = min(duals.d[m, k], -EPS_D)
        return z

    # -- objective ----------------------------------------------------------

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.cost_H @ z) + self.cost_q @ z + self.cost_c)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return self.cost_H @ z + self.cost_q

    # -- equality constraints ----------------------------------------------

    def eq(self, z: np.ndarray) -> np.ndarray:
        K, dt, L = self.K, self.dt, self.limits.wheelbase
        out = np.zeros(self.m_e)
        x00 = np.array([self.x0.x_x, self.x0.x_y, self.x0.x_v, self.x0.x_phi])
        out[0:4] = z[self.ix(0, 0):self.ix(0, 0) + 4] - x00
        for k in range(K):
            x, y, v, phi = (z[self.ix(k, j)] for j in range(4))
            delta, a = z[self.iu(k, 0)], z[self.iu(k, 1)]
            r = self.eq_dyn0 + 4 * k
            out[r + 0] = z[self.ix(k + 1, 0)] - x - dt * v * math.cos(phi)
            out[r + 1] = z[self.ix(k + 1, 1)] - y - dt * v * math.sin(phi)
            out[r + 2] = z[self.ix(k + 1, 2)] - v - dt * a
            out[r + 3] = z[self.ix(k + 1, 3)] - phi - dt * v * math.tan(delta) / L
        if not self.slack_mode:
            xf = np.array([self.x_F.x_x, self.x_F.x_y, self.x_F.x_v, self.x_F.x_phi])
            out[self.eq_term0:self.eq_term0 + 4] = \
                z[self.ix(K, 0):self.ix(K, 0) + 4] - xf
        G = self.footprint.body_normals
        g = self.footprint.body_offsets
        r = self.eq_col0
        for m, obs in enumerate(self.obstacles):
            A, b = obs.normals, obs.offsets
            n = self.edge_counts[m]
            for k in range(K + 1):
                lam = z[self.ilam(m, k):self.ilam(m, k) + n]
                mu = z[self.imu(m, k):self.imu(m, k) + 4]
                t = z[self.ix(k, 0):self.ix(k, 0) + 2]
                phi = z[self.ix(k, 3)]
                c, s = math.cos(phi), math.sin(phi)
                q = A.T @ lam
                if self.slack_mode:
                    out[r] = -g @ mu + (A @ t - b) @ lam + z[self.idd(m, k)]
                    r += 1
                gv = G.T @ mu
                out[r] = gv[0] + c * q[0] + s * q[1]
                out[r + 1] = gv[1] - s * q[0] + c * q[1]
                r += 2
        return out

    def eq_jac(self, z: np.ndarray) -> sp.spmatrix:
        K, dt, L = self.K, self.dt, self.limits.wheelbase
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for j in range(4):
            add(j, self.ix(0, j), 1.0)
        for k in range(K):
            v, phi = z[self.ix(k, 2)], z[self.ix(k, 3)]
            delta = z[self.iu(k, 0)]
            c, s = math.cos(phi), math.sin(phi)
            sec2 = 1.0 / math.cos(delta) ** 2
            r = self.eq_dyn0 + 4 * k
            add(r, self.ix(k + 1, 0), 1.0)
            add(r, self.ix(k, 0), -1.0)
            add(r, self.ix(k, 2), -dt * c)
            add(r, self.ix(k, 3), dt * v * s)
            add(r + 1, self.ix(k + 1, 1), 1.0)
            add(r + 1, self.ix(k, 1), -1.0)
            add(r + 1, self.ix(k, 2), -dt * s)
            add(r + 1, self.ix(k, 3), -dt * v * c)
            add(r + 2, self.ix(k + 1, 2), 1.0)
            add(r + 2, self.ix(k, 2), -1.0)
            add(r + 2, self.iu(k, 1), -dt)
            add(r + 3, self.ix(k + 1, 3), 1.0)
            add(r + 3, self.ix(k, 3), -1.0)
            add(r + 3, self.ix(k, 2), -dt * math.tan(delta) / L)
            add(r + 3, self.iu(k, 0), -dt * v * sec2 / L)
        if not self.slack_mode:
            for j in range(4):
                add(self.eq_term0 + j, self.ix(K, j), 1.0)
        G = self.footprint.body_normals
        g = self.footprint.body_offsets
        r = self.eq_col0
        for m, obs in enumerate(self.obstacles):
            A, b = obs.normals, obs.offsets
            n = self.edge_counts[m]
            for k in range(K + 1):
                lam = z[self.ilam(m, k):self.ilam(m, k) + n]
                t = z[self.ix(k, 0):self.ix(k, 0) + 2]
                phi = z[self.ix(k, 3)]
                c, s = math.cos(phi), math.sin(phi)
                q = A.T @ lam
                if self.slack_mode:
                    res = A @ t - b
                    for j in range(n):
                        add(r, self.ilam(m, k, j), res[j])
                    for j in range(4):
                        add(r, self.imu(m, k, j), -g[j])
                    add(r, self.ix(k, 0), q[0])
                    add(r, self.ix(k, 1), q[1])
                    add(r, self.idd(m, k), 1.0)
                    r += 1
                # rows of G'mu + R'A'lam
                RT = np.array([[c, s], [-s, c]])
                RTp = np.array([[-s, c], [-c, -s]])   # d/dphi of R'
                for i in range(2):
                    for j in range(4):
                        add(r + i, self.imu(m, k, j), G[j, i])
                    coeff = RT[i] @ A.T
                    for j in range(n):
                        add(r + i, self.ilam(m, k, j), coeff[j])
                    add(r + i, self.ix(k, 3), RTp[i] @ q)
                r += 2
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m_e, self.n))

    # -- inequality constraints (>= 0) --------------------------------------

    def ineq(self, z: np.ndarray) -> np.ndarray:
        K = self.K
        lim = self.limits
        dt = self.dt
        out = np.zeros(self.m_i)
        for k in range(K):
            delta, a = z[self.iu(k, 0)], z[self.iu(k, 1)]
            r = self.in_u0 + 4 * k
            out[r] = delta - lim.delta_range[0]
            out[r + 1] = lim.delta_range[1] - delta
            out[r + 2] = a - lim.a_range[0]
            out[r + 3] = lim.a_range[1] - a
        for k in range(K + 1):
            v = z[self.ix(k, 2)]
            r = self.in_v0 + 2 * k
            out[r] = v - lim.v_range[0]
            out[r + 1] = lim.v_range[1] - v
        for k in range(1, K):
            ddel = z[self.iu(k, 0)] - z[self.iu(k - 1, 0)]
            r = self.in_rate0 + 2 * (k - 1)
            out[r] = ddel - dt * lim.delta_rate_range[0]
            out[r + 1] = dt * lim.delta_rate_range[1] - ddel
        g = self.footprint.body_offsets
        for m, obs in enumerate(self.obstacles):
            A, b = obs.normals, obs.offsets
            n = self.edge_counts[m]
            AA = A @ A.T
            for k in range(K + 1):
                lam = z[self.ilam(m, k):self.ilam(m, k) + n]
                mu = z[self.imu(m, k):self.imu(m, k) + 4]
                r = self.in_block0[m] + self.block_rows[m] * k
                out[r] = 1.0 - lam @ (AA @ lam)
                out[r + 1:r + 1 + n] = lam
                out[r + 1 + n:r + 5 + n] = mu
                if self.slack_mode:
                    out[r + 5 + n] = -z[self.idd(m, k)] - EPS_D
                else:
                    t = z[self.ix(k, 0):self.ix(k, 0) + 2]
                    out[r + 5 + n] = -g @ mu + (A @ t - b) @ lam - self.config.d_min
        return out

    def ineq_jac(self, z: np.ndarray) -> sp.spmatrix:
        K = self.K
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for k in range(K):
            r = self.in_u0 + 4 * k
            add(r, self.iu(k, 0), 1.0)
            add(r + 1, self.iu(k, 0), -1.0)
            add(r + 2, self.iu(k, 1), 1.0)
            add(r + 3, self.iu(k, 1), -1.0)
        for k in range(K + 1):
            r = self.in_v0 + 2 * k
            add(r, self.ix(k, 2), 1.0)
            add(r + 1, self.ix(k, 2), -1.0)
        for k in range(1, K):
            r = self.in_rate0 + 2 * (k - 1)
            add(r, self.iu(k, 0), 1.0)
            add(r, self.iu(k - 1, 0), -1.0)
            add(r + 1, self.iu(k, 0), -1.0)
            add(r + 1, self.iu(k - 1, 0), 1.0)
        g = self.footprint.body_offsets
        for m, obs in enumerate(self.obstacles):
            A, b = obs.normals, obs.offsets
            n = self.edge_counts[m]
            AA = A @ A.T
            for k in range(K + 1):
                lam = z[self.ilam(m, k):self.ilam(m, k) + n]
                r = self.in_block0[m] + self.block_rows[m] * k
                grad_norm = -2.0 * (AA @ lam)
                for j in range(n):
                    add(r, self.ilam(m, k, j), grad_norm[j])
                for j in range(n):
                    add(r + 1 + j, self.ilam(m, k, j), 1.0)
                for j in range(4):
                    add(r + 1 + n + j, self.imu(m, k, j), 1.0)
                if self.slack_mode:
                    add(r + 5 + n, self.idd(m, k), -1.0)
                else:
                    t = z[self.ix(k, 0):self.ix(k, 0) + 2]
                    q = A.T @ lam
                    res = A @ t - b
                    for j in range(n):
                        add(r + 5 + n, self.ilam(m, k, j), res[j])
                    for j in range(4):
                        add(r + 5 + n, self.imu(m, k, j), -g[j])
                    add(r + 5 + n, self.ix(k, 0), q[0])
                    add(r + 5 + n, self.ix(k, 1), q[1])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m_i, self.n))

    # -- Hessian of the Lagrangian ------------------------------------------

    def hess_lagrangian(self, z: np.ndarray, y_eq: np.ndarray,
                        y_in: np.ndarray) -> sp.spmatrix:
        K, dt, L = self.K, self.dt, self.limits.wheelbase
        rows, cols, vals = [], [], []

        def add(i, j, v):
            rows.append(i)
            cols.append(j)
            vals.append(v)
            if i != j:
                rows.append(j)
                cols.append(i)
                vals.append(v)

        for k in range(K):
            v, phi = z[self.ix(k, 2)], z[self.ix(k, 3)]
            delta = z[self.iu(k, 0)]
            c, s = math.cos(phi), math.sin(phi)
            sec2 = 1.0 / math.cos(delta) ** 2
            r = self.eq_dyn0 + 4 * k
            y1, y2, y4 = y_eq[r], y_eq[r + 1], y_eq[r + 3]
            # c1 = ... - dt v cos(phi); c2 = ... - dt v sin(phi)
            add(self.ix(k, 2), self.ix(k, 3), -(y1 * dt * s - y2 * dt * c))
            add(self.ix(k, 3), self.ix(k, 3), -(y1 * dt * v * c + y2 * dt * v * s))
            # c4 = ... - dt v tan(delta)/L
            add(self.ix(k, 2), self.iu(k, 0), y4 * dt * sec2 / L)
            add(self.iu(k, 0), self.iu(k, 0),
                y4 * 2.0 * dt * v * sec2 * math.tan(delta) / L)
        r = self.eq_col0
        for m, obs in enumerate(self.obstacles):
            A = obs.normals
            n = self.edge_counts[m]
            AA = A @ A.T
            for k in range(K + 1):
                lam = z[self.ilam(m, k):self.ilam(m, k) + n]
                phi = z[self.ix(k, 3)]
                c, s = math.cos(phi), math.sin(phi)
                q = A.T @ lam
                if self.slack_mode:
                    ysc = y_eq[r]
                    for j in range(n):
                        add(self.ix(k, 0), self.ilam(m, k, j), -ysc * A[j, 0])
                        add(self.ix(k, 1), self.ilam(m, k, j), -ysc * A[j, 1])
                    r += 1
                yv = y_eq[r:r + 2]
                RT = np.array([[c, s], [-s, c]])
                RTp = np.array([[-s, c], [-c, -s]])
                # d2/dphi2 row i = (-R' q)_i; d2/dphi dlam_j row i = (R'p a_j)_i
                add(self.ix(k, 3), self.ix(k, 3), float(yv @ (RT @ q)))
                for j in range(n):
                    coeff = yv @ (RTp @ A[j])
                    add(self.ix(k, 3), self.ilam(m, k, j), -coeff)
                r += 2
                # norm inequality: Hessian -2 A A'
                ri = self.in_block0[m] + self.block_rows[m] * k
                w = y_in[ri]
                for i in range(n):
                    add(self.ilam(m, k, i), self.ilam(m, k, i), w * 2.0 * AA[i, i])
                    for j in range(i + 1, n):
                        add(self.ilam(m, k, i), self.ilam(m, k, j), w * 2.0 * AA[i, j])
                if not self.slack_mode:
                    ysc = y_in[ri + 5 + n]
                    for j in range(n):
                        add(self.ix(k, 0), self.ilam(m, k, j), -ysc * A[j, 0])
                        add(self.ix(k, 1), self.ilam(m, k, j), -ysc * A[j, 1])
        H = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return self.cost_H + H


def build_mpc(x0: VehicleState, x_F: VehicleState, warm: WarmStartTrajectory,
              duals: Optional[DualWarmStart], obstacles: Sequence[ConvexObstacle],
              footprint: VehicleFootprint, limits: VehicleLimits,
              config: MpcConfig) -> MpcNlp:
    return MpcNlp(x0, x_F, warm, duals, obstacles, footprint, limits, config)


def solve_mpc(nlp: MpcNlp, config: Optional[MpcConfig] = None) -> MpcSolution:
    cfg = config or nlp.config
    result = solve_nlp(nlp.problem, nlp.z0, tol=cfg.kkt_tol, max_iter=cfg.max_iter)
    z = result.z
    K = nlp.K
    states = tuple(VehicleState(z[nlp.ix(k, 0)], z[nlp.ix(k, 1)],
                                z[nlp.ix(k, 2)], z[nlp.ix(k, 3)])
                   for k in range(K + 1))
    controls = tuple(ControlInput(z[nlp.iu(k, 0)], z[nlp.iu(k, 1)])
                     for k in range(K))
    lam, mu = [], []
    d = np.zeros((nlp.M, K + 1))
    for m in range(nlp.M):
        n = nlp.edge_counts[m]
        lam.append(tuple(z[nlp.ilam(m, k):nlp.ilam(m, k) + n].copy()
                         for k in range(K + 1)))
        mu.append(tuple(z[nlp.imu(m, k):nlp.imu(m, k) + 4].copy()
                        for k in range(K + 1)))
        if nlp.slack_mode:
            d[m] = [z[nlp.idd(m, k)] for k in range(K + 1)]
        else:
            # report the achieved certificate as the (negated) distance slack
            g = nlp.footprint.body_offsets
            A, b = nlp.obstacles[m].normals, nlp.obstacles[m].offsets
            for k in range(K + 1):
                t = z[nlp.ix(k, 0):nlp.ix(k, 0) + 2]
                d[m, k] = -(-g @ mu[m][k] + (A @ t - b) @ lam[m][k])
    duals = DualWarmStart(lam=tuple(lam), mu=tuple(mu), d=d)
    report = MpcReport(
        status=result.report.status, iterations=result.report.iterations,
        kkt_residuals={"stationarity": result.report.kkt_stationarity,
                       "feasibility": result.report.kkt_feasibility,
                       "complementarity": result.report.kkt_complementarity},
        wall_time=result.report.wall_time, objective=result.report.objective)
    return MpcSolution(states=states, controls=controls, duals=duals,
                       report=report, dt=nlp.dt)


@dataclass
class AuditReport:
    max_dynamics_residual: float
    dynamics_violations: List[int]
    limit_violations: list
    min_clearance: float
    certificate_violations: List[Tuple[int, int, float]]
    cost: float

    @property
    def ok(self) -> bool:
        return (not self.dynamics_violations and not self.limit_violations
                and not self.certificate_violations and self.min_clearance >= 0.0)


def verify_solution(sol: MpcSolution, obstacles: Sequence[ConvexObstacle],
                    footprint: VehicleFootprint, limits: VehicleLimits,
                    dt: float, config: Optional[MpcConfig] = None,
                    x_F: Optional[VehicleState] = None,
                    dyn_tol: float = 1e-6, cert_tol: float = 1e-4) -> AuditReport:
    """Independent audit: dynamics, box limits, geometry, certificates, cost."""
    from .geometry import polygon_distance

    states, controls = sol.states, sol.controls
    dyn_viol, max_res = [], 0.0
    for k, c in enumerate(controls):
        pred = step_dynamics(states[k], c, dt, limits.wheelbase)
        res = max(abs(pred.x_x - states[k + 1].x_x), abs(pred.x_y - states[k + 1].x_y),
                  abs(pred.x_v - states[k + 1].x_v), abs(pred.x_phi - states[k + 1].x_phi))
        max_res = max(max_res, res)
        if res > dyn_tol:
            dyn_viol.append(k + 1)
    limit_viol = check_limits(states, controls, limits, dt)
    min_clear = math.inf
    cert_viol = []
    for k, s in enumerate(states):
        world = footprint_at(footprint, pose_transform(s))
        for m, obs in enumerate(obstacles):
            dist = polygon_distance(world, obs)
            min_clear = min(min_clear, dist)
            if -sol.duals.d[m, k] > dist + cert_tol:
                cert_viol.append((m, k, float(-sol.duals.d[m, k] - dist)))
    cfg = config or MpcConfig()
    xf = x_F if x_F is not None else states[-1]
    cost = evaluate_cost(states, controls,
                         sol.duals.d if cfg.mode is MpcMode.TDR else None,
                         cfg, xf)
    if not obstacles:
        min_clear = math.inf
    return AuditReport(max_dynamics_residual=max_res, dynamics_violations=dyn_viol,
                       limit_violations=limit_viol, min_clearance=min_clear,
                       certificate_violations=cert_viol, cost=cost)
