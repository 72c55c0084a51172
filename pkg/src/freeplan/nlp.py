"""Sparse primal-dual interior-point solver for smooth NLPs.

Solves  min f(z)  s.t.  c_eq(z) = 0,  c_in(z) >= 0  given analytic first
and second derivatives.  Inequalities get slacks with a log barrier; each
barrier subproblem is solved by damped Newton steps on the perturbed KKT
system with a fraction-to-boundary rule and an l1 merit line search.  The
iteration is fully deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class NlpStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass
class NlpProblem:
    """Callbacks defining the NLP; jacobians/hessian must be scipy sparse.

    hess_lagrangian(z, y_eq, y_in) is the Hessian of
    f(z) - y_eq . c_eq(z) - y_in . c_in(z).
    """

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    eq: Callable[[np.ndarray], np.ndarray]
    eq_jac: Callable[[np.ndarray], sp.spmatrix]
    ineq: Callable[[np.ndarray], np.ndarray]
    ineq_jac: Callable[[np.ndarray], sp.spmatrix]
    hess_lagrangian: Callable[[np.ndarray, np.ndarray, np.ndarray], sp.spmatrix]


@dataclass
class NlpReport:
    status: NlpStatus
    iterations: int
    kkt_stationarity: float
    kkt_feasibility: float
    kkt_complementarity: float
    objective: float
    wall_time: float


@dataclass
class NlpResult:
    z: np.ndarray
    y_eq: np.ndarray
    y_in: np.ndarray
    slacks: np.ndarray
    report: NlpReport


def _kkt_errors(problem, z, s, y, w):
    grad = problem.gradient(z)
    Je = problem.eq_jac(z)
    Ji = problem.ineq_jac(z)
    r_d = grad - Je.T @ y - Ji.T @ w
    r_e = problem.eq(z)
    r_i = problem.ineq(z) - s
    comp = s * w
    feas = max(np.max(np.abs(r_e), initial=0.0), np.max(np.abs(r_i), initial=0.0))
    return (float(np.max(np.abs(r_d), initial=0.0)), float(feas),
            float(np.max(np.abs(comp), initial=0.0)))


def solve_nlp(problem: NlpProblem, z0: np.ndarray, tol: float = 1e-6,
              max_iter: int = 200, mu0: float = 1e-1,
              y_eq0: Optional[np.ndarray] = None,
              y_in0: Optional[np.ndarray] = None) -> NlpResult:
    t_start = time.perf_counter()
    z = np.asarray(z0, float).copy()
    n = problem.n
    m_e = len(problem.eq(z))
    m_i = len(problem.ineq(z))

    s = np.maximum(problem.ineq(z), 1e-2)
    w = (np.full(m_i, mu0) / s) if m_i else np.zeros(0)
    y = np.zeros(m_e) if y_eq0 is None else np.asarray(y_eq0, float).copy()
    if y_in0 is not None and m_i:
        w = np.maximum(np.asarray(y_in0, float), 1e-8)

    mu = mu0
    tau = 0.995
    delta = 0.0
    iters = 0

    def merit(zv, sv, nu):
        ce = problem.eq(zv)
        ci = problem.ineq(zv) - sv
        barrier = -mu * float(np.sum(np.log(sv))) if m_i else 0.0
        return (problem.objective(zv) + barrier
                + nu * (np.sum(np.abs(ce)) + np.sum(np.abs(ci))))

    for iters in range(1, max_iter + 1):
        grad = problem.gradient(z)
        Je = problem.eq_jac(z).tocsr()
        Ji = problem.ineq_jac(z).tocsr()
        ce = problem.eq(z)
        ci = problem.ineq(z)
        r_d = grad - Je.T @ y - Ji.T @ w
        r_e = ce
        r_i = ci - s
        r_c = s * w - mu

        stat, feas, comp = _kkt_errors(problem, z, s, y, w)
        if max(stat, feas, comp) <= tol:
            wall = time.perf_counter() - t_start
            return NlpResult(z, y, w, s, NlpReport(
                NlpStatus.OPTIMAL, iters - 1, stat, feas, comp,
                problem.objective(z), wall))

        # barrier parameter update when the mu-centered system is solved
        err_mu = max(stat, feas,
                     float(np.max(np.abs(s * w - mu), initial=0.0)))
        if err_mu <= 10.0 * mu:
            mu = max(tol / 10.0, min(0.2 * mu, mu ** 1.5))
            r_c = s * w - mu

        H = problem.hess_lagrangian(z, y, w).tocsc()
        if m_i:
            sigma = w / s
            H_aug = H + (Ji.T @ sp.diags(sigma) @ Ji)
            rhs1 = -(r_d + Ji.T @ (r_c / s) + Ji.T @ (sigma * r_i))
        else:
            H_aug = H
            rhs1 = -r_d

        # assemble and factorize the condensed KKT system with inertia
        # regularization on failure or non-descent
        step = None
        attempt_delta = delta
        for _ in range(12):
            reg = sp.eye(n) * attempt_delta if attempt_delta else sp.csc_matrix((n, n))
            K = sp.bmat([[H_aug + reg, Je.T if m_e else None],
                         [Je if m_e else None,
                          -1e-10 * sp.eye(m_e) if m_e else None]], format="csc") \
                if m_e else (H_aug + reg).tocsc()
            rhs = np.concatenate([rhs1, -r_e]) if m_e else rhs1
            try:
                lu = splu(K, permc_spec="COLAMD")
                sol = lu.solve(rhs)
            except RuntimeError:
                attempt_delta = max(1e-8, attempt_delta * 10 if attempt_delta else 1e-8)
                continue
            if not np.all(np.isfinite(sol)):
                attempt_delta = max(1e-8, attempt_delta * 10 if attempt_delta else 1e-8)
                continue
            dz = sol[:n]
            dy = -sol[n:] if m_e else np.zeros(0)
            # require a descent-ish step for the barrier model
            curv = float(dz @ (H_aug @ dz)) + attempt_delta * float(dz @ dz)
            if curv < -1e-10 * max(1.0, float(dz @ dz)):
                attempt_delta = max(1e-8, attempt_delta * 10 if attempt_delta else 1e-8)
                continue
            step = (dz, dy)
            break
        if step is None:
            break
        dz, dy = step
        delta = attempt_delta / 10.0 if attempt_delta > 1e-9 else 0.0

        if m_i:
            ds = Ji @ dz + r_i
            dw = -(r_c + w * ds) / s
            # fraction to boundary
            alpha_s = 1.0
            neg = ds < 0
            if np.any(neg):
                alpha_s = min(1.0, float(np.min(-tau * s[neg] / ds[neg])))
            alpha_w = 1.0
            neg = dw < 0
            if np.any(neg):
                alpha_w = min(1.0, float(np.min(-tau * w[neg] / dw[neg])))
        else:
            ds = np.zeros(0)
            dw = np.zeros(0)
            alpha_s = alpha_w = 1.0

        # l1 merit backtracking on the primal (z, s) step; the dual step
        # uses its own fraction-to-boundary length, the usual practice
        nu = max(1.0, 2.0 * float(np.max(np.abs(y), initial=0.0)),
                 2.0 * float(np.max(np.abs(w), initial=0.0)))
        m0 = merit(z, s, nu)
        alpha = alpha_s
        for _ in range(25):
            z_try = z + alpha * dz
            s_try = s + alpha * ds if m_i else s
            if (not m_i or np.all(s_try > 0)) and \
                    merit(z_try, s_try, nu) < m0 + 1e-8 * max(1.0, abs(m0)):
                break
            alpha *= 0.5
        else:
            # no merit decrease found; take a tiny safeguarded step
            alpha = min(alpha_s, 1e-4)
            z_try = z + alpha * dz
            s_try = s + alpha * ds if m_i else s
        z = z_try
        s = s_try if m_i else s
        y = y + alpha * dy
        if m_i:
            w = np.maximum(w + alpha_w * dw, 1e-16)

    stat, feas, comp = _kkt_errors(problem, z, s, y, w)
    wall = time.perf_counter() - t_start
    status = NlpStatus.MAX_ITERATIONS
    return NlpResult(z, y, w, s, NlpReport(status, iters, stat, feas, comp,
                                           problem.objective(z), wall))
