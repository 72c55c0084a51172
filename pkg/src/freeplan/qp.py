"""Convex QP solver: operator-splitting ADMM with an active-set polish step.

Solves

    min 0.5 x' P x + q' x
    s.t.  A_eq x = b_eq,  lower <= A_in x <= upper

by stacking both constraint blocks into l <= A x <= u and running the
standard splitting iteration with a cached KKT factorization.  A polish
solve on the detected active set brings the KKT residuals down to the
requested tolerance.  Everything is deterministic: same problem, same
iterates, same report.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_SIGMA = 1e-6
_ALPHA = 1.6
_RHO_0 = 0.1
_RHO_EQ_SCALE = 1e3
_CHECK_EVERY = 25


class QpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class QpReport:
    status: QpStatus
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float


@dataclass
class QuadraticProgram:
    """Data for min 0.5 x'Px + q'x s.t. A_eq x = b_eq, lower <= A_in x <= upper."""

    P: np.ndarray
    q: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_in: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.P = sp.csc_matrix(self.P)
        self.q = np.asarray(self.q, float).ravel()
        n = self.q.shape[0]
        if self.P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}")
        asym = abs(self.P - self.P.T)
        if asym.nnz and asym.max() > 1e-9:
            raise ValueError("P must be symmetric")
        if self.A_eq is not None:
            self.A_eq = sp.csc_matrix(self.A_eq)
            self.b_eq = np.asarray(self.b_eq, float).ravel()
            if self.A_eq.shape != (self.b_eq.shape[0], n):
                raise ValueError("A_eq/b_eq dimensions inconsistent")
        if self.A_in is not None:
            self.A_in = sp.csc_matrix(self.A_in)
            self.lower = np.asarray(self.lower, float).ravel()
            self.upper = np.asarray(self.upper, float).ravel()
            if self.A_in.shape != (self.lower.shape[0], n) or self.lower.shape != self.upper.shape:
                raise ValueError("A_in/lower/upper dimensions inconsistent")
            if np.any(self.lower > self.upper):
                raise ValueError("lower must be <= upper")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def stacked(self) -> Tuple[sp.csc_matrix, np.ndarray, np.ndarray, int]:
        """(A, l, u, n_eq) with equality rows first."""
        blocks, ls, us, n_eq = [], [], [], 0
        if self.A_eq is not None and self.A_eq.shape[0]:
            blocks.append(self.A_eq)
            ls.append(self.b_eq)
            us.append(self.b_eq)
            n_eq = self.A_eq.shape[0]
        if self.A_in is not None and self.A_in.shape[0]:
            blocks.append(self.A_in)
            ls.append(self.lower)
            us.append(self.upper)
        if not blocks:
            A = sp.csc_matrix((0, self.n))
            return A, np.zeros(0), np.zeros(0), 0
        return sp.vstack(blocks).tocsc(), np.concatenate(ls), np.concatenate(us), n_eq

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


def _kkt_residuals(qp: QuadraticProgram, A, l, u, x, y) -> Tuple[float, float]:
    if A.shape[0] == 0:
        return 0.0, float(np.max(np.abs(qp.P @ x + qp.q), initial=0.0))
    z = A @ x
    pri = float(np.max(np.maximum(z - u, 0.0) + np.maximum(l - z, 0.0), initial=0.0))
    dua = float(np.max(np.abs(qp.P @ x + qp.q + A.T @ y), initial=0.0))
    return pri, dua


def _support(bounds: np.ndarray, v: np.ndarray) -> float:
    """sum_i bounds_i * v_i treating 0 * inf as 0; +inf if any term is +inf."""
    out = 0.0
    for b, vi in zip(bounds, v):
        if vi == 0.0:
            continue
        term = b * vi
        if not np.isfinite(term):
            return np.inf
        out += term
    return out


def _primal_infeasible(A, l, u, dy: np.ndarray) -> bool:
    ndy = float(np.linalg.norm(dy, np.inf))
    if ndy <= 1e-12:
        return False
    dy = dy / ndy
    if float(np.linalg.norm(A.T @ dy, np.inf)) > 1e-10:
        return False
    sup = _support(u, np.maximum(dy, 0.0)) + _support(l, np.minimum(dy, 0.0))
    return sup < -1e-10


def _dual_infeasible(qp: QuadraticProgram, A, l, u, dx: np.ndarray) -> bool:
    ndx = float(np.linalg.norm(dx, np.inf))
    if ndx <= 1e-12:
        return False
    dx = dx / ndx
    if float(np.linalg.norm(qp.P @ dx, np.inf)) > 1e-10 or float(qp.q @ dx) >= -1e-10:
        return False
    # direction must stay feasible: finite upper bounds need Adx <= 0, finite lower need Adx >= 0
    Adx = A @ dx
    if np.any(np.isfinite(u) & (Adx > 1e-10)):
        return False
    if np.any(np.isfinite(l) & (Adx < -1e-10)):
        return False
    return True


def _polish(qp: QuadraticProgram, A, l, u, n_eq, x, y):
    """Equality-solve on the active set with regularization + iterative refinement."""
    m = A.shape[0]
    z = A @ x
    act_tol = 1e-7
    low_act = (y < -act_tol) | (z < l + act_tol)
    upp_act = (y > act_tol) | (z > u - act_tol)
    active = np.zeros(m, bool)
    active[:n_eq] = True
    active |= low_act | upp_act
    rhs_act = np.where(upp_act, u, l)
    rhs_act[:n_eq] = l[:n_eq]
    idx = np.flatnonzero(active & np.isfinite(rhs_act))
    if idx.size == 0:
        # unconstrained stationary point
        try:
            xp = spla.spsolve(sp.csc_matrix(qp.P + 1e-12 * sp.eye(qp.n)), -qp.q)
        except RuntimeError:
            return None
        return xp, np.zeros(m)
    A_act = A[idx]
    b_act = rhs_act[idx]
    n, ma = qp.n, idx.size
    delta = 1e-9
    K = sp.bmat([[qp.P + delta * sp.eye(n), A_act.T],
                 [A_act, -delta * sp.eye(ma)]], format="csc")
    try:
        lu = spla.splu(K)
    except RuntimeError:
        return None
    rhs = np.concatenate([-qp.q, b_act])
    sol = np.zeros(n + ma)
    for _ in range(4):  # refinement against the unregularized system
        r = rhs - np.concatenate([qp.P @ sol[:n] + A_act.T @ sol[n:], A_act @ sol[:n]])
        sol = sol + lu.solve(r)
    x_p = sol[:n]
    y_p = np.zeros(m)
    y_p[idx] = sol[n:]
    return x_p, y_p


def _solve_stacked(qp: QuadraticProgram, tol: float, max_iter: int):
    A, l, u, n_eq = qp.stacked()
    n, m = qp.n, A.shape[0]

    if m == 0:
        try:
            x = spla.spsolve(sp.csc_matrix(qp.P + 1e-14 * sp.eye(n)), -qp.q)
        except RuntimeError:
            x = np.linalg.lstsq(qp.P.toarray(), -qp.q, rcond=None)[0]
        pri, dua = _kkt_residuals(qp, A, l, u, x, np.zeros(0))
        status = QpStatus.OPTIMAL if dua <= tol else QpStatus.MAX_ITERATIONS
        return x, np.zeros(0), QpReport(status, 0, pri, dua, qp.objective(x))

    rho = np.full(m, _RHO_0)
    rho[:n_eq] = _RHO_0 * _RHO_EQ_SCALE

    def factor(rho_vec):
        K = sp.bmat([[qp.P + _SIGMA * sp.eye(n), A.T],
                     [A, -sp.diags(1.0 / rho_vec)]], format="csc")
        return spla.splu(K)

    lu = factor(rho)
    x = np.zeros(n)
    z = np.clip(np.zeros(m), l, u)
    y = np.zeros(m)
    best = None

    it = 0
    while it < max_iter:
        it += 1
        x_prev, z_prev, y_prev = x, z, y
        rhs = np.concatenate([_SIGMA * x_prev - qp.q, z_prev - y / rho])
        sol = lu.solve(rhs)
        x_tilde = sol[:n]
        z_tilde = z_prev + (sol[n:] - y) / rho
        x = _ALPHA * x_tilde + (1 - _ALPHA) * x_prev
        z_pre = _ALPHA * z_tilde + (1 - _ALPHA) * z_prev
        z = np.clip(z_pre + y / rho, l, u)
        y = y + rho * (z_pre - z)

        if it % _CHECK_EVERY == 0 or it == max_iter:
            Ax = A @ x
            pri = float(np.max(np.abs(Ax - z), initial=0.0))
            dua = float(np.max(np.abs(qp.P @ x + qp.q + A.T @ y), initial=0.0))
            if best is None or max(pri, dua) < best[0]:
                best = (max(pri, dua), x.copy(), y.copy())
            if pri <= max(tol, 1e-9) * 1e3 and dua <= max(tol, 1e-9) * 1e3:
                polished = _polish(qp, A, l, u, n_eq, x, y)
                if polished is not None:
                    xp, yp = polished
                    ppri, pdua = _kkt_residuals(qp, A, l, u, xp, yp)
                    if ppri <= tol and pdua <= tol:
                        return xp, yp, QpReport(QpStatus.OPTIMAL, it, ppri, pdua, qp.objective(xp))
                rpri, rdua = _kkt_residuals(qp, A, l, u, x, y)
                if rpri <= tol and rdua <= tol:
                    return x, y, QpReport(QpStatus.OPTIMAL, it, rpri, rdua, qp.objective(x))
            if _primal_infeasible(A, l, u, y - y_prev):
                return x, y, QpReport(QpStatus.INFEASIBLE, it, np.inf, np.inf, np.nan)
            if _dual_infeasible(qp, A, l, u, x - x_prev):
                return x, y, QpReport(QpStatus.INFEASIBLE, it, np.inf, np.inf, np.nan)
            # deterministic residual balancing
            if it % 500 == 0 and pri > 0 and dua > 0:
                scale = float(np.clip(np.sqrt(pri / max(dua, 1e-16)), 0.2, 5.0))
                if scale < 0.9 or scale > 1.1:
                    rho = np.clip(rho * scale, 1e-6, 1e6)
                    rho[:n_eq] = np.maximum(rho[:n_eq], _RHO_0 * _RHO_EQ_SCALE)
                    lu = factor(rho)

    _, xb, yb = best if best is not None else (0.0, x, y)
    polished = _polish(qp, A, l, u, n_eq, xb, yb)
    if polished is not None:
        xp, yp = polished
        ppri, pdua = _kkt_residuals(qp, A, l, u, xp, yp)
        if ppri <= tol and pdua <= tol:
            return xp, yp, QpReport(QpStatus.OPTIMAL, max_iter, ppri, pdua, qp.objective(xp))
    pri, dua = _kkt_residuals(qp, A, l, u, xb, yb)
    return xb, yb, QpReport(QpStatus.MAX_ITERATIONS, max_iter, pri, dua, qp.objective(xb))


def solve_qp(qp: QuadraticProgram, tol: float = 1e-8,
             max_iter: int = 20000) -> Tuple[np.ndarray, QpReport]:
    """Solve a convex QP; returns (x, report).

    Status OPTIMAL guarantees primal and dual KKT residuals <= tol.
    """
    x, _, report = _solve_stacked(qp, tol, max_iter)
    return x, report


def solve_qp_with_duals(qp: QuadraticProgram, tol: float = 1e-8, max_iter: int = 20000):
    """Like solve_qp but also returns the stacked row multipliers (eq rows first)."""
    return _solve_stacked(qp, tol, max_iter)
