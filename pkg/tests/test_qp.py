import numpy as np
import pytest

from freeplan.qp import QpStatus, QuadraticProgram, solve_qp, solve_qp_with_duals


def kkt_residuals(qp, x, y_eq, y_in):
    """Independent KKT evaluation from the returned primal/dual pair."""
    grad = qp.P @ x + qp.q
    if qp.A_eq is not None:
        grad = grad + qp.A_eq.T @ y_eq
    if qp.A_in is not None:
        grad = grad + qp.A_in.T @ y_in
    stat = np.max(np.abs(grad), initial=0.0)
    pri = 0.0
    if qp.A_eq is not None:
        pri = max(pri, np.max(np.abs(qp.A_eq @ x - qp.b_eq), initial=0.0))
    if qp.A_in is not None:
        z = qp.A_in @ x
        pri = max(pri, np.max(np.maximum(z - qp.upper, 0), initial=0.0))
        pri = max(pri, np.max(np.maximum(qp.lower - z, 0), initial=0.0))
    return stat, pri


class TestSimpleProblems:
    def test_active_bound(self):
        # min x^2 s.t. x >= 1
        qp = QuadraticProgram(P=[[2.0]], q=[0.0], A_in=[[1.0]], lower=[1.0], upper=[np.inf])
        x, rep = solve_qp(qp)
        assert rep.status is QpStatus.OPTIMAL
        assert x[0] == pytest.approx(1.0, abs=1e-8)

    def test_symmetric_simplex(self):
        # min |x|^2 s.t. sum x = 1 in 2D
        qp = QuadraticProgram(P=2 * np.eye(2), q=np.zeros(2), A_eq=[[1.0, 1.0]], b_eq=[1.0])
        x, rep = solve_qp(qp)
        assert rep.status is QpStatus.OPTIMAL
        assert np.allclose(x, [0.5, 0.5], atol=1e-8)

    def test_unconstrained(self):
        qp = QuadraticProgram(P=np.diag([2.0, 4.0]), q=[-2.0, -4.0])
        x, rep = solve_qp(qp)
        assert rep.status is QpStatus.OPTIMAL
        assert np.allclose(x, [1.0, 1.0], atol=1e-8)


class TestRandomized:
    def test_random_psd_kkt(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            n, m_eq, m_in = 20, 5, 15
            M = rng.standard_normal((n, n))
            P = M @ M.T + 0.1 * np.eye(n)
            q = rng.standard_normal(n)
            A_eq = rng.standard_normal((m_eq, n))
            b_eq = rng.standard_normal(m_eq)
            A_in = rng.standard_normal((m_in, n))
            x_feas = np.linalg.lstsq(A_eq, b_eq, rcond=None)[0]
            mid = A_in @ x_feas
            lower = mid - rng.uniform(0.1, 2, m_in)
            upper = mid + rng.uniform(0.1, 2, m_in)
            qp = QuadraticProgram(P=P, q=q, A_eq=A_eq, b_eq=b_eq,
                                  A_in=A_in, lower=lower, upper=upper)
            x, y, rep = solve_qp_with_duals(qp, tol=1e-8)
            assert rep.status is QpStatus.OPTIMAL, f"trial {trial}: {rep}"
            stat, pri = kkt_residuals(qp, x, y[:m_eq], y[m_eq:])
            assert stat <= 1e-7
            assert pri <= 1e-8

    def test_determinism(self):
        rng = np.random.default_rng(5)
        n = 10
        M = rng.standard_normal((n, n))
        P = M @ M.T
        q = rng.standard_normal(n)
        A_in = np.eye(n)
        qp1 = QuadraticProgram(P=P, q=q, A_in=A_in, lower=-np.ones(n), upper=np.ones(n))
        qp2 = QuadraticProgram(P=P, q=q, A_in=A_in, lower=-np.ones(n), upper=np.ones(n))
        x1, r1 = solve_qp(qp1)
        x2, r2 = solve_qp(qp2)
        assert np.array_equal(x1, x2)
        assert r1 == r2


class TestScalingProperty:
    def test_linear_objective_scaling(self):
        # with P = 0, scaling q by c > 0 scales the optimum by c, same argmin
        q = np.array([1.0, -2.0])
        A_in = np.eye(2)
        lo, hi = -np.ones(2), np.ones(2)
        qp1 = QuadraticProgram(P=np.zeros((2, 2)), q=q, A_in=A_in, lower=lo, upper=hi)
        qp3 = QuadraticProgram(P=np.zeros((2, 2)), q=3 * q, A_in=A_in, lower=lo, upper=hi)
        x1, r1 = solve_qp(qp1)
        x3, r3 = solve_qp(qp3)
        assert np.allclose(x1, x3, atol=1e-7)
        assert r3.objective == pytest.approx(3 * r1.objective, abs=1e-7)


class TestStatuses:
    def test_infeasible(self):
        # x >= 1 and x <= 0
        qp = QuadraticProgram(P=[[2.0]], q=[0.0],
                              A_in=[[1.0], [1.0]], lower=[1.0, -np.inf], upper=[np.inf, 0.0])
        _, rep = solve_qp(qp)
        assert rep.status is QpStatus.INFEASIBLE

    def test_infeasible_equalities(self):
        qp = QuadraticProgram(P=np.eye(2), q=np.zeros(2),
                              A_eq=[[1.0, 0.0], [1.0, 0.0]], b_eq=[0.0, 1.0])
        _, rep = solve_qp(qp)
        assert rep.status is QpStatus.INFEASIBLE

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            QuadraticProgram(P=np.eye(2), q=np.zeros(3))
        with pytest.raises(ValueError):
            QuadraticProgram(P=np.eye(2), q=np.zeros(2),
                             A_in=np.eye(2), lower=[1.0, 1.0], upper=[0.0, 0.0])
