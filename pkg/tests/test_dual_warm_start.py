import math

import numpy as np
import pytest

from freeplan.dual_warm_start import (
    EPS_D,
    EmptyObstacleSet,
    PropositionViolated,
    build_relaxed_dual_qp,
    check_propositions,
    dual_residuals,
    max_certificate,
    relaxed_objective,
    scale_to_feasible,
    solve_dual_warm_start,
)
from freeplan.geometry import (
    Point2,
    VehicleFootprint,
    footprint_at,
    polygon_distance,
    polygon_from_vertices,
    pose_transform,
)
from freeplan.vehicle import VehicleState

FOOTPRINT = VehicleFootprint(length=4.8, width=2.0, rear_axle_to_center=1.4)


def square(x0, y0, x1, y1):
    return polygon_from_vertices(
        [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)])


def geo_distance(state, obstacle):
    return polygon_distance(footprint_at(FOOTPRINT, pose_transform(state)), obstacle)


class TestBuild:
    def test_dimensions_single_block(self):
        states = [VehicleState(0, 0, 0, 0)]
        relaxed = build_relaxed_dual_qp(states, [square(6, -1, 8, 1)], FOOTPRINT)
        assert len(relaxed.blocks) == 1
        blk = relaxed.blocks[0]
        assert blk.qp.n == 4 + 4 + 1          # lambda (4 edges) + mu (4) + d
        assert blk.qp.A_eq.shape[0] == 3      # one scalar + one 2-vector equation

    def test_block_structure(self):
        states = [VehicleState(0, 0, 0, 0), VehicleState(1, 0, 0, 0)]
        obstacles = [square(6, -1, 8, 1), square(-8, -1, -6, 1),
                     polygon_from_vertices([Point2(0, 6), Point2(2, 6), Point2(1, 8)])]
        relaxed = build_relaxed_dual_qp(states, obstacles, FOOTPRINT)
        assert len(relaxed.blocks) == 3 * 2
        assert {(b.m, b.k) for b in relaxed.blocks} == {(m, k) for m in range(3)
                                                        for k in range(2)}

    def test_empty_obstacles(self):
        with pytest.raises(EmptyObstacleSet):
            build_relaxed_dual_qp([VehicleState(0, 0, 0, 0)], [], FOOTPRINT)


class TestSolveAndScale:
    def test_distance_two_recovered(self):
        # footprint front at x=3.8; obstacle from 5.8 -> gap of exactly 2
        state = VehicleState(0, 0, 0, 0)
        obs = square(5.8, -1, 7.8, 1)
        assert geo_distance(state, obs) == pytest.approx(2.0, abs=1e-12)
        relaxed = build_relaxed_dual_qp([state], [obs], FOOTPRINT, beta=1.0)
        dual = scale_to_feasible(solve_dual_warm_start(relaxed), [obs])
        assert -dual.d[0, 0] == pytest.approx(2.0, abs=1e-4)

    def test_far_blocks_negative_d(self):
        states = [VehicleState(0, 0, 0, 0.3), VehicleState(1, 1, 0, 0.3)]
        obstacles = [square(10, 10, 12, 12), square(-15, 0, -13, 2)]
        dual = solve_dual_warm_start(build_relaxed_dual_qp(states, obstacles, FOOTPRINT))
        assert np.all(dual.d < 0)

    def test_contact_binds_epsilon(self):
        # obstacle 1 mm from the footprint front edge: the optimal trade-off
        # would put d above -EPS_D, so the strict-negativity bound binds
        state = VehicleState(0, 0, 0, 0)
        obs = square(3.801, -1, 5.801, 1)
        dual = solve_dual_warm_start(build_relaxed_dual_qp([state], [obs], FOOTPRINT))
        assert dual.d[0, 0] == pytest.approx(-EPS_D, abs=1e-5)

    def test_objective_matches_reevaluation(self):
        rng = np.random.default_rng(5)
        states = [VehicleState(rng.uniform(-2, 2), rng.uniform(-2, 2), 0,
                               rng.uniform(-1, 1)) for _ in range(3)]
        obstacles = [square(8, -1, 10, 1), square(-10, 3, -8, 5)]
        relaxed = build_relaxed_dual_qp(states, obstacles, FOOTPRINT, beta=2.0)
        dual = solve_dual_warm_start(relaxed)
        total = sum(blk.qp.objective(np.concatenate([dual.lam[blk.m][blk.k],
                                                     dual.mu[blk.m][blk.k],
                                                     [dual.d[blk.m, blk.k]]]))
                    for blk in relaxed.blocks)
        assert relaxed_objective(dual, obstacles, beta=2.0) == pytest.approx(total, abs=1e-8)

    def test_scaling_rules(self):
        state = VehicleState(0, 0, 0, 0)
        obs = square(6, -1, 8, 1)
        dual = solve_dual_warm_start(build_relaxed_dual_qp([state], [obs], FOOTPRINT))
        lam = dual.lam[0][0]
        scaled = scale_to_feasible(dual, [obs])
        nrm = np.linalg.norm(obs.normals.T @ lam)
        if nrm > 1.0:
            assert np.allclose(scaled.lam[0][0], lam / nrm)
            assert scaled.d[0, 0] == pytest.approx(dual.d[0, 0] / nrm)
        else:
            assert np.allclose(scaled.lam[0][0], lam)
        assert np.linalg.norm(obs.normals.T @ scaled.lam[0][0]) <= 1 + 1e-9

    def test_homogeneity_of_equalities(self):
        rng = np.random.default_rng(9)
        states = [VehicleState(0, 0, 0, 0.7)]
        obstacles = [square(5, 2, 7, 4)]
        dual = solve_dual_warm_start(build_relaxed_dual_qp(states, obstacles, FOOTPRINT))
        base = dual_residuals(dual, states, obstacles, FOOTPRINT)
        for _ in range(5):
            c = rng.uniform(0.1, 5.0)
            from freeplan.dual_warm_start import DualWarmStart
            scaled = DualWarmStart(
                lam=((dual.lam[0][0] * c,),), mu=((dual.mu[0][0] * c,),),
                d=dual.d * c)
            res = dual_residuals(scaled, states, obstacles, FOOTPRINT)
            assert res["equality_scalar"] <= c * base["equality_scalar"] + 1e-12
            assert res["equality_vector"] <= c * base["equality_vector"] + 1e-12

    def test_certificate_soundness(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            state = VehicleState(rng.uniform(-3, 3), rng.uniform(-3, 3), 0,
                                 rng.uniform(-math.pi, math.pi))
            obs = square(rng.uniform(8, 12), rng.uniform(-2, 2),
                         rng.uniform(13, 16), rng.uniform(3, 6))
            dual = scale_to_feasible(
                solve_dual_warm_start(build_relaxed_dual_qp([state], [obs], FOOTPRINT)),
                [obs])
            assert -dual.d[0, 0] <= geo_distance(state, obs) + 1e-6

    def test_block_permutation(self):
        states = [VehicleState(0, 0, 0, 0)]
        o1, o2 = square(6, -1, 8, 1), square(-9, 2, -7, 4)
        d12 = solve_dual_warm_start(build_relaxed_dual_qp(states, [o1, o2], FOOTPRINT))
        d21 = solve_dual_warm_start(build_relaxed_dual_qp(states, [o2, o1], FOOTPRINT))
        assert np.allclose(d12.d[0], d21.d[1]) and np.allclose(d12.d[1], d21.d[0])
        assert np.allclose(d12.lam[0][0], d21.lam[1][0])


class TestMaxCertificate:
    def test_equals_distance(self):
        rng = np.random.default_rng(33)
        for _ in range(25):
            state = VehicleState(rng.uniform(-3, 3), rng.uniform(-3, 3), 0,
                                 rng.uniform(-math.pi, math.pi))
            obs = square(rng.uniform(8, 11), rng.uniform(-1, 1),
                         rng.uniform(12, 15), rng.uniform(2, 5))
            dist = geo_distance(state, obs)
            lam, mu, cert = max_certificate(state, obs, FOOTPRINT)
            assert cert == pytest.approx(dist, abs=1e-4)
            assert np.linalg.norm(obs.normals.T @ lam) == pytest.approx(1.0, abs=1e-4)
            assert lam.min() >= -1e-9 and mu.min() >= -1e-9


class TestPropositions:
    def setup_case(self, beta):
        state = VehicleState(0, 0, 0, 0)
        obstacles = [square(5.8, -1, 7.8, 1), square(-6, -1, -4, 1)]
        relaxed = build_relaxed_dual_qp([state], obstacles, FOOTPRINT, beta=beta)
        dual = solve_dual_warm_start(relaxed)
        scaled = scale_to_feasible(dual, obstacles)
        qcqp = -sum(geo_distance(state, o) for o in obstacles)
        return qcqp, scaled, dual, obstacles, [state]

    def test_chain_holds(self):
        qcqp, scaled, dual, obstacles, states = self.setup_case(1.0)
        report = check_propositions(qcqp, scaled, obstacles, states,
                                    FOOTPRINT, beta=1.0)
        assert report["qcqp_sum_d"] <= report["sum_d_scaled"] + 1e-8
        assert report["sum_d_scaled"] <= report["relaxed_objective"] + 1e-8

    def test_gap_shrinks_with_beta(self):
        gaps = []
        for beta in (1.0, 10.0, 100.0):
            qcqp, scaled, dual, obstacles, states = self.setup_case(beta)
            check_propositions(qcqp, scaled, obstacles, states,
                               FOOTPRINT, beta=beta)
            gaps.append(float(scaled.d.sum()) - qcqp)
        assert gaps[2] <= gaps[0] + 1e-6

    def test_violation_detected(self):
        qcqp, scaled, dual, obstacles, states = self.setup_case(1.0)
        with pytest.raises(PropositionViolated):
            # claim a QCQP optimum better than geometrically possible
            check_propositions(qcqp + 10.0, scaled, obstacles, states,
                               FOOTPRINT, beta=1.0)
