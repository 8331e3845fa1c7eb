import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpconic.conic import ProblemError, lp_problem
from rpconic.experiments import InstanceSpec, generate_instance, sdp_instance
from rpconic.solver import solve
from rpconic.transform import (TransformData, TransformError, build_N, build_shift,
                               make_transform, select_basis, sparsity_certificate,
                               transform_problem)


class TestSelectBasis:
    def test_identity_on_top(self):
        A = np.vstack([np.eye(4), np.random.default_rng(0).standard_normal((3, 4))])
        rows, Ahat = select_basis(A)
        assert rows.tolist() == [0, 1, 2, 3]
        assert np.array_equal(Ahat, np.eye(4))

    def test_rank_deficient(self):
        A = np.tile([[1.0, 2.0, 3.0]], (6, 1))
        with pytest.raises(TransformError, match="A not full column rank"):
            select_basis(A)

    def test_pivoting_skips_dependent_leading_rows(self):
        rng = np.random.default_rng(1)
        A = np.vstack([np.ones((3, 3)), rng.standard_normal((5, 3))])
        rows, Ahat = select_basis(A)
        assert len(set(rows.tolist()) & {0, 1, 2}) <= 1
        assert abs(np.linalg.det(Ahat)) > 1e-8

    def test_random_dense_determinant_oracle(self):
        A = np.random.default_rng(2).standard_normal((20, 5))
        rows, Ahat = select_basis(A)
        assert np.array_equal(Ahat, A[rows])
        # independent factorization: LU through slogdet
        sign, logdet = np.linalg.slogdet(Ahat)
        assert sign != 0 and np.isfinite(logdet)


class TestBuildN:
    def test_identity(self):
        N, eta = build_N(np.eye(3), np.ones(3))
        assert np.array_equal(N, np.eye(3)) and np.array_equal(eta, np.ones(3))

    def test_sign_flip(self):
        N, eta = build_N(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))
        # Ahat^-1 = diag(1,-1); column 2 dotted with c is -1, so eta_2 = -1
        assert np.array_equal(eta, [1.0, -1.0])
        assert np.array_equal(N, np.eye(2))
        assert np.array_equal(N.T @ np.ones(2), [1.0, 1.0])

    def test_degenerate_cost(self):
        with pytest.raises(TransformError, match="perturb c"):
            build_N(np.eye(2), np.array([1.0, 0.0]))

    @given(st.integers(1, 8), st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_postconditions(self, n, seed):
        rng = np.random.default_rng(seed)
        Ahat = rng.standard_normal((n, n)) + n * np.eye(n)
        c = rng.standard_normal(n)
        N, eta = build_N(Ahat, c)
        assert np.all(np.abs(eta) == 1)
        assert np.all(N.T @ c > 0)
        scale = np.linalg.norm(Ahat, 2) * np.linalg.norm(N, 2)
        assert np.max(np.abs(Ahat @ N - np.diag(eta))) <= 1e-10 * scale


class TestBuildShift:
    def test_zero_top(self):
        v = build_shift(np.eye(2), np.eye(2), np.zeros(2), np.array([1.0, 2.0]), np.ones(2))
        assert np.array_equal(v, np.zeros(2))

    def test_two_conditions(self):
        A = np.vstack([np.eye(2), [[1.0, 1.0]]])
        b = np.array([5.0, 7.0, 0.0])
        ctilde = np.array([1.0, 2.0])
        v = build_shift(A, np.eye(2), b, ctilde, np.ones(2))
        assert v.tolist() == [-14.0, 7.0]
        assert ctilde @ v == 0
        assert (b - A @ v)[1] == 0

    def test_shifted_rhs_sparsity(self):
        P = generate_instance(InstanceSpec(30, 5, 0.6, "U(0,1)", 1))
        T = transform_problem(P, make_transform(P))
        assert np.count_nonzero(T.b0) <= 30 - 5 + 1


def _feasible_lp(seed, m=30, n=5):
    return generate_instance(InstanceSpec(m, n, 0.5, "U(0,1)", seed))


class TestTransformProblem:
    def test_identity_transform_is_noop(self):
        P = lp_problem(np.ones(2), np.vstack([np.eye(2), [[1.0, 3.0]]]), np.zeros(3))
        data = make_transform(P)
        assert np.array_equal(data.N, np.eye(2)) and np.array_equal(data.v, np.zeros(2))
        T = transform_problem(P, data)
        assert np.array_equal(T.A0, P.A0) and np.array_equal(T.b0, P.b0)
        assert np.array_equal(T.c, P.c)

    def test_value_invariance(self):
        for seed in range(5):
            P = _feasible_lp(seed)
            T = transform_problem(P, make_transform(P))
            a, b = solve(P), solve(T)
            assert abs(a.value - b.value) <= 1e-6 * abs(a.value)

    def test_feasible_point_maps_with_equal_objective(self):
        P = _feasible_lp(3)
        data = make_transform(P)
        T = transform_problem(P, data)
        x = solve(P).x
        xp = data.from_original(x)
        assert T.is_feasible(xp, tol=1e-7)
        assert T.c @ xp == pytest.approx(P.c @ x, abs=1e-10 * max(1, abs(P.c @ x)))
        assert np.allclose(data.to_original(xp), x, atol=1e-9)

    def test_duals_carry_over(self):
        P = _feasible_lp(4)
        T = transform_problem(P, make_transform(P))
        r = solve(P)
        resid = T.adjoint(r.dual.y) + T.side_adjoint(r.dual.lam) - T.c
        assert np.max(np.abs(resid)) <= 1e-8 * max(1.0, np.abs(T.c).max())

    def test_rejects_psd(self):
        P = sdp_instance(4, 2, 3, seed=0)
        with pytest.raises(ProblemError):
            make_transform(P)

    def test_invariants_and_serialization(self):
        P = _feasible_lp(5)
        data = make_transform(P)
        assert np.all(data.ctilde > 0)
        assert abs(data.ctilde @ data.v) <= 1e-10 * (np.abs(data.ctilde) @ np.abs(data.v))
        shifted = P.b0 - P.A0 @ (data.N @ data.v)
        scale = np.abs(P.b0).max()
        assert np.max(np.abs(shifted[data.rows[1:]])) <= 1e-10 * scale
        back = TransformData.from_dict(json.loads(data.dumps()))
        for name in ("rows", "Ahat", "eta", "N", "v", "ctilde"):
            assert np.array_equal(getattr(back, name), getattr(data, name))


class TestSparsityCertificate:
    def test_top_block_one_nonzero(self):
        P = _feasible_lp(6)
        data = make_transform(P)
        T = transform_problem(P, data)
        top = T.A0[data.rows]
        assert np.all(np.count_nonzero(top, axis=0) == 1)

    def test_square_boundary(self):
        A = np.random.default_rng(0).standard_normal((4, 4))
        P = lp_problem(np.ones(4), A, A @ np.ones(4) - 1)
        T = transform_problem(P, make_transform(P))
        cert = sparsity_certificate(T.A0, T.b0)
        assert cert.ok and cert.bound == 1.0
        assert np.all(cert.column_nonzeros <= 1) and np.all(cert.column_ratios <= 1 + 1e-12)

    def test_random_30_by_5(self):
        P = _feasible_lp(7)
        T = transform_problem(P, make_transform(P))
        cert = sparsity_certificate(T.A0, T.b0)
        ratios = np.abs(T.A0).sum(0) / np.linalg.norm(T.A0, axis=0)
        assert np.all(ratios <= np.sqrt(26))
        assert np.allclose(cert.column_ratios, ratios)
        assert cert.ok

    def test_reports_violations(self):
        cert = sparsity_certificate(np.ones((4, 2)), np.ones(4))
        assert not cert.ok
        assert any(v.startswith("column 0") for v in cert.violations)
        assert any(v.startswith("rhs") for v in cert.violations)

    @given(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 10), st.floats(-10, -1e-3)),
                    min_size=1, max_size=30))
    def test_cauchy_schwarz(self, vals):
        u = np.array(vals)
        if not np.any(u):
            return
        cert = sparsity_certificate(u[:, None], u)
        nnz = np.count_nonzero(u)
        assert cert.column_nonzeros[0] == nnz
        assert cert.column_ratios[0] <= np.sqrt(nnz) * (1 + 1e-12)
