import json

import numpy as np
import pytest

from rpconic.conic import ConicProblem, lp_problem
from rpconic.experiments import InstanceSpec, generate_instance, sdp_instance
from rpconic.solver import (INFEASIBLE, OPTIMAL, BackendUnavailable, SolverConfig,
                            check_assumptions, from_linprog_model, solve, to_linprog_model)

LP_BACKENDS = ["highs", "clarabel"]


def one_dim():
    return lp_problem([1.0], np.array([[1.0]]), [3.0], side_cone=None, nonneg=False)


@pytest.mark.parametrize("backend", LP_BACKENDS)
def test_one_dimensional_lp(backend):
    r = solve(one_dim(), SolverConfig(backend=backend))
    assert r.status == OPTIMAL and r.optimal
    assert r.value == pytest.approx(3.0, abs=1e-7)
    assert r.x == pytest.approx([3.0], abs=1e-7)
    assert r.dual.y.y0 == pytest.approx([1.0], abs=1e-7)
    assert r.wall_seconds >= 0


@pytest.mark.parametrize("backend", LP_BACKENDS)
def test_infeasible(backend):
    P = lp_problem([1.0], np.array([[1.0], [-1.0]]), [1.0, 0.0])
    r = solve(P, SolverConfig(backend=backend))
    assert r.status == INFEASIBLE
    assert not np.isfinite(r.value) and r.x is None


@pytest.mark.parametrize("backend", LP_BACKENDS)
def test_strong_duality_and_dual_feasibility(backend):
    P = generate_instance(InstanceSpec(80, 20, 0.2, "U(0,1)", 2))
    cfg = SolverConfig(backend=backend)
    r = solve(P, cfg)
    assert r.dual.objective == pytest.approx(r.value, rel=1e-6)
    assert P.is_feasible(r.x, tol=1e-7)
    a = check_assumptions(r, P)
    assert a.dual_residual <= 10 * cfg.opt_tol * np.abs(P.c).max()
    assert not a.gap_flag


def test_backends_agree():
    P = generate_instance(InstanceSpec(60, 15, 0.3, "N(1,2)", 0))
    a = solve(P, SolverConfig(backend="highs"))
    b = solve(P, SolverConfig(backend="clarabel"))
    assert a.value == pytest.approx(b.value, rel=1e-6)


def test_psd_block_duals():
    P = sdp_instance(5, 3, 4, seed=1)
    r = solve(P)
    assert r.optimal and r.backend == "clarabel"
    a = check_assumptions(r, P)
    assert a.dual_residual <= 1e-6
    assert a.duality_gap <= 1e-6
    assert np.linalg.eigvalsh(r.dual.y.M[0]).min() >= -1e-7


def test_highs_rejects_psd():
    with pytest.raises(ValueError):
        solve(sdp_instance(4, 2, 2, seed=0), SolverConfig(backend="highs"))


def test_deterministic():
    P = generate_instance(InstanceSpec(100, 25, 0.2, "U(0,1)", 5))
    vals = [solve(P, SolverConfig(backend="highs", threads=1)).value for _ in range(3)]
    assert max(vals) - min(vals) <= 1e-9


class TestAssumptions:
    def test_strictly_positive_duals(self):
        a = check_assumptions(solve(one_dim()), one_dim())
        assert a.zero_dual_components == ()
        assert a.clean

    def test_zero_value(self):
        P = lp_problem([1.0, 2.0], np.array([[1.0, 1.0], [1.0, -1.0]]), [0.0, 0.0])
        a = check_assumptions(solve(P), P)
        assert a.zero_value
        assert "optimal value is zero" in a.flags

    def test_loose_tolerance_gap(self):
        P = generate_instance(InstanceSpec(60, 15, 0.3, "U(0,1)", 0))
        r = solve(P, SolverConfig(backend="scs", opt_tol=1e-2, feas_tol=1e-2))
        a = check_assumptions(r, P)
        assert a.gap_flag and any("duality gap" in f for f in a.flags)

    def test_requires_optimal(self):
        P = lp_problem([1.0], np.array([[1.0], [-1.0]]), [1.0, 0.0])
        with pytest.raises(ValueError):
            check_assumptions(solve(P), P)


class TestConfig:
    def test_unknown_backend(self):
        with pytest.raises(BackendUnavailable):
            SolverConfig(backend="gurobi")

    @pytest.mark.parametrize("tol", [0.0, 0.5, -1e-8])
    def test_bad_tolerance(self, tol):
        with pytest.raises(ValueError):
            SolverConfig(feas_tol=tol)

    def test_bad_time_limit(self):
        with pytest.raises(ValueError):
            SolverConfig(time_limit=0)

    def test_env_default(self, monkeypatch):
        monkeypatch.setenv("RPCONIC_BACKEND", "clarabel")
        assert SolverConfig().backend == "clarabel"
        assert solve(one_dim()).backend == "clarabel"

    def test_log_files(self, tmp_path):
        solve(one_dim(), SolverConfig(backend="highs", log_dir=str(tmp_path)))
        solve(one_dim(), SolverConfig(backend="highs", log_dir=str(tmp_path)))
        logs = sorted(tmp_path.glob("solve_*.json"))
        assert len(logs) == 2
        entry = json.loads(logs[0].read_text())
        assert entry["status"] == OPTIMAL and entry["value"] == pytest.approx(3.0)


class TestModelRoundTrip:
    def test_identity_side_as_bounds(self):
        P = generate_instance(InstanceSpec(50, 10, 0.3, "U(0,1)", 1))
        model = to_linprog_model(P)
        assert model.side_as_bounds and model.A_ub.shape == (50, 10)
        assert model.nnz == P.A0.nnz
        Q = from_linprog_model(model)
        assert Q.m == P.m and Q.n == P.n and Q.r == P.r
        assert (Q.A0 != P.A0).nnz == 0 and np.array_equal(Q.b0, P.b0)

    def test_general_side_rows(self):
        rng = np.random.default_rng(0)
        B = rng.standard_normal((3, 4))
        P = ConicProblem(c=np.ones(4), A0=rng.standard_normal((5, 4)), b0=np.zeros(5),
                         B=B, d=np.ones(3), side_cone="orthant")
        model = to_linprog_model(P)
        assert not model.side_as_bounds and model.A_ub.shape == (8, 4)
        Q = from_linprog_model(model)
        assert np.allclose(Q.B.toarray(), B) and np.array_equal(Q.d, np.ones(3))
        assert model.nnz == np.count_nonzero(P.A0) + np.count_nonzero(B)
