import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpconic.sketch import (ProbabilityConstants, SketchBundle, SketchConfig, SketchConfigError,
                            apply_inequality_sketch, apply_psd_sketch, corollary1_residual,
                            diag_embed, diag_extract, gaussian_entries, gaussian_matrix,
                            lemma3_residual, make_sketch)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"k": 0}, {"k": 3, "q": (0,)}, {"k": 3, "epsilon": 0.0}, {"k": 3, "epsilon": 1.0},
        {"k": 3, "delta": 0.125}, {"k": 3, "delta": 0.0}, {"k": 3, "seed": -1},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(SketchConfigError):
            SketchConfig(**kwargs)

    def test_probability_constants(self):
        pc = ProbabilityConstants(c2=2.0, c3=3.0)
        assert pc.cmax == 3.0
        with pytest.raises(ValueError):
            ProbabilityConstants(c0=0.0)
        # scaling: the sample-size condition is linear in 1/c1
        a = ProbabilityConstants().sample_size_threshold(10, 0.2, 0.1)
        b = ProbabilityConstants(c1=2.0).sample_size_threshold(10, 0.2, 0.1)
        assert b == pytest.approx(a / 2)
        assert a == pytest.approx(4 / 0.04 * (30 - np.log(0.1)))
        assert ProbabilityConstants().failure_probability(10, 3, 5, 0.2, 0.01) > 0


class TestMakeSketch:
    def test_small_bundle_entrywise_square(self):
        b = make_sketch(3, (), SketchConfig(k=2, seed=7))
        assert b.S.shape == (2, 3)
        assert np.all(b.S >= 0)
        assert np.array_equal(b.S, b.T * b.T)

    def test_deterministic(self):
        cfg = SketchConfig(k=4, q=(2, 3), seed=11)
        a, b = make_sketch(9, (5, 4), cfg), make_sketch(9, (5, 4), cfg)
        assert np.array_equal(a.T, b.T) and np.array_equal(a.S, b.S)
        assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))
        assert a.to_bytes() == b.to_bytes()

    def test_different_roles_are_independent(self):
        b = make_sketch(4, (4,), SketchConfig(k=4, q=(4,), seed=1))
        assert not np.allclose(b.T * 2.0, b.blocks[0])

    def test_serialization_round_trip(self):
        b = make_sketch(6, (3,), SketchConfig(k=3, q=(2,), seed=5, epsilon=0.3))
        c = SketchBundle.from_bytes(b.to_bytes())
        assert c.config == b.config
        assert np.array_equal(c.T, b.T) and np.array_equal(c.S, b.S)
        assert np.array_equal(c.blocks[0], b.blocks[0])
        r = b.regenerate()
        assert np.array_equal(r.T, b.T)

    def test_readonly(self):
        b = make_sketch(5, (), SketchConfig(k=2))
        with pytest.raises(ValueError):
            b.S[0, 0] = 1.0

    def test_dimension_errors(self):
        with pytest.raises(SketchConfigError):
            make_sketch(5, (3,), SketchConfig(k=2))
        with pytest.raises(SketchConfigError):
            make_sketch(5, (3,), SketchConfig(k=2, q=(4,)))

    def test_identity_bundle(self):
        b = SketchBundle.identity_like(4, (3,))
        assert b.identity and b.k == 4 and b.q == (3,)
        assert np.array_equal(b.S, np.eye(4))
        assert SketchBundle.from_bytes(b.to_bytes()).identity

    def test_mean_of_S_is_one_over_k(self):
        k, m = 50, 200
        # 10 bundles of 50 x 200 give 10^5 draws of S_ij
        T = np.concatenate([make_sketch(m, (), SketchConfig(k=k, seed=s)).T.ravel()
                            for s in range(10)])
        S = T * T
        assert abs(S.mean() - 1 / k) < 3 * S.std() / np.sqrt(S.size)
        # sample variance of N(0, 1/k) has standard error sqrt(2/N)/k
        assert abs(T.var() - 1 / k) < 3 * np.sqrt(2 / T.size) / k

    def test_nonnegative_over_seeds(self):
        for seed in range(100):
            assert make_sketch(7, (), SketchConfig(k=3, seed=seed)).S.min() >= 0


class TestCounterRng:
    def test_sub_block_regeneration(self):
        full = gaussian_matrix(3, 0, 10, 7)
        part = gaussian_matrix(3, 0, 10, 7, row_start=4, row_stop=8)
        assert np.array_equal(full[4:8], part)

    @given(st.integers(0, 200), st.integers(1, 50))
    @settings(max_examples=30, deadline=None)
    def test_entries_depend_only_on_index(self, start, count):
        whole = gaussian_entries(9, 2, 0, start + count)
        assert np.array_equal(whole[start:], gaussian_entries(9, 2, start, count))

    def test_standard_normal_moments(self):
        z = gaussian_entries(0, 0, 0, 200_000)
        assert abs(z.mean()) < 4 / np.sqrt(z.size)
        assert abs(z.var() - 1) < 4 * np.sqrt(2 / z.size)


class TestOperators:
    def test_inequality_sketch(self):
        assert apply_inequality_sketch([[1, 4]], [1, 1]).tolist() == [5]
        assert np.all(apply_inequality_sketch(np.ones((2, 3)), np.zeros(3)) == 0)
        with pytest.raises(ValueError):
            apply_inequality_sketch(np.ones((2, 3)), np.ones(2))

    def test_nonneg_maps_orthant(self):
        b = make_sketch(8, (), SketchConfig(k=3, seed=2))
        y = np.random.default_rng(0).uniform(0, 1, 8)
        assert np.all(apply_inequality_sketch(b.S, y) >= 0)

    def test_psd_sketch(self):
        M = np.array([[2.0, 1.0], [1.0, 3.0]])
        assert np.array_equal(apply_psd_sketch(np.eye(2), M), M)
        assert np.all(apply_psd_sketch(np.ones((1, 2)), np.zeros((2, 2))) == 0)
        with pytest.raises(ValueError):
            apply_psd_sketch(np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_psd_sketch_preserves_psd(self):
        rng = np.random.default_rng(1)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        M = Q @ np.diag([1.0, 2.0, 3.0]) @ Q.T
        for _ in range(100):
            R = apply_psd_sketch(rng.standard_normal((3, 3)), M)
            assert np.array_equal(R, R.T)
            w = np.linalg.eigvalsh(R)
            assert w.min() >= -1e-9 * max(1.0, abs(w).max())

    def test_diag_helpers(self):
        assert diag_embed([1, 2]).tolist() == [[1, 0], [0, 2]]
        assert diag_extract(np.eye(3)).tolist() == [1, 1, 1]
        y = np.random.default_rng(0).standard_normal(6)
        assert np.array_equal(diag_extract(diag_embed(y)), y)


class TestExactIdentities:
    def test_lemma_example(self):
        T = make_sketch(3, (), SketchConfig(k=2, seed=4)).T
        y0 = np.array([1.0, 2.0, 3.0])
        assert lemma3_residual(T, y0) <= 1e-12 * np.max(np.abs((T * T) @ y0))
        assert lemma3_residual(T, np.zeros(3)) == 0.0

    def test_single_row(self):
        T = np.array([[0.3, -1.2, 0.7]])
        y0 = np.array([2.0, 1.0, 5.0])
        assert (T * T @ y0)[0] == pytest.approx((T @ np.diag(y0) @ T.T)[0, 0], rel=1e-15)

    def test_corollary_examples(self):
        T = make_sketch(5, (), SketchConfig(k=3, seed=8)).T
        S = T * T
        assert corollary1_residual(T, np.ones(5)) <= 1e-12 * np.max(S.T @ S @ np.ones(5))
        assert corollary1_residual(T, np.zeros(5)) == 0.0
        e1 = np.eye(5)[0]
        assert np.allclose(S.T @ (S @ e1), S.T @ S[:, 0], rtol=0, atol=0)

    @given(st.integers(2, 50), st.integers(1, 20), st.integers(0, 2**32 - 1), st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_identities_hold(self, m, k, seed, signed):
        rng = np.random.default_rng(seed)
        T = rng.standard_normal((k, m)) / np.sqrt(k)
        y0 = rng.standard_normal(m) if signed else rng.uniform(0, 1, m)
        S = T * T
        scale = max(1.0, np.max(np.abs(S.T @ (S @ y0))), np.max(np.abs(S @ y0)))
        assert lemma3_residual(T, y0) <= 1e-10 * scale
        assert corollary1_residual(T, y0) <= 1e-10 * scale
