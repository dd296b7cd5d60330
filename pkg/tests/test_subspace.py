import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from dfbgn.subspace import (
    alignment,
    gaussian_qmax,
    gaussian_sketch,
    hashing_sketch,
    orthonormal_complement,
    sample_basis,
)

from oracles import projector_complement


class TestOrthonormalComplement:
    def test_full_basis_from_empty(self):
        d = orthonormal_complement(None, 6, np.random.default_rng(0), n=6)
        np.testing.assert_allclose(d.T @ d, np.eye(6), atol=1e-10)

    def test_orthogonal_to_e1(self):
        e1 = np.array([[1.0], [0.0], [0.0]])
        d = orthonormal_complement(e1, 2, np.random.default_rng(1))
        assert np.abs(e1.T @ d).max() <= 1e-10
        np.testing.assert_allclose(d.T @ d, np.eye(2), atol=1e-10)

    def test_matches_projector_oracle(self):
        rng = np.random.default_rng(5)
        q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
        d = orthonormal_complement(q, 3, np.random.default_rng(9))
        # same standard-normal draw, independent projector + Gram-Schmidt
        a = np.random.default_rng(9).standard_normal((10, 3))
        d_ref, _ = projector_complement(q, a)
        assert np.abs(q.T @ d).max() <= 1e-10
        # equal up to column signs
        np.testing.assert_allclose(np.abs(d.T @ d_ref), np.eye(3), atol=1e-10)

    @given(st.integers(1, 30), st.data())
    def test_orthogonality_property(self, n, data):
        p1 = data.draw(st.integers(0, n - 1))
        q = data.draw(st.integers(1, n - p1))
        seed = data.draw(st.integers(0, 2**32))
        rng = np.random.default_rng(seed)
        existing = np.linalg.qr(rng.standard_normal((n, p1)))[0] if p1 else None
        d = orthonormal_complement(existing, q, rng, n=n)
        assert np.abs(d.T @ d - np.eye(q)).max() <= 1e-10
        if p1:
            assert np.abs(existing.T @ d).max() <= 1e-10

    def test_deterministic(self):
        a = orthonormal_complement(None, 3, np.random.default_rng(42), n=8)
        b = orthonormal_complement(None, 3, np.random.default_rng(42), n=8)
        assert np.array_equal(a, b)

    def test_too_many(self):
        with pytest.raises(ValueError):
            orthonormal_complement(np.eye(4)[:, :3], 2, np.random.default_rng(0))

    def test_zero_requested(self):
        assert orthonormal_complement(None, 0, np.random.default_rng(0), n=4).shape == (4, 0)


class TestGaussian:
    def test_shape_finite(self):
        b = gaussian_sketch(5, 5, np.random.default_rng(0))
        assert b.Q.shape == (5, 5) and np.all(np.isfinite(b.Q))

    def test_determinism(self):
        a = gaussian_sketch(100, 10, np.random.default_rng(7)).Q
        b = gaussian_sketch(100, 10, np.random.default_rng(7)).Q
        assert np.array_equal(a, b)

    def test_variance(self):
        q = gaussian_sketch(1000, 50, np.random.default_rng(1)).Q
        assert q.var() == pytest.approx(1 / 50, rel=0.05)

    def test_isometry_in_mean(self):
        rng = np.random.default_rng(2)
        q = gaussian_sketch(1000, 50, rng).Q
        v = rng.standard_normal((1000, 10_000))
        v /= np.linalg.norm(v, axis=0)
        ratio = np.sum((q.T @ v) ** 2, axis=0)
        assert abs(ratio.mean() - 1.0) <= 0.05

    def test_norm_cap(self):
        for seed in range(20):
            b = gaussian_sketch(60, 6, np.random.default_rng(seed))
            assert np.linalg.norm(b.Q, 2) <= gaussian_qmax(60, 6)
            assert b.rejections >= 0


class TestHashing:
    def test_structure(self):
        b = hashing_sketch(100, 20, 3, np.random.default_rng(0))
        q = b.Q
        assert sp.issparse(q)
        dense = q.toarray()
        nnz = np.count_nonzero(dense, axis=1)
        assert np.all(nnz == 3)
        np.testing.assert_allclose(np.abs(dense[dense != 0]), 1 / np.sqrt(3))

    def test_signed_permutation_like(self):
        dense = hashing_sketch(10, 10, 1, np.random.default_rng(3)).dense()
        assert np.all(np.count_nonzero(dense, axis=1) == 1)
        assert set(np.unique(np.abs(dense[dense != 0]))) == {1.0}

    def test_jlt_property(self):
        # At p = 10 even a Gaussian sketch keeps ||Sv||^2/||v||^2 in [0.5, 1.5] only with
        # probability P(chi2_10 / 10 in [0.5, 1.5]) ~ 0.76; hashing should do at least as well.
        from scipy.stats import chi2

        baseline = chi2.cdf(15, 10) - chi2.cdf(5, 10)
        rng = np.random.default_rng(11)
        v = rng.standard_normal(50)
        ratios = np.array([np.sum((hashing_sketch(50, 10, 3, rng).Q.T @ v) ** 2) / (v @ v) for _ in range(1000)])
        frac = np.mean((ratios >= 0.5) & (ratios <= 1.5))
        assert frac >= baseline - 0.04
        assert abs(ratios.mean() - 1.0) <= 0.05

    def test_sparse_vector_norm_exact(self):
        # a coordinate vector maps to s entries of magnitude 1/sqrt(s): norm preserved exactly
        rng = np.random.default_rng(12)
        e = np.zeros(50)
        e[17] = 1.0
        for _ in range(100):
            q = hashing_sketch(50, 10, 3, rng).Q
            assert np.sum((q.T @ e) ** 2) == pytest.approx(1.0)

    def test_signs_balanced(self):
        dense = hashing_sketch(2000, 10, 2, np.random.default_rng(4)).dense()
        frac_pos = np.mean(dense[dense != 0] > 0)
        assert abs(frac_pos - 0.5) < 0.03

    def test_s_greater_than_p(self):
        with pytest.raises(ValueError):
            hashing_sketch(10, 3, 4, np.random.default_rng(0))


class TestAlignment:
    def test_identity(self):
        g = np.random.default_rng(0).standard_normal(7)
        assert alignment(np.eye(7), g) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert alignment(np.eye(3)[:, :1], np.array([0.0, 1.0, 0.0])) == 0.0

    def test_zero_gradient(self):
        with pytest.raises(ValueError):
            alignment(np.eye(3), np.zeros(3))

    def test_sparse_input(self):
        b = hashing_sketch(30, 5, 2, np.random.default_rng(0))
        g = np.arange(30.0)
        assert alignment(b.Q, g) == pytest.approx(alignment(b.dense(), g))

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            sample_basis("orthonormal", 3, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sample_basis("nope", 3, 2, np.random.default_rng(0))
