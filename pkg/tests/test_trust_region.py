import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfbgn.trust_region import cauchy_bound, solve_trs, step_bound_constant

from oracles import dense_trs, trs_value


def gn_instance(rng, p):
    """Gauss-Newton style instance: H = J^T J with random rank and scaling, g = J^T r."""
    m = int(rng.integers(1, 2 * p + 2))
    jac = rng.standard_normal((m, p)) * 10.0 ** rng.uniform(-3, 2, size=p)
    r = rng.standard_normal(m) * 10.0 ** rng.uniform(-3, 2)
    g = jac.T @ r if rng.random() < 0.8 else rng.standard_normal(p)
    return g, jac.T @ jac, 10.0 ** rng.uniform(-4, 1)


class TestExamples:
    def test_newton_inside(self):
        g = np.array([0.3, -0.4])
        sol = solve_trs(g, np.eye(2), 1.0)
        np.testing.assert_allclose(sol.s_hat, -g, atol=1e-12)
        assert sol.model_decrease == pytest.approx(0.5 * g @ g)
        assert not sol.on_boundary

    def test_linear_model(self):
        g = np.array([3.0, 4.0])
        sol = solve_trs(g, np.zeros((2, 2)), 0.5)
        np.testing.assert_allclose(sol.s_hat, -0.5 * g / 5.0)
        assert sol.model_decrease == pytest.approx(0.5 * 5.0)
        assert sol.on_boundary

    def test_zero_gradient(self):
        sol = solve_trs(np.zeros(3), np.eye(3), 1.0)
        assert np.array_equal(sol.s_hat, np.zeros(3)) and sol.model_decrease == 0.0

    def test_non_finite(self):
        with pytest.raises(ValueError):
            solve_trs(np.array([np.nan]), np.eye(1), 1.0)
        with pytest.raises(ValueError):
            solve_trs(np.ones(1), np.eye(1), 0.0)

    def test_negative_curvature_exits_to_boundary(self):
        sol = solve_trs(np.array([1.0, 0.0]), np.diag([-1.0, 1.0]), 2.0)
        assert sol.on_boundary and sol.exit == "negative_curvature"

    def test_step_constant(self):
        assert step_bound_constant(0.5) == pytest.approx(np.sqrt(2) - 1)


class TestContract:
    @pytest.mark.parametrize("p", [1, 2, 5, 20, 100])
    def test_cauchy_and_step_bound(self, p):
        rng = np.random.default_rng(100 + p)
        c2 = step_bound_constant(0.5)
        for _ in range(200):
            g, H, delta = gn_instance(rng, p)
            sol = solve_trs(g, H, delta)
            gn = np.linalg.norm(g)
            hn = np.linalg.norm(H, 2)
            assert sol.model_decrease >= cauchy_bound(g, H, delta) * (1 - 1e-10)
            assert np.linalg.norm(sol.s_hat) >= c2 * min(delta, gn / max(hn, 1.0)) * (1 - 1e-10)
            assert np.linalg.norm(sol.s_hat) <= delta * (1 + 1e-10)
            assert sol.model_decrease >= 0

    @given(st.integers(1, 12), st.integers(0, 2**32))
    def test_monotone_cg(self, p, seed):
        g, H, delta = gn_instance(np.random.default_rng(seed), p)
        vals = np.array(solve_trs(g, H, delta).model_values)
        assert np.all(np.diff(vals) <= 1e-12 * max(1.0, np.abs(vals).max()))

    def test_interior_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(500):
            p = int(rng.integers(1, 6))
            jac = rng.standard_normal((p + 2, p))
            H = jac.T @ jac
            g = rng.standard_normal(p)
            delta = 10.0 ** rng.uniform(-1, 2)
            sol = solve_trs(g, H, delta)
            ref = dense_trs(g, H, delta)
            best = -trs_value(g, H, ref)
            if not sol.on_boundary:
                checked += 1
                assert abs(sol.model_decrease - best) <= 1e-6 * max(1.0, best)
            assert sol.model_decrease <= best + 1e-9 * max(1.0, best)
        assert checked > 50

    def test_boundary_hit_reported(self):
        sol = solve_trs(np.array([10.0, 0.0]), np.eye(2), 1.0)
        assert sol.on_boundary and np.linalg.norm(sol.s_hat) == pytest.approx(1.0)
