import numpy as np
import pytest

from snmtf.bcd import (
    bcd_solve,
    linesearch_g,
    linesearch_s,
    quartic_coeffs,
)
from snmtf.gradients import grad_native
from snmtf.model import (
    DataBundle,
    Factorization,
    SolverConfig,
    se,
)

from conftest import exact_fit_pair, random_bundle, random_native_fact


class TestQuarticCoeffs:
    def test_zero_direction(self, rng):
        bundle = random_bundle(rng, 6, 2)
        fact = random_native_fact(rng, 6, 2, 2)
        poly = quartic_coeffs(bundle, fact, np.zeros_like(fact.G))
        assert poly.c[0] == pytest.approx(se(bundle, fact), rel=1e-12)
        np.testing.assert_allclose(poly.c[1:], 0.0, atol=1e-12)

    def test_exact_fit_leaves_only_even_terms(self, rng):
        bundle, fact = exact_fit_pair(rng, 6, 2, 2)
        dg = rng.standard_normal(fact.G.shape)
        poly = quartic_coeffs(bundle, fact, dg)
        scale = bundle.norm_sq_total
        assert abs(poly.c[0]) <= 1e-12 * scale
        assert abs(poly.c[1]) <= 1e-10 * scale
        assert poly.c[2] >= 0.0  # sum of ||P_i||^2
        assert poly.c[4] >= 0.0

    def test_probe_values_match_direct_se(self, rng):
        bundle = random_bundle(rng, 5, 3)
        fact = random_native_fact(rng, 5, 2, 3)
        dg, _ = grad_native(bundle, fact)
        poly = quartic_coeffs(bundle, fact, dg)
        for t in (-1.0, -0.5, -0.1, 0.1, 0.5):
            direct = se(bundle, Factorization(fact.G + t * dg, fact.S))
            assert poly(t) == pytest.approx(direct, rel=1e-9)

    def test_c4_nonnegative(self, rng):
        bundle = random_bundle(rng, 6, 2)
        fact = random_native_fact(rng, 6, 3, 2)
        dg = rng.standard_normal(fact.G.shape)
        assert quartic_coeffs(bundle, fact, dg).c[4] >= 0.0


class TestLinesearchG:
    def test_scalar_case_matches_grid_search(self):
        # R = 4, G = 1, S = 1: gradient is -12 and
        # p(t) = (4 - (1 - 12 t)^2)^2 over [-1, 0].
        bundle = DataBundle.from_matrices([np.array([[4.0]])])
        fact = Factorization(np.array([[1.0]]), [np.array([[1.0]])])
        rng = np.random.default_rng(0)
        g_new = linesearch_g(bundle, fact, rng)
        t_taken = (g_new[0, 0] - 1.0) / -12.0

        ts = np.linspace(-1.0, 0.0, 10**6)
        vals = (4.0 - (1.0 - 12.0 * ts) ** 2) ** 2
        t_grid = ts[np.argmin(vals)]
        assert t_taken == pytest.approx(t_grid, abs=1e-6)

    def test_strict_descent_case_decreases_se(self, rng):
        bundle = random_bundle(rng, 8, 2, scale=2.0)
        fact = random_native_fact(rng, 8, 3, 2)
        before = se(bundle, fact)
        g_new = linesearch_g(bundle, fact, np.random.default_rng(1))
        after = se(bundle, Factorization(g_new, fact.S))
        # far from stationarity the decrease clears the perturbation threshold
        assert after < before - 1e-3
        assert float(g_new.min()) >= 0.0

    def test_perturbation_fires_at_exact_fit(self, rng):
        bundle, fact = exact_fit_pair(rng, 6, 2, 2)
        g_new = linesearch_g(bundle, fact, np.random.default_rng(5))
        delta = g_new - fact.G
        assert np.any(delta != 0.0)
        assert np.abs(delta).max() <= 1e-5  # escape scale
        after = se(bundle, Factorization(g_new, fact.S))
        assert after <= 1e-6  # tiny controlled increase


class TestLinesearchS:
    def test_exact_fit_unchanged(self, rng):
        bundle, fact = exact_fit_pair(rng, 6, 2, 2)
        s_new = linesearch_s(bundle, fact, 0)
        np.testing.assert_allclose(s_new, fact.S[0], atol=1e-12)

    def test_t_matches_grid_search(self, rng):
        bundle = random_bundle(rng, 6, 1)
        fact = random_native_fact(rng, 6, 2, 1)
        _, ds = grad_native(bundle, fact)
        d = ds[0]
        z = bundle.R[0] - (fact.G @ fact.S[0]) @ fact.G.T
        w = (fact.G @ d) @ fact.G.T

        # independent grid search on ||Z - t W||^2 over [-2, 2], 10^6 points
        ts = np.linspace(-2.0, 2.0, 10**6)
        best_t, best_v = 0.0, np.inf
        for chunk in np.array_split(ts, 50):
            vals = np.sum((z[None, :, :] - chunk[:, None, None] * w[None, :, :]) ** 2, axis=(1, 2))
            j = int(np.argmin(vals))
            if vals[j] < best_v:
                best_v, best_t = vals[j], chunk[j]

        t_closed = float(np.sum(z * w)) / float(np.sum(w * w))
        s_new = linesearch_s(bundle, fact, 0)
        np.testing.assert_allclose(s_new, np.maximum(fact.S[0] + t_closed * d, 0.0), atol=1e-12)
        assert abs(t_closed - best_t) <= 1e-5

    def test_quadratic_value_never_above_start(self, rng):
        # p_i(t*) <= p_i(0) for 100 random instances (convexity).
        for trial in range(100):
            r = np.random.default_rng(trial)
            bundle = random_bundle(r, 5, 1)
            fact = random_native_fact(r, 5, 2, 1)
            _, ds = grad_native(bundle, fact)
            d = ds[0]
            z = bundle.R[0] - (fact.G @ fact.S[0]) @ fact.G.T
            w = (fact.G @ d) @ fact.G.T
            denom = float(np.sum(w * w))
            if denom == 0.0:
                continue
            t = float(np.sum(z * w)) / denom
            p0 = float(np.sum(z * z))
            pt = float(np.sum((z - t * w) ** 2))
            assert pt <= p0 * (1 + 1e-12)

    def test_degenerate_direction_skips(self):
        # G = 0 makes ||G dS G^T|| = 0; the update must be a no-op.
        bundle = DataBundle.from_matrices([np.eye(3)])
        fact = Factorization(np.zeros((3, 2)), [np.full((2, 2), 0.5)])
        s_new = linesearch_s(bundle, fact, 0)
        np.testing.assert_array_equal(s_new, fact.S[0])


class TestSolve:
    def test_planted_recovery_small(self):
        from snmtf.data import generate_synthetic
        from snmtf.initialization import deterministic_g

        bundle, _ = generate_synthetic(n=40, K=4, N=5, seed=3)
        config = SolverConfig(method="bcd", k=4, seed=1)
        fact, trace = bcd_solve(bundle, config, deterministic_g(bundle, 4))
        assert trace.final.mse <= 0.05
        assert float(fact.G.min()) >= 0.0
        assert all(float(s.min()) >= 0.0 for s in fact.S)

    def test_symmetry_maintained(self, rng):
        bundle = random_bundle(rng, 10, 3)
        config = SolverConfig(method="bcd", k=3, seed=2, max_iterations=20, mse_stop=0.0)
        fact, _ = bcd_solve(bundle, config, rng.random((10, 3)))
        for s in fact.S:
            assert np.abs(s - s.T).max() <= 1e-10 * max(np.abs(s).max(), 1.0)

    def test_s_substeps_never_increase_pre_projection(self, rng):
        bundle = random_bundle(rng, 8, 2)
        config = SolverConfig(method="bcd", k=2, seed=0, max_iterations=5, mse_stop=0.0)
        log: list = []
        bcd_solve(bundle, config, rng.random((8, 2)), substep_log=log)
        assert log
        for row in log:
            assert row["se_unprojected"] <= row["se_before"] * (1 + 1e-12) + 1e-12

    def test_negative_start_rejected(self, rng):
        bundle = random_bundle(rng, 4, 1)
        config = SolverConfig(method="bcd", k=1)
        with pytest.raises(ValueError, match="non-negative"):
            bcd_solve(bundle, config, -np.ones((4, 1)))

    def test_outer_iteration_is_s_block_then_g_block(self, rng):
        # one outer iteration == 10 S line searches per i from the constant
        # start at fixed G, then 10 G line searches at the new S
        bundle = random_bundle(rng, 6, 2)
        start_g = rng.random((6, 2))
        config = SolverConfig(
            method="bcd", k=2, seed=3, max_iterations=1, mse_stop=0.0, delta_stop=0.0
        )
        fact, _ = bcd_solve(bundle, config, start_g)

        s_list = [np.full((2, 2), 0.5) for _ in range(2)]
        work = Factorization(start_g.copy(), s_list)
        for i in range(2):
            for _ in range(config.bcd_inner_iterations):
                work.S[i] = linesearch_s(bundle, work, i)
        manual_rng = np.random.default_rng(config.seed)
        for _ in range(config.bcd_inner_iterations):
            work.G = linesearch_g(bundle, work, manual_rng)
        np.testing.assert_array_equal(fact.G, work.G)
        for a, b in zip(fact.S, work.S):
            np.testing.assert_array_equal(a, b)

    def test_inner_iteration_count_is_configurable(self, rng):
        bundle = random_bundle(rng, 6, 2)
        config = SolverConfig(
            method="bcd", k=2, seed=0, max_iterations=3, mse_stop=0.0, bcd_inner_iterations=2
        )
        fact, trace = bcd_solve(bundle, config, rng.random((6, 2)))
        assert trace.iterations <= 3
