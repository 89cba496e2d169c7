import math

import numpy as np
import pytest

from tcmilstein import (
    ErrorRow,
    ErrorTable,
    NumericOverflowError,
    SdeProblem,
    SubordinatorModel,
    TimeChangeGrid,
    TruncationConfig,
    aggregate,
    example1,
    fit_convergence_order,
    gbm,
    generate_coupled_noise,
    simulate_path,
    strong_error_table,
)
from util import wide_trunc, zero_problem

CFG = TruncationConfig(mu_coeff=2.0, mu_exponent=5.0, epsilon=0.02)
STABLE = SubordinatorModel.stable(alpha=0.9)
DET = SubordinatorModel.deterministic()


def noise_list(model, h_fine, T, M, seed, factors=(1,)):
    return list(generate_coupled_noise(model, h_fine, T, M, seed, factors=factors))


class TestNoise:
    def test_deterministic_model_increments(self):
        (nz,) = noise_list(DET, 1e-3, 1.0, 1, 0)
        assert np.all(nz.deltas == 1e-3)

    def test_same_seed_identical_streams(self):
        a = noise_list(STABLE, 1e-3, 1.0, 3, 42, factors=(10,))
        b = noise_list(STABLE, 1e-3, 1.0, 3, 42, factors=(10,))
        for na, nb in zip(a, b):
            np.testing.assert_array_equal(na.deltas, nb.deltas)
            np.testing.assert_array_equal(na.dw, nb.dw)

    def test_streams_depend_on_index_not_batch(self):
        # trajectory j is a pure function of (seed, j)
        solo = noise_list(STABLE, 1e-2, 1.0, 3, 7)[2]
        batch = noise_list(STABLE, 1e-2, 1.0, 5, 7)[2]
        np.testing.assert_array_equal(solo.deltas, batch.deltas)
        np.testing.assert_array_equal(solo.dw, batch.dw)

    def test_covers_horizon_and_factor_multiples(self):
        for nz in noise_list(STABLE, 1e-3, 1.0, 4, 3, factors=(10, 4)):
            assert len(nz.deltas) % 20 == 0  # lcm(10, 4)
            assert nz.deltas.sum() > 1.0
            assert np.all(nz.deltas > 0.0)
            assert len(nz.dw) == len(nz.deltas)

    def test_wiener_variance_matches_step(self):
        (nz,) = noise_list(DET, 1e-4, 1.0, 1, 11)
        var = nz.dw.var(ddof=1)
        assert var == pytest.approx(1e-4, rel=0.1)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            noise_list(DET, 0.0, 1.0, 1, 0)
        with pytest.raises(ValueError):
            noise_list(DET, 0.1, 1.0, 0, 0)
        with pytest.raises(ValueError):
            noise_list(DET, 0.1, 1.0, 1, -1)


class TestAggregate:
    def test_identity_at_k_one(self):
        (nz,) = noise_list(STABLE, 1e-2, 1.0, 1, 1)
        assert aggregate(nz, 1) is nz

    def test_deterministic_coarse_step(self):
        (nz,) = noise_list(DET, 1e-3, 1.0, 1, 1, factors=(10,))
        coarse = aggregate(nz, 10)
        np.testing.assert_allclose(coarse.deltas, 1e-2, rtol=1e-14)
        assert coarse.h_fine == pytest.approx(1e-2, rel=1e-15)

    def test_segment_sums_exact(self):
        # each coarse increment is the partial sum over its fine segment:
        # bitwise equal to numpy's canonical summation of that slice, and
        # equal to exact (fsum) summation up to accumulation rounding
        (nz,) = noise_list(STABLE, 1e-2, 1.0, 1, 5, factors=(10,))
        coarse = aggregate(nz, 10)
        for n in range(len(coarse.deltas)):
            seg_d = nz.deltas[10 * n : 10 * n + 10]
            seg_w = nz.dw[10 * n : 10 * n + 10]
            assert coarse.deltas[n] == np.sum(seg_d)
            assert coarse.dw[n] == np.sum(seg_w)
            assert coarse.deltas[n] == pytest.approx(math.fsum(seg_d), rel=1e-13)

    def test_non_divisible_count_rejected(self):
        (nz,) = noise_list(DET, 1e-2, 1.0, 1, 1, factors=(10,))
        with pytest.raises(ValueError, match="divisible"):
            aggregate(nz, len(nz.deltas) - 1)

    def test_aggregated_laplace_oracle(self):
        # sums of k fine increments are distributed as D(k * h_fine)
        from tcmilstein import CoupledNoise, sample_increments

        h_fine, k = 1e-3, 10
        deltas = sample_increments(STABLE, h_fine, 1_000_000, np.random.default_rng(17))
        nz = CoupledNoise(h_fine=h_fine, deltas=deltas, dw=np.zeros(1_000_000), seed=17, index=0)
        draws = aggregate(nz, k).deltas
        assert len(draws) == 100_000
        vals = np.exp(-draws)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - math.exp(-k * h_fine)) <= 3.0 * se


def manual_sup_error(problem, cfg, noise, k, h_lvl, T):
    """Single-trajectory pipeline built only from public operations."""
    tau = np.concatenate([[0.0], np.cumsum(noise.deltas)])
    n_f = int((tau[1:] <= T).sum())
    fine = TimeChangeGrid.from_nodes(noise.h_fine, tau[: n_f + 2], T)
    ref = simulate_path(problem, cfg, fine, noise.dw[:n_f])
    tau_c = tau[::k]
    n_c = int((tau_c[1:] <= T).sum())
    coarse_grid = TimeChangeGrid.from_nodes(h_lvl, tau_c[: n_c + 2], T)
    coarse = simulate_path(problem, cfg, coarse_grid, aggregate(noise, k).dw[:n_c])
    # coarse nodes coincide with every k-th fine node, bitwise
    np.testing.assert_array_equal(coarse_grid.tau, tau[:: k][: n_c + 2])
    idx = np.arange(n_f + 1) // k
    diff = ref.states - coarse.states[idx]
    return np.sqrt((diff * diff).sum(axis=-1).max())


class TestStrongErrorTable:
    def test_zero_problem_has_zero_errors(self):
        tab = strong_error_table(zero_problem(), wide_trunc(), DET, [1e-1, 1e-2], 1e-3,
                                 4, 2.0, 0)
        assert all(row.error == 0.0 for row in tab.rows)

    def test_reference_row_is_exactly_zero(self):
        tab = strong_error_table(example1(), CFG, STABLE, [1e-2, 1e-3], 1e-3, 3, 2.0, 1)
        by_h = {row.h: row for row in tab.rows}
        assert by_h[1e-3].error == 0.0
        assert by_h[1e-2].error > 0.0

    def test_rows_sorted_by_decreasing_h(self):
        tab = strong_error_table(example1(), CFG, STABLE, [1e-3, 1e-1, 1e-2], 1e-3,
                                 2, 2.0, 3)
        hs = [row.h for row in tab.rows]
        assert hs == sorted(hs, reverse=True)

    def test_non_divisible_ladder_rejected(self):
        with pytest.raises(ValueError, match="integer multiple"):
            strong_error_table(example1(), CFG, STABLE, [1e-1, 1e-2], 3e-3, 2, 2.0, 0)

    def test_matches_manual_single_trajectory_pipeline(self):
        # the lockstep chunked engine against the public per-path operations
        problem, k, h_lvl, h_ref = example1(), 10, 1e-2, 1e-3
        tab = strong_error_table(problem, CFG, STABLE, [h_lvl], h_ref, 3, 2.0, 21)
        noises = noise_list(STABLE, h_ref, problem.T, 3, 21, factors=(k,))
        sups = [manual_sup_error(problem, CFG, nz, k, h_lvl, problem.T) for nz in noises]
        expected = float(np.mean(np.asarray(sups) ** 2) ** 0.5)
        assert tab.rows[0].error == pytest.approx(expected, rel=1e-13)

    def test_bytes_identical_across_threads_and_chunks(self):
        kw = dict(ladder=[1e-1, 1e-2], h_ref=1e-3, M=10, p_bar=2.0, seed=5)
        a = strong_error_table(example1(), CFG, STABLE, kw["ladder"], kw["h_ref"],
                               kw["M"], kw["p_bar"], kw["seed"], threads=1, chunk_size=3)
        b = strong_error_table(example1(), CFG, STABLE, kw["ladder"], kw["h_ref"],
                               kw["M"], kw["p_bar"], kw["seed"], threads=4, chunk_size=64)
        assert a.rows == b.rows

    def test_error_trend_and_moment_bound(self):
        # fixed-seed Monte Carlo property at desk scale
        tab = strong_error_table(example1(), CFG, STABLE, [1e-1, 1e-2, 1e-3], 1e-4,
                                 20, 2.0, 42, threads=2)
        errs = [row.error for row in tab.rows]
        assert errs == sorted(errs, reverse=True)
        for row in tab.rows:
            assert row.mean_sup_sq < 1e3
            assert np.isfinite(row.stderr) and row.stderr >= 0.0

    def test_norm_stable_under_doubling_m(self):
        common = dict(ladder=[1e-1, 1e-2], h_ref=1e-3, p_bar=2.0, seed=7)
        small = strong_error_table(example1(), CFG, STABLE, common["ladder"],
                                   common["h_ref"], 24, common["p_bar"], common["seed"])
        large = strong_error_table(example1(), CFG, STABLE, common["ladder"],
                                   common["h_ref"], 48, common["p_bar"], common["seed"])
        for rs, rl in zip(small.rows, large.rows):
            assert abs(rs.error - rl.error) <= 3.0 * (rs.stderr + rl.stderr)

    def test_gbm_exact_reference_order_near_one(self):
        ladder = [2.0**-k for k in range(4, 8)]
        tab = strong_error_table(gbm(), TruncationConfig(0.2, 1.0, 0.02), DET, ladder,
                                 2.0**-10, 200, 2.0, 9, reference="exact", chunk_size=200)
        reg = fit_convergence_order(tab)
        assert 0.7 < reg.slope < 1.3

    def test_exact_reference_requires_closed_form(self):
        with pytest.raises(ValueError, match="closed-form"):
            strong_error_table(example1(), CFG, DET, [1e-1], 1e-2, 2, 2.0, 0,
                               reference="exact")

    def test_overflow_raises_unless_skipped(self):
        def f(t, y):
            return 1e308 * y

        def g(t, y):
            return np.zeros_like(y)

        def g_jac(t, y):
            return np.zeros(y.shape + (1,))

        bad = SdeProblem(name="explode", d=1, f=f, g=g, g_jac=g_jac, y0=np.ones(1),
                         alpha=1.0, gamma_f=1.0, gamma_g=1.0)
        with pytest.raises(NumericOverflowError, match="trajectory"):
            strong_error_table(bad, wide_trunc(), DET, [0.5], 0.25, 2, 2.0, 0)
        with pytest.raises(NumericOverflowError, match="diverged"):
            strong_error_table(bad, wide_trunc(), DET, [0.5], 0.25, 2, 2.0, 0,
                               skip_blowups=True)


def synthetic_table(errors, hs):
    rows = [ErrorRow(h=h, m=1, p_bar=2.0, error=e, stderr=0.0, mean_sup_sq=0.0)
            for h, e in zip(hs, errors)]
    return ErrorTable(rows=rows, problem="synthetic", subordinator="none",
                      scheme="milstein", seed=0, h_ref=min(hs) / 10, p_bar=2.0)


class TestFit:
    def test_exact_power_law(self):
        hs = [1e-1, 1e-2, 1e-3, 1e-4]
        tab = synthetic_table([3.0 * h**0.5 for h in hs], hs)
        reg = fit_convergence_order(tab)
        assert reg.slope == pytest.approx(0.5, rel=1e-12)
        assert reg.intercept == pytest.approx(math.log10(3.0), rel=1e-12)
        np.testing.assert_allclose(reg.residuals, 0.0, atol=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="two ladder rows"):
            fit_convergence_order(synthetic_table([0.1], [1e-1]))

    def test_zero_error_row_named(self):
        tab = synthetic_table([0.1, 0.0], [1e-1, 1e-2])
        with pytest.raises(ValueError, match="h=0.01"):
            fit_convergence_order(tab)
