import numpy as np
import pytest

from tcmilstein import SamplingSpec, check_assumptions, example1, example2, gbm, lg
from tcmilstein.problems import ASSUMPTION_IDS, by_name
from util import drift_only, quintic_drift


class TestExample1:
    def test_fields(self):
        p = example1()
        assert p.d == 1 and p.T == 1.0
        assert p.alpha == 4.0
        assert (p.gamma_f, p.gamma_g) == (0.25, 1.0)
        np.testing.assert_array_equal(p.y0, [1.0])

    def test_drift_hand_values(self):
        p = example1()
        assert p.f(0.5, np.array([1.0]))[0] == pytest.approx(-0.2928932188134524, rel=1e-12)
        assert p.f(0.5, np.array([0.5]))[0] == pytest.approx(0.3223033905932738, rel=1e-12)

    def test_diffusion_vanishes_at_boundary_times(self):
        p = example1()
        for y in (-2.0, 0.3, 5.0):
            assert p.g(0.0, np.array([y]))[0] == 0.0
            assert p.g(1.0, np.array([y]))[0] == 0.0


class TestExample2:
    def test_fields(self):
        p = example2()
        assert p.d == 2
        assert (p.gamma_f, p.gamma_g) == (0.2, 0.5)
        np.testing.assert_array_equal(p.y0, [1.0, 1.0])

    def test_origin_is_fixed_point(self):
        p = example2()
        np.testing.assert_array_equal(p.f(0.5, np.zeros(2)), [0.0, 0.0])
        np.testing.assert_array_equal(p.g(0.5, np.zeros(2)), [0.0, 0.0])

    def test_gradient_product_hand_value(self):
        np.testing.assert_allclose(lg(example2(), 0.5, np.ones(2)), [0.5, 0.5], rtol=1e-12)

    def test_drift_cross_coupling(self):
        p = example2()
        val = p.f(0.5, np.array([0.0, 2.0]))
        assert val[0] == pytest.approx(-32.0, rel=1e-12)  # -x2^5
        assert val[1] == pytest.approx(0.25**0.2 * 2.0, rel=1e-12)


class TestRegistry:
    def test_by_name(self):
        assert by_name("example1").name == "example1"
        assert by_name("gbm").d == 1
        with pytest.raises(ValueError, match="unknown problem"):
            by_name("nope")

    def test_gbm_exact_solution(self):
        p = gbm(drift=0.1, vol=0.2, y0=2.0)
        e = np.array([0.0, 0.5, 1.0])
        w = np.array([0.0, 0.3, -0.1])
        vals = p.exact_solution(e, w)
        expected = 2.0 * np.exp((0.1 - 0.02) * e + 0.2 * w)
        np.testing.assert_allclose(vals[:, 0], expected, rtol=1e-15)


class TestSamplingSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplingSpec(radius=0.0, samples=2000)
        with pytest.raises(ValueError):
            SamplingSpec(radius=1.0, samples=10)
        with pytest.raises(ValueError):
            SamplingSpec(radius=1.0, samples=2000, p=2.0)
        with pytest.raises(ValueError):
            SamplingSpec(radius=1.0, samples=2000, candidates={"bogus": 1.0})


class TestCheckAssumptions:
    def test_report_shape_and_order(self):
        reports = check_assumptions(example1(), SamplingSpec(radius=3.0, samples=2000, seed=1))
        assert tuple(r.assumption for r in reports) == ASSUMPTION_IDS
        for r in reports:
            assert r.samples == 2000
            assert np.isfinite(r.max_ratio)
            assert r.fitted and not r.violated

    def test_contractive_linear_drift_passes_unit_candidates(self):
        # f = -y, g = 0: every ratio stays at or below one
        reports = check_assumptions(
            drift_only(lam=1.0),
            SamplingSpec(radius=2.0, samples=5000, seed=3,
                         candidates={aid: 1.0 + 1e-9 for aid in ASSUMPTION_IDS}),
        )
        assert not any(r.violated for r in reports)

    def test_benchmark_monotone_coupling_not_violated_with_large_candidate(self):
        reports = check_assumptions(
            example1(),
            SamplingSpec(radius=3.0, samples=20_000, seed=4,
                         candidates={"monotone_coupling": 1e4}),
        )
        rep = {r.assumption: r for r in reports}["monotone_coupling"]
        assert not rep.violated and not rep.fitted

    def test_unstable_quintic_drift_violates_monotonicity(self):
        # f = +y^5 cannot satisfy the one-sided condition with a fixed constant
        reports = check_assumptions(
            quintic_drift(sign=+1.0),
            SamplingSpec(radius=3.0, samples=20_000, seed=5,
                         candidates={"monotone_coupling": 100.0}),
        )
        rep = {r.assumption: r for r in reports}["monotone_coupling"]
        assert rep.violated
        assert rep.max_ratio > 100.0
        assert all(np.isfinite(w) for w in rep.witness)
        # witness sits near the box boundary where the ratio grows like x^4
        assert max(abs(w) for w in rep.witness[1:]) > 2.0

    def test_deterministic_given_seed(self):
        spec = SamplingSpec(radius=2.0, samples=3000, seed=7)
        a = check_assumptions(example2(), spec)
        b = check_assumptions(example2(), spec)
        for ra, rb in zip(a, b):
            assert ra.max_ratio == rb.max_ratio
            assert ra.witness == rb.witness

    def test_monotone_in_sample_count(self):
        small = check_assumptions(example1(), SamplingSpec(radius=3.0, samples=2000, seed=9))
        large = check_assumptions(example1(), SamplingSpec(radius=3.0, samples=8000, seed=9))
        for rs, rl in zip(small, large):
            assert rl.max_ratio >= rs.max_ratio
