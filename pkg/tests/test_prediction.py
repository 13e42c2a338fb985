import numpy as np
import pytest

from modereg.distributions import BetaMeanDist, BetaModeDist, GbpDist
from modereg.numerics import RngStream
from modereg.prediction import (
    CoverageReport,
    PredictionInterval,
    cv_coverage_curves,
    cv_fixed_width_curves,
    fixed_width_intervals,
    highest_density_interval,
    kfold_coverage,
    loo_coverage,
    mean_interval,
    mode_interval,
)
from modereg.regression import ModelSpec, fit

from test_regression import STUDY_OPTIONS, make_dataset

HDI_CASES = [
    BetaModeDist(0.5, 2.0),
    BetaModeDist(0.15, 9.0),
    BetaModeDist(0.8, 30.0),
    GbpDist(0.5, 5.0),
    GbpDist(0.2, 10.0),
    GbpDist(0.9, 80.0),
    BetaMeanDist(0.4, 12.0),
]


class TestHdi:
    def test_symmetric_beta_half_mass(self):
        # for the symmetric Beta(2,2) density the q=0.5 HDI is centered
        d = BetaModeDist(0.5, 2.0)
        a, b = highest_density_interval(d, 0.5)
        assert a == pytest.approx(0.32635182, abs=1e-6)
        assert b == pytest.approx(0.67364818, abs=1e-6)
        assert d.cdf(b) - d.cdf(a) == pytest.approx(0.5, abs=1e-9)
        assert d.pdf(a) == pytest.approx(d.pdf(b), rel=1e-6)

    @pytest.mark.parametrize("dist", HDI_CASES)
    @pytest.mark.parametrize("q", [0.1, 0.3, 0.5, 0.8, 0.95])
    def test_mass_and_mode_containment(self, dist, q):
        a, b = highest_density_interval(dist, q)
        assert 0 <= a < b <= 1
        assert dist.cdf(b) - dist.cdf(a) == pytest.approx(q, abs=1e-6)
        assert a <= dist.mode() <= b

    @pytest.mark.parametrize("dist", HDI_CASES)
    def test_equal_density_endpoints_when_interior(self, dist):
        a, b = highest_density_interval(dist, 0.6)
        if a > 0 and b < 1:
            assert dist.pdf(a) == pytest.approx(dist.pdf(b), rel=1e-4)

    @pytest.mark.parametrize("dist", HDI_CASES)
    def test_nesting(self, dist):
        a1, b1 = highest_density_interval(dist, 0.3)
        a2, b2 = highest_density_interval(dist, 0.7)
        assert a2 <= a1 + 1e-9 and b1 <= b2 + 1e-9

    @pytest.mark.parametrize("dist", [BetaModeDist(0.3, 7.0),
                                      GbpDist(0.65, 12.0)])
    def test_shortest_among_same_mass_intervals(self, dist):
        # the HDI must be no wider than any other interval with the same mass
        q = 0.5
        a, b = highest_density_interval(dist, q)
        width = b - a
        rng = np.random.default_rng(12)
        for start_p in rng.uniform(0.0, 1 - q, 200):
            lo = dist.quantile(start_p)
            hi = dist.quantile(start_p + q)
            assert width <= hi - lo + 1e-7

    def test_q_domain(self):
        d = BetaModeDist(0.5, 2.0)
        for bad in [0.0, 1.0, -0.1, 1.5]:
            with pytest.raises(ValueError):
                highest_density_interval(d, bad)

    def test_flat_mean_beta_rejected(self):
        # shapes <= 1 have no interior mode
        with pytest.raises(ValueError):
            highest_density_interval(BetaMeanDist(0.5, 1.5), 0.5)


@pytest.fixture(scope="module")
def gbp_fit():
    data = make_dataset("gbp_mode", 120, seed=91, scale=10.0)
    return fit(ModelSpec("gbp_mode"), data, compute_covariance=False)


@pytest.fixture(scope="module")
def small_data():
    return make_dataset("gbp_mode", 60, seed=101, scale=10.0)


class TestModelIntervals:
    def test_mode_interval_matches_hdi(self, gbp_fit):
        from modereg.regression import conditional_distribution

        pi = mode_interval(gbp_fit, [0.4], 0.3)
        dist = conditional_distribution(gbp_fit.spec, gbp_fit.params, [0.4])
        a, b = highest_density_interval(dist, 0.3)
        assert (pi.lower, pi.upper) == (a, b)
        assert pi.kind == "mode_based"
        assert pi.nominal_q == 0.3
        assert pi.contains(dist.mode())

    def test_mean_interval_reuses_hdi_when_mean_inside(self, gbp_fit):
        pi_mode = mode_interval(gbp_fit, [0.0], 0.9)
        pi_mean = mean_interval(gbp_fit, [0.0], 0.9)
        # at q=0.9 the HDI is wide enough to hold the mean
        assert (pi_mean.lower, pi_mean.upper) == (pi_mode.lower, pi_mode.upper)
        assert not pi_mean.truncated

    def test_mean_interval_one_sided_mass(self, gbp_fit):
        # at tiny q on a skewed fit the HDI hugs the mode and can exclude
        # the mean; the fallback interval anchors the mean on its boundary
        from modereg.regression import conditional_distribution

        for x in [-2.5, 2.5]:
            dist = conditional_distribution(gbp_fit.spec, gbp_fit.params, [x])
            pi = mean_interval(gbp_fit, [x], 0.02)
            mu = dist.mean()
            assert pi.contains(mu)
            if not pi.truncated:
                assert dist.cdf(pi.upper) - dist.cdf(pi.lower) == \
                    pytest.approx(0.02, abs=1e-6)
                assert mu in (pytest.approx(pi.lower, abs=1e-12),
                              pytest.approx(pi.upper, abs=1e-12))

    def test_mean_interval_truncation_flag(self):
        # a mode at 0.1 with heavy right mass: a large one-sided q toward
        # the lower tail runs out of probability and truncates at 0
        from modereg.prediction import _one_sided_mass_interval

        dist = GbpDist(0.1, 8.0)
        lo, hi, truncated = _one_sided_mass_interval(dist, dist.mean(), 0.9,
                                                     toward_lower=True)
        assert truncated
        assert lo == 0.0 and hi == dist.mean()

    def test_interval_properties(self):
        pi = PredictionInterval(0.2, 0.6, 0.5, "mode_based")
        assert pi.width == pytest.approx(0.4)
        assert pi.contains(0.2) and pi.contains(0.6) and not pi.contains(0.7)


class TestCvCoverage:
    def test_loo_curve_shape_and_monotone_width(self, small_data):
        spec = ModelSpec("gbp_mode")
        curves = cv_coverage_curves(spec, small_data, [0.2, 0.5, 0.8],
                                    options=STUDY_OPTIONS)
        for (kind, q), rep in curves.items():
            assert isinstance(rep, CoverageReport)
            assert rep.scheme == "leave_one_out"
            assert 0 <= rep.empirical_coverage <= 1
            assert rep.average_width > 0
        for kind in ["mode_based", "mean_based"]:
            w = [curves[(kind, q)].average_width for q in [0.2, 0.5, 0.8]]
            assert w[0] < w[1] < w[2]
            c = [curves[(kind, q)].empirical_coverage for q in [0.2, 0.5, 0.8]]
            assert c[0] <= c[1] <= c[2]

    def test_high_q_covers_almost_everything(self, small_data):
        rep = loo_coverage(ModelSpec("gbp_mode"), small_data, 0.99,
                           options=STUDY_OPTIONS)
        assert rep.empirical_coverage >= 0.9

    def test_rough_calibration_at_moderate_q(self, small_data):
        rep = loo_coverage(ModelSpec("gbp_mode"), small_data, 0.5,
                           options=STUDY_OPTIONS)
        assert abs(rep.empirical_coverage - 0.5) < 0.2

    def test_kfold_deterministic_given_stream(self, small_data):
        spec = ModelSpec("gbp_mode")
        a = kfold_coverage(spec, small_data, 0.4, folds=5,
                           stream=RngStream(7), options=STUDY_OPTIONS)
        b = kfold_coverage(spec, small_data, 0.4, folds=5,
                           stream=RngStream(7), options=STUDY_OPTIONS)
        assert a == b
        assert a.scheme == "five_fold"

    def test_q_validation(self, small_data):
        with pytest.raises(ValueError):
            cv_coverage_curves(ModelSpec("gbp_mode"), small_data, [0.0])

    def test_too_many_folds(self):
        data = make_dataset("beta_mode", 12, seed=102)
        with pytest.raises(ValueError, match="folds"):
            cv_coverage_curves(ModelSpec("beta_mode"), data, [0.5], folds=6)


class TestFixedWidth:
    def test_widths_and_centers(self):
        data = make_dataset("gbp_mode", 80, seed=111, scale=10.0)
        res = fit(ModelSpec("gbp_mode"), data, compute_covariance=False)
        mode_ints, mean_ints, sigma_hat = fixed_width_intervals(res, data, 1.5)
        assert sigma_hat > 0
        from modereg.regression import conditional_moments
        loc, mean, _ = conditional_moments(res.spec, res.params, data)
        for pi, c in zip(mode_ints, loc):
            assert pi.lower == pytest.approx(max(c - 1.5 * sigma_hat, 0.0))
            assert pi.upper == pytest.approx(min(c + 1.5 * sigma_hat, 1.0))
        unclipped = [pi for pi, c in zip(mean_ints, mean)
                     if 1.5 * sigma_hat < c < 1 - 1.5 * sigma_hat]
        for pi in unclipped:
            assert pi.width == pytest.approx(3.0 * sigma_hat, rel=1e-10)

    def test_sigma_hat_is_rms_residual(self):
        data = make_dataset("beta_mode", 50, seed=112)
        res = fit(ModelSpec("beta_mode"), data, compute_covariance=False)
        _, _, sigma_hat = fixed_width_intervals(res, data, 1.0)
        from modereg.regression import conditional_moments
        _, mean, _ = conditional_moments(res.spec, res.params, data)
        assert sigma_hat == pytest.approx(
            np.sqrt(np.mean((data.y - mean) ** 2)), rel=1e-12)

    def test_k_validation(self):
        data = make_dataset("beta_mode", 30, seed=113)
        res = fit(ModelSpec("beta_mode"), data, compute_covariance=False)
        with pytest.raises(ValueError):
            fixed_width_intervals(res, data, 0.0)

    def test_cv_fixed_width_curves(self):
        data = make_dataset("gbp_mode", 50, seed=114, scale=10.0)
        curves = cv_fixed_width_curves(ModelSpec("gbp_mode"), data,
                                       [0.5, 1.5], folds=5,
                                       stream=RngStream(3),
                                       options=STUDY_OPTIONS)
        for kind in ["fixed_width_mode", "fixed_width_mean"]:
            lo = curves[(kind, 0.5)].empirical_coverage
            hi = curves[(kind, 1.5)].empirical_coverage
            assert lo <= hi
            assert curves[(kind, 0.5)].average_width < \
                curves[(kind, 1.5)].average_width
