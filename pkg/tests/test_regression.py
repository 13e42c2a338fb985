import numpy as np
import pytest

from modereg.distributions import BetaMeanDist, BetaModeDist, GbpDist
from modereg.numerics import OptimizerOptions, RngStream, finite_diff_gradient
from modereg.regression import (
    BoundaryResponseError,
    Dataset,
    ModelSpec,
    Params,
    RankDeficientError,
    conditional_moments,
    conditional_summary,
    design_matrix,
    fit,
    log_likelihood,
    per_observation_log_likelihood,
    prepare_responses,
    sandwich_cov,
    squeeze_responses,
    starting_values,
)

STUDY_OPTIONS = OptimizerOptions(max_iterations=3000,
                                 objective_tolerance=1e-9,
                                 parameter_tolerance=1e-7,
                                 restart_count=0)


def make_dataset(family, n, seed, beta=(0.2, 0.8), scale=8.0, link="logit"):
    stream = RngStream(seed)
    rng = stream.generator()
    x = rng.normal(0.0, 1.0, n)
    eta = beta[0] + beta[1] * x
    from modereg import links
    loc = links.apply(link, eta)
    if family == "beta_mode":
        from modereg.distributions import sample_beta_shapes
        y = sample_beta_shapes(1 + scale * loc, 1 + scale * (1 - loc),
                               stream.child(1))
    elif family == "beta_mean":
        from modereg.distributions import sample_beta_shapes
        y = sample_beta_shapes(scale * loc, scale * (1 - loc), stream.child(1))
    else:
        from modereg.distributions import sample_gbp
        y = sample_gbp(loc, scale, stream.child(1))
    return Dataset(y, x)


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset([0.1, np.nan, 0.3, 0.4], np.zeros((4, 1)))
        with pytest.raises(ValueError, match="responses"):
            Dataset([0.1, 1.5, 0.3, 0.4], np.zeros((4, 1)))
        with pytest.raises(ValueError, match="row counts"):
            Dataset([0.1, 0.2, 0.3], np.zeros((4, 1)))
        with pytest.raises(ValueError, match="n >= p"):
            Dataset([0.1, 0.2], np.zeros((2, 1)))

    def test_column_names_defaulted(self):
        d = Dataset([0.1, 0.2, 0.3, 0.4], np.zeros((4, 2)))
        assert d.column_names == ("x1", "x2")

    def test_design_matrix_has_intercept(self):
        d = Dataset([0.1, 0.2, 0.3, 0.4], np.arange(4.0))
        X = design_matrix(d)
        assert X.shape == (4, 2)
        assert np.all(X[:, 0] == 1.0)


class TestSqueeze:
    def test_formula(self):
        y = np.array([0.0, 0.5, 1.0])
        out = squeeze_responses(y, n=10)
        assert np.allclose(out, [(0.5) / 10, (0.5 * 9 + 0.5) / 10, 9.5 / 10])
        assert np.all((out > 0) & (out < 1))

    def test_boundary_rejected_without_flag(self):
        data = Dataset([0.0, 0.2, 0.3, 1.0], np.zeros(4))
        with pytest.raises(BoundaryResponseError, match=r"rows \[0, 3\]"):
            prepare_responses(ModelSpec("beta_mode"), data)

    def test_boundary_squeezed_with_flag(self):
        data = Dataset([0.0, 0.2, 0.3, 1.0], np.zeros(4))
        y, squeezed = prepare_responses(ModelSpec("beta_mode", squeeze=True),
                                        data)
        assert squeezed
        assert np.all((y > 0) & (y < 1))

    def test_interior_untouched(self):
        data = Dataset([0.1, 0.2, 0.3, 0.9], np.zeros(4))
        y, squeezed = prepare_responses(ModelSpec("beta_mode", squeeze=True),
                                        data)
        assert not squeezed
        assert np.array_equal(y, data.y)


class TestLogLikelihood:
    @pytest.mark.parametrize("family,dist_cls", [
        ("beta_mode", BetaModeDist),
        ("gbp_mode", GbpDist),
        ("beta_mean", BetaMeanDist),
    ])
    def test_matches_distribution_log_pdf(self, family, dist_cls):
        # the regression likelihood must agree with the per-row distribution
        # objects to full precision
        data = make_dataset("beta_mode", 40, seed=11)
        params = Params([0.3, -0.5], np.log(6.0))
        contrib = per_observation_log_likelihood(ModelSpec(family), params,
                                                 data)
        from modereg import links
        X = design_matrix(data)
        loc = links.apply("logit", X @ params.beta)
        oracle = np.array([
            dist_cls(loc[i], 6.0).log_pdf(data.y[i]) for i in range(data.n)
        ])
        assert np.max(np.abs(contrib - oracle)) < 1e-10

    def test_total_is_sum(self):
        data = make_dataset("gbp_mode", 25, seed=3)
        params = Params([0.1, 0.4], np.log(4.0))
        spec = ModelSpec("gbp_mode")
        total = log_likelihood(spec, params, data)
        assert total == pytest.approx(
            np.sum(per_observation_log_likelihood(spec, params, data)),
            rel=1e-12)

    def test_objective_matches_per_observation_path(self):
        from modereg.regression import _objective

        data = make_dataset("beta_mode", 30, seed=5)
        for family in ["beta_mode", "gbp_mode", "beta_mean"]:
            spec = ModelSpec(family)
            f = _objective(spec, data, data.y)
            for omega in [np.array([0.0, 0.0, np.log(5.0)]),
                          np.array([0.5, -1.0, np.log(2.0)])]:
                assert -f(omega) == pytest.approx(
                    log_likelihood(spec, Params.unpack(omega), data),
                    rel=1e-10)

    def test_one_minus_y_symmetry(self):
        # flipping y -> 1-y and negating the coefficients leaves the
        # logit-link mode-family likelihoods unchanged
        data = make_dataset("beta_mode", 30, seed=7)
        flipped = Dataset(1 - data.y, data.x)
        params = Params([0.4, -0.9], np.log(5.0))
        neg = Params([-0.4, 0.9], np.log(5.0))
        for family in ["beta_mode", "gbp_mode"]:
            spec = ModelSpec(family)
            assert log_likelihood(spec, params, data) == pytest.approx(
                log_likelihood(spec, neg, flipped), rel=1e-10)

    def test_never_raises_on_extreme_params(self):
        data = make_dataset("beta_mode", 20, seed=9)
        for family in ["beta_mode", "gbp_mode", "beta_mean"]:
            val = log_likelihood(ModelSpec(family),
                                 Params([300.0, -200.0], 40.0), data)
            assert val == -np.inf or np.isfinite(val)


class TestFit:
    @pytest.mark.parametrize("family", ["beta_mode", "gbp_mode", "beta_mean"])
    def test_consistency_large_n(self, family):
        scale = 8.0
        data = make_dataset(family, 5000, seed=21, beta=(0.2, 0.8),
                            scale=scale)
        res = fit(ModelSpec(family), data, options=STUDY_OPTIONS,
                  compute_covariance=False)
        assert res.converged
        assert np.allclose(res.params.beta, [0.2, 0.8], atol=0.08)
        assert res.params.log_scale == pytest.approx(np.log(scale), abs=0.15)

    def test_gradient_vanishes_at_beta_optimum(self):
        data = make_dataset("beta_mode", 200, seed=22)
        spec = ModelSpec("beta_mode")
        res = fit(spec, data, compute_covariance=False)
        g = finite_diff_gradient(
            lambda w: log_likelihood(spec, Params.unpack(w), data),
            res.params.pack())
        assert np.max(np.abs(g)) < 0.02

    def test_fit_improves_on_start(self):
        data = make_dataset("gbp_mode", 80, seed=23)
        spec = ModelSpec("gbp_mode")
        start = starting_values(spec, data)
        res = fit(spec, data, compute_covariance=False)
        assert res.loglik >= log_likelihood(spec, start, data) - 1e-9

    def test_warm_start_agrees(self):
        data = make_dataset("beta_mode", 100, seed=24)
        spec = ModelSpec("beta_mode")
        cold = fit(spec, data, compute_covariance=False)
        warm = fit(spec, data, start=cold.params, compute_covariance=False)
        assert warm.loglik >= cold.loglik - 1e-8
        assert np.allclose(warm.params.pack(), cold.params.pack(), atol=1e-3)

    def test_rank_deficient_rejected(self):
        x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        data = Dataset(np.linspace(0.1, 0.9, 10), x)
        with pytest.raises(RankDeficientError):
            fit(ModelSpec("beta_mode"), data)

    def test_squeeze_flag_propagates(self):
        y = np.linspace(0, 1, 30)
        data = Dataset(y, np.linspace(-1, 1, 30))
        res = fit(ModelSpec("beta_mode", squeeze=True), data,
                  compute_covariance=False)
        assert res.squeezed


class TestSandwich:
    def test_symmetric_psd_and_positive_se(self):
        data = make_dataset("beta_mode", 150, seed=31)
        res = fit(ModelSpec("beta_mode"), data)
        assert res.converged
        assert np.allclose(res.covariance, res.covariance.T)
        assert np.min(np.linalg.eigvalsh(res.covariance)) >= -1e-12
        assert np.all(res.std_errors > 0)

    def test_duplicating_data_halves_covariance(self):
        data = make_dataset("beta_mode", 120, seed=32)
        doubled = Dataset(np.concatenate([data.y, data.y]),
                          np.concatenate([data.x, data.x]))
        spec = ModelSpec("beta_mode")
        res = fit(spec, data, compute_covariance=False)
        cov1 = sandwich_cov(spec, res.params, data)
        cov2 = sandwich_cov(spec, res.params, doubled)
        assert np.allclose(cov2, cov1 / 2, rtol=1e-4, atol=1e-10)

    def test_se_tracks_sampling_variability(self):
        # empirical sd of the slope over replicates vs the average
        # estimated sd; loose band, small replicate count
        spec = ModelSpec("beta_mode")
        slopes, ses = [], []
        for r in range(40):
            data = make_dataset("beta_mode", 150, seed=1000 + r)
            res = fit(spec, data)
            slopes.append(res.params.beta[1])
            ses.append(res.std_errors[1])
        ratio = np.mean(ses) / np.std(slopes)
        assert 0.7 < ratio < 1.4


class TestConditional:
    def test_distribution_types(self):
        from modereg.regression import conditional_distribution

        p = Params([0.0, 1.0], np.log(5.0))
        assert isinstance(
            conditional_distribution(ModelSpec("beta_mode"), p, [0.3]),
            BetaModeDist)
        assert isinstance(
            conditional_distribution(ModelSpec("gbp_mode"), p, [0.3]),
            GbpDist)
        assert isinstance(
            conditional_distribution(ModelSpec("beta_mean"), p, [0.3]),
            BetaMeanDist)
        with pytest.raises(ValueError):
            conditional_distribution(ModelSpec("beta_mode"), p, [0.3, 0.4])

    def test_moments_match_distribution_objects(self):
        data = make_dataset("gbp_mode", 20, seed=41)
        params = Params([0.2, 0.5], np.log(7.0))
        for family in ["beta_mode", "gbp_mode", "beta_mean"]:
            spec = ModelSpec(family)
            loc, mean, var = conditional_moments(spec, params, data)
            from modereg.regression import conditional_distribution
            for i in [0, 7, 19]:
                d = conditional_distribution(spec, params, data.x[i])
                assert mean[i] == pytest.approx(d.mean(), rel=1e-10)
                assert var[i] == pytest.approx(d.variance(), rel=1e-10)

    def test_summary_mode_handling(self):
        data = make_dataset("beta_mean", 30, seed=42, scale=12.0)
        res = fit(ModelSpec("beta_mean"), data, compute_covariance=False)
        theta, mu, var, dist = conditional_summary(res, [0.0])
        assert 0 < mu < 1 and var > 0
        assert np.isnan(theta) or 0 < theta < 1
