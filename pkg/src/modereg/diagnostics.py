"""Model diagnostics: half-normal envelope plots and bootstrap score tests.

The envelope follows the classic simulate/refit recipe: fit, order the
absolute standardized residuals, simulate ``k`` response sets from the
fitted model, refit each, and band the original residuals by the pointwise
min/max of the simulated ordered residuals.

The score tests match moments that a misspecified likelihood estimates
poorly; the test statistic is a Hotelling-style quadratic form in the
averaged bivariate scores, calibrated by a parametric bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regression
from .distributions import gbp_mean, gbp_variance, sample_beta_shapes, sample_gbp
from .numerics import RngStream, digamma, std_normal_quantile


class DegenerateScoreError(RuntimeError):
    pass


class RefitError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvelopeResult:
    quantiles: np.ndarray
    residuals_sorted: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    proportion_outside: float
    k_simulations: int


@dataclass(frozen=True)
class ScoreTestResult:
    q_observed: float
    q_bootstrap: np.ndarray
    p_value: float
    b: int


def abs_std_residuals(fit_result, data):
    """|y_i - mean_i| / sd_i under the fitted conditional distributions."""
    y, _ = regression.prepare_responses(fit_result.spec, data)
    _, mean, var = regression.conditional_moments(
        fit_result.spec, fit_result.params, data)
    if np.any(var <= 0):
        raise ValueError("zero conditional variance")
    return np.abs(y - mean) / np.sqrt(var)


def halfnormal_quantiles(n):
    i = np.arange(1, n + 1)
    return std_normal_quantile((i + n - 0.125) / (2 * n + 0.5))


def simulate_responses(spec, params, data, stream):
    """One response set from the fitted model, conditional on the design."""
    X = regression.design_matrix(data)
    from . import links
    loc = links.apply(spec.link, X @ params.beta)
    s = params.scale
    if spec.family == "beta_mode":
        return sample_beta_shapes(1 + s * loc, 1 + s * (1 - loc), stream)
    if spec.family == "beta_mean":
        return sample_beta_shapes(s * loc, s * (1 - loc), stream)
    return sample_gbp(loc, s, stream)


def _refit_simulated(spec, parent, data, stream, options, max_retries=10):
    """Simulate responses and refit, re-drawing on failure."""
    for attempt in range(max_retries + 1):
        y_sim = simulate_responses(spec, parent.params, data,
                                   stream.child(attempt))
        sim_data = regression.Dataset(y_sim, data.x, data.column_names)
        try:
            refit = regression.fit(spec, sim_data, options=options,
                                   start=parent.params,
                                   compute_covariance=False)
        except (ValueError, RuntimeError):
            continue
        if refit.converged and np.isfinite(refit.loglik):
            return refit, sim_data
    raise RefitError(f"simulated refit failed after {max_retries + 1} draws")


def halfnormal_envelope(spec, data, k=19, stream=None, options=None):
    """Half-normal residual plot data with a simulated envelope."""
    if k < 1:
        raise ValueError("k must be >= 1")
    stream = stream or RngStream(0)
    fit_result = regression.fit(spec, data, options=options,
                                compute_covariance=False)
    r_sorted = np.sort(abs_std_residuals(fit_result, data))
    n = data.n
    q = halfnormal_quantiles(n)
    sims = np.empty((k, n))
    for j in range(k):
        refit, sim_data = _refit_simulated(spec, fit_result, data,
                                           stream.child(j), options)
        sims[j] = np.sort(abs_std_residuals(refit, sim_data))
    lower = sims.min(axis=0)
    upper = sims.max(axis=0)
    outside = float(np.mean((r_sorted < lower) | (r_sorted > upper)))
    return EnvelopeResult(q, r_sorted, lower, upper, outside, k)


def score_matrix(spec, params, data, y=None):
    """n x 2 matrix of per-observation moment-matching scores."""
    if spec.family not in ("beta_mode", "gbp_mode"):
        raise ValueError("score test is defined for the mode families only")
    if y is None:
        y, _ = regression.prepare_responses(spec, data)
    if np.any((y <= 0) | (y >= 1)):
        raise ValueError("scores require responses strictly inside (0, 1)")
    X = regression.design_matrix(data)
    from . import links
    theta = links.apply(spec.link, X @ params.beta)
    m = params.scale
    if spec.family == "beta_mode":
        c1 = np.log(y) - digamma(1 + m * theta) + digamma(2 + m)
        c2 = (y * np.log(y)
              - (1 + m * theta) * (digamma(2 + m * theta) - digamma(3 + m))
              / (2 + m))
    else:
        mean = gbp_mean(theta, m)
        var = gbp_variance(theta, m)
        c1 = y - mean
        c2 = y**2 - var - mean**2
    return np.column_stack([c1, c2])


def score_vector_beta(params, y_i, x_i, link="logit"):
    """Bivariate beta-mode score at a single observation."""
    from . import links
    theta = links.apply(link, params.beta[0] + params.beta[1:] @ np.atleast_1d(x_i))
    m = params.scale
    if not 0 < y_i < 1:
        raise ValueError("y must lie in (0, 1)")
    c1 = np.log(y_i) - digamma(1 + m * theta) + digamma(2 + m)
    c2 = (y_i * np.log(y_i)
          - (1 + m * theta) * (digamma(2 + m * theta) - digamma(3 + m)) / (2 + m))
    return np.array([c1, c2])


def score_vector_gbp(params, y_i, x_i, link="logit"):
    """Bivariate GBP score at a single observation."""
    from . import links
    theta = links.apply(link, params.beta[0] + params.beta[1:] @ np.atleast_1d(x_i))
    m = params.scale
    if not 0 < y_i < 1:
        raise ValueError("y must lie in (0, 1)")
    mean = float(gbp_mean(theta, m))
    var = float(gbp_variance(theta, m))
    return np.array([y_i - mean, y_i**2 - var - mean**2])


def q_statistic(scores):
    """Hotelling-style statistic in the averaged bivariate scores."""
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    if n < 3 or scores.shape[1] != 2:
        raise ValueError("need an n x 2 score matrix with n >= 3")
    sbar = scores.mean(axis=0)
    centered = scores - sbar
    sigma = centered.T @ centered / (n * (n - 1))
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    if abs(det) < 1e-14:
        raise DegenerateScoreError("score covariance is numerically singular")
    inv = np.array([[sigma[1, 1], -sigma[0, 1]],
                    [-sigma[1, 0], sigma[0, 0]]]) / det
    q = (n - 2) / (2 * (n - 1)) * sbar @ inv @ sbar
    return float(q)


def bootstrap_score_test(spec, data, b=300, stream=None, options=None):
    """Parametric-bootstrap p-value for the moment-matching score test."""
    if b < 1:
        raise ValueError("b must be >= 1")
    if spec.family not in ("beta_mode", "gbp_mode"):
        raise ValueError("score test is defined for the mode families only")
    stream = stream or RngStream(0)
    fit_result = regression.fit(spec, data, options=options,
                                compute_covariance=False)
    y, _ = regression.prepare_responses(spec, data)
    q_obs = q_statistic(score_matrix(spec, fit_result.params, data, y=y))
    q_boot = np.empty(b)
    for j in range(b):
        refit, sim_data = _refit_simulated(spec, fit_result, data,
                                           stream.child(j), options)
        q_boot[j] = q_statistic(
            score_matrix(spec, refit.params, sim_data, y=sim_data.y))
    p = float(np.mean(q_boot > q_obs))
    return ScoreTestResult(q_obs, q_boot, p, b)
