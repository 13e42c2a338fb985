"""Prediction intervals from a fitted model and their cross-validated coverage.

The mode-based interval is the highest-density interval of the fitted
conditional distribution: the narrowest interval of mass q, found by an
outer bisection on the density level with inner monotone root-finds for the
endpoints on each side of the mode.  The mean-based interval reuses the
mode interval when it already contains the fitted mean; otherwise it is the
one-sided interval of mass q with the mean on the boundary nearer the mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regression
from .numerics import OptimizerOptions, RngStream

_MASS_TOL = 1e-6


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    nominal_q: float
    kind: str
    truncated: bool = False

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, y):
        return self.lower <= y <= self.upper


@dataclass(frozen=True)
class CoverageReport:
    nominal: float
    empirical_coverage: float
    average_width: float
    scheme: str
    kind: str


def _fitted_mode(dist):
    try:
        return dist.mode()
    except ValueError as exc:
        raise ValueError(
            "prediction interval needs a unimodal fitted density") from exc


def _endpoints_at_level(dist, mode, level):
    """Support points where the density crosses ``level`` on each side."""
    if dist.pdf(0.0) >= level or mode <= 0:
        a = 0.0
    else:
        lo, hi = 0.0, mode
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if dist.pdf(mid) < level:
                lo = mid
            else:
                hi = mid
        a = 0.5 * (lo + hi)
    if dist.pdf(1.0) >= level or mode >= 1:
        b = 1.0
    else:
        lo, hi = mode, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if dist.pdf(mid) >= level:
                lo = mid
            else:
                hi = mid
        b = 0.5 * (lo + hi)
    return a, b


def _gbp_hdi(dist, q):
    """GBP equal-density endpoints share one distance ratio d*.

    With the CDF written as F(a) = theta*G(d) below the mode and
    1 - (1-theta)*G(d) above, equal density at both endpoints means equal
    d, so the enclosed mass is 1 - G(d*): a single solve independent of
    theta, and the endpoints are always interior.
    """
    m = dist.m
    c = (2 * m + 1) * (m + 1) / (3 * m + 1)

    def tail_mass(d):  # G(d), increasing with G(0)=0, G(1)=1
        return c * (2 * d ** (m + 1) / (m + 1) - d ** (2 * m + 1) / (2 * m + 1))

    target = 1.0 - q
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail_mass(mid) < target:
            lo = mid
        else:
            hi = mid
    d = 0.5 * (lo + hi)
    return d * dist.theta, 1.0 - (1.0 - dist.theta) * d


def _beta_hdi(dist, q, mode):
    """Equal-density HDI via a root-find on the left endpoint."""
    import scipy.optimize

    def gap(a):
        b = dist.quantile(min(dist.cdf(a) + q, 1.0))
        return dist.pdf(b) - dist.pdf(a)

    a_hi = dist.quantile(1.0 - q)  # left endpoint of the rightmost q-interval
    if gap(0.0) <= 0:
        a = 0.0
    elif gap(a_hi) >= 0:
        a = a_hi
    else:
        a = scipy.optimize.brentq(gap, 0.0, a_hi, xtol=1e-13)
    return a, dist.quantile(min(dist.cdf(a) + q, 1.0))


def highest_density_interval(dist, q):
    """HDI of mass q for a unimodal distribution on [0,1]."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    mode = _fitted_mode(dist)
    from .distributions import GbpDist
    if isinstance(dist, GbpDist):
        return _gbp_hdi(dist, q)
    try:
        return _beta_hdi(dist, q, mode)
    except (ValueError, RuntimeError):
        return _level_set_hdi(dist, q, mode)


def _level_set_hdi(dist, q, mode):
    """Fallback: outer bisection on the density level."""
    peak = dist.pdf(mode)
    if not np.isfinite(peak) or peak <= 0:
        raise ValueError("fitted density has no finite positive peak")
    lam_lo, lam_hi = 0.0, peak
    a, b = 0.0, 1.0
    for _ in range(60):
        lam = 0.5 * (lam_lo + lam_hi)
        a, b = _endpoints_at_level(dist, mode, lam)
        mass = dist.cdf(b) - dist.cdf(a)
        if abs(mass - q) <= _MASS_TOL / 10:
            break
        if mass > q:
            lam_lo = lam
        else:
            lam_hi = lam
    return a, b


def mode_interval(fit_result, x_new, q):
    """Narrowest prediction interval containing the fitted mode."""
    dist = regression.conditional_distribution(fit_result.spec,
                                               fit_result.params, x_new)
    a, b = highest_density_interval(dist, q)
    return PredictionInterval(a, b, q, "mode_based")


def _one_sided_mass_interval(dist, anchor, q, toward_lower):
    """Interval of mass q with ``anchor`` on one boundary.

    Truncates at the support boundary (and flags it) when there is not
    enough one-sided mass beyond the anchor.
    """
    if toward_lower:
        avail = dist.cdf(anchor)
        if avail < q:
            return 0.0, anchor, True
        return dist.quantile(avail - q), anchor, False
    avail = dist.cdf(anchor)
    if 1.0 - avail < q:
        return anchor, 1.0, True
    return anchor, dist.quantile(avail + q), False


def mean_interval(fit_result, x_new, q):
    """Prediction interval containing the fitted mean."""
    dist = regression.conditional_distribution(fit_result.spec,
                                               fit_result.params, x_new)
    mode = _fitted_mode(dist)
    mu = dist.mean()
    a, b = highest_density_interval(dist, q)
    if a <= mu <= b:
        return PredictionInterval(a, b, q, "mean_based")
    lo, hi, truncated = _one_sided_mass_interval(dist, mu, q,
                                                 toward_lower=mu >= mode)
    return PredictionInterval(lo, hi, q, "mean_based", truncated)


def _cv_fold_indices(n, folds, stream):
    perm = stream.generator().permutation(n)
    return np.array_split(perm, folds)


def cv_coverage_curves(spec, data, q_values, folds=None, stream=None,
                       options=None):
    """Coverage and width of both interval kinds at each q, one CV sweep.

    ``folds=None`` means leave-one-out.  Returns a dict with per-q coverage
    and average width for mode- and mean-based intervals, sharing the
    held-out refits across all q values.
    """
    q_values = [float(q) for q in np.atleast_1d(q_values)]
    if any(not 0 < q < 1 for q in q_values):
        raise ValueError("q values must lie in (0, 1)")
    options = options or OptimizerOptions()
    n = data.n
    if folds is None:
        fold_idx = [np.array([i]) for i in range(n)]
        scheme = "leave_one_out"
    else:
        if n < folds * (data.p + 2):
            raise ValueError("too few observations for the requested folds")
        stream = stream or RngStream(0)
        fold_idx = _cv_fold_indices(n, folds, stream)
        scheme = "five_fold" if folds == 5 else f"{folds}_fold"

    full = regression.fit(spec, data, options=options,
                          compute_covariance=False)
    hits = {("mode_based", q): 0 for q in q_values}
    hits.update({("mean_based", q): 0 for q in q_values})
    widths = {k: 0.0 for k in hits}
    for f, held in enumerate(fold_idx):
        keep = np.setdiff1d(np.arange(n), held)
        sub = regression.Dataset(data.y[keep], data.x[keep],
                                 data.column_names)
        try:
            part = regression.fit(spec, sub, options=options,
                                  start=full.params, compute_covariance=False)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(f"held-out refit failed in fold {f}") from exc
        for i in held:
            for q in q_values:
                pi_mode = mode_interval(part, data.x[i], q)
                pi_mean = mean_interval(part, data.x[i], q)
                y_i = data.y[i]
                hits[("mode_based", q)] += pi_mode.contains(y_i)
                widths[("mode_based", q)] += pi_mode.width
                hits[("mean_based", q)] += pi_mean.contains(y_i)
                widths[("mean_based", q)] += pi_mean.width
    out = {}
    for (kind, q), h in hits.items():
        out[(kind, q)] = CoverageReport(q, h / n, widths[(kind, q)] / n,
                                        scheme, kind)
    return out


def loo_coverage(spec, data, q, kind="mode_based", options=None):
    """Leave-one-out empirical coverage of one interval kind at one q."""
    curves = cv_coverage_curves(spec, data, [q], folds=None, options=options)
    return curves[(kind, float(q))]


def kfold_coverage(spec, data, q, folds=5, stream=None, kind="mode_based",
                   options=None):
    """K-fold empirical coverage; fold assignment is a seeded permutation."""
    curves = cv_coverage_curves(spec, data, [q], folds=folds, stream=stream,
                                options=options)
    return curves[(kind, float(q))]


def cv_fixed_width_curves(spec, data, k_values, folds=None, stream=None,
                          options=None):
    """Cross-validated coverage of the fixed-width interval pair per k.

    Same refit-sharing sweep as :func:`cv_coverage_curves`; each held-out
    unit gets intervals of half-width k*sigma_hat computed from its
    training fit.
    """
    k_values = [float(k) for k in np.atleast_1d(k_values)]
    if any(k <= 0 for k in k_values):
        raise ValueError("k values must be > 0")
    options = options or OptimizerOptions()
    n = data.n
    if folds is None:
        fold_idx = [np.array([i]) for i in range(n)]
        scheme = "leave_one_out"
    else:
        stream = stream or RngStream(0)
        fold_idx = _cv_fold_indices(n, folds, stream)
        scheme = "five_fold" if folds == 5 else f"{folds}_fold"
    full = regression.fit(spec, data, options=options,
                          compute_covariance=False)
    hits = {("fixed_width_mode", k): 0 for k in k_values}
    hits.update({("fixed_width_mean", k): 0 for k in k_values})
    widths = {key: 0.0 for key in hits}
    for f, held in enumerate(fold_idx):
        keep = np.setdiff1d(np.arange(n), held)
        sub = regression.Dataset(data.y[keep], data.x[keep], data.column_names)
        try:
            part = regression.fit(spec, sub, options=options,
                                  start=full.params, compute_covariance=False)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(f"held-out refit failed in fold {f}") from exc
        for k in k_values:
            mode_ints, mean_ints, _ = _fixed_width_for_rows(
                part, data.x[held], k, data, keep)
            for pi_mode, pi_mean, i in zip(mode_ints, mean_ints, held):
                y_i = data.y[i]
                hits[("fixed_width_mode", k)] += pi_mode.contains(y_i)
                widths[("fixed_width_mode", k)] += pi_mode.width
                hits[("fixed_width_mean", k)] += pi_mean.contains(y_i)
                widths[("fixed_width_mean", k)] += pi_mean.width
    out = {}
    for (kind, k), h in hits.items():
        out[(kind, k)] = CoverageReport(k, h / n, widths[(kind, k)] / n,
                                        scheme, kind)
    return out


def _fixed_width_for_rows(fit_result, x_rows, k, data, train_idx):
    """Fixed-width intervals for arbitrary covariate rows.

    sigma_hat comes from the training rows of ``data`` under the training
    fit, matching the full-fit definition restricted to the fold.
    """
    train = regression.Dataset(data.y[train_idx], data.x[train_idx],
                               data.column_names)
    y_tr, _ = regression.prepare_responses(fit_result.spec, train)
    _, mean_tr, _ = regression.conditional_moments(fit_result.spec,
                                                   fit_result.params, train)
    sigma_hat = float(np.sqrt(np.mean((y_tr - mean_tr) ** 2)))
    half = k * sigma_hat
    mode_ints, mean_ints = [], []
    for row in np.atleast_2d(x_rows):
        dist = regression.conditional_distribution(fit_result.spec,
                                                   fit_result.params, row)
        center_mode = dist.mode()
        center_mean = dist.mean()
        mode_ints.append(PredictionInterval(max(center_mode - half, 0.0),
                                            min(center_mode + half, 1.0),
                                            k, "fixed_width_mode"))
        mean_ints.append(PredictionInterval(max(center_mean - half, 0.0),
                                            min(center_mean + half, 1.0),
                                            k, "fixed_width_mean"))
    return mode_ints, mean_ints, sigma_hat


def fixed_width_intervals(fit_result, data, k):
    """Equal-width intervals centered at the fitted mode and mean.

    Width is 2*k*sigma_hat with sigma_hat the root mean squared residual of
    the fitted conditional means, both families clipped to [0, 1].
    """
    if k <= 0:
        raise ValueError("k must be > 0")
    y, _ = regression.prepare_responses(fit_result.spec, data)
    loc, mean, _ = regression.conditional_moments(fit_result.spec,
                                                  fit_result.params, data)
    sigma_hat = float(np.sqrt(np.mean((y - mean) ** 2)))
    half = k * sigma_hat
    if fit_result.spec.family == "beta_mean":
        s = fit_result.params.scale
        a1, a2 = s * loc, s * (1 - loc)
        if np.any(a1 <= 1) or np.any(a2 <= 1):
            raise ValueError("implied beta shapes <= 1: conditional mode "
                             "undefined for the fixed-width mode interval")
        centers_mode = (a1 - 1) / (s - 2)
    else:
        centers_mode = loc
    mode_ints = [
        PredictionInterval(max(c - half, 0.0), min(c + half, 1.0), k,
                           "fixed_width_mode")
        for c in centers_mode
    ]
    mean_ints = [
        PredictionInterval(max(c - half, 0.0), min(c + half, 1.0), k,
                           "fixed_width_mean")
        for c in mean
    ]
    return mode_ints, mean_ints, sigma_hat
