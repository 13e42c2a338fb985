"""Model specification, likelihoods, ML fitting, and sandwich covariance.

Three families are supported: ``beta_mode`` (beta with the mode linked to
covariates), ``gbp_mode`` (generalized biparabolic, mode linked), and
``beta_mean`` (beta with the mean linked, mean/precision parameterization).
Optimization runs over ``(beta, log_scale)`` where ``log_scale`` is log m
for the mode families and log phi for beta_mean, keeping the scale positive
without constraints.

The GBP objective has kinks wherever a fitted mode crosses an observation,
so the primary optimizer is a Nelder-Mead simplex with one restart; the
smooth beta families additionally get a quasi-Newton polish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

from . import links
from .distributions import BetaMeanDist, BetaModeDist, GbpDist, gbp_mean, gbp_variance
from .numerics import (OptimizerOptions, finite_diff_hessian, minimize)

FAMILIES = ("beta_mode", "gbp_mode", "beta_mean")


class BoundaryResponseError(ValueError):
    """Responses exactly at 0 or 1 without the squeeze flag."""


class RankDeficientError(ValueError):
    pass


class SingularCovarianceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Responses in [0,1] plus a design matrix (intercept implicit)."""

    y: np.ndarray
    x: np.ndarray
    column_names: tuple = ()

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("dataset contains non-finite entries")
        if np.any((y < 0) | (y > 1)):
            raise ValueError("responses must lie in [0, 1]")
        if y.shape[0] != x.shape[0]:
            raise ValueError("y and x row counts differ")
        if y.shape[0] < x.shape[1] + 2:
            raise ValueError("need n >= p + 2 observations")
        if not self.column_names:
            object.__setattr__(
                self, "column_names",
                tuple(f"x{j+1}" for j in range(x.shape[1])))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class ModelSpec:
    family: str
    link: str = "logit"
    squeeze: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown family {self.family!r}; valid: {', '.join(FAMILIES)}")
        if self.link not in links.LINK_NAMES:
            raise ValueError(
                f"unknown link {self.link!r}; valid: {', '.join(links.LINK_NAMES)}")


@dataclass(frozen=True)
class Params:
    """Coefficients (intercept first) and the log scale (log m or log phi)."""

    beta: np.ndarray
    log_scale: float

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "beta", beta)
        if not (np.all(np.isfinite(beta)) and np.isfinite(self.log_scale)):
            raise ValueError("parameters must be finite")

    @property
    def scale(self):
        return float(np.exp(self.log_scale))

    def pack(self):
        return np.append(self.beta, self.log_scale)

    @staticmethod
    def unpack(omega):
        omega = np.asarray(omega, dtype=float)
        return Params(omega[:-1], float(omega[-1]))


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    params: Params
    loglik: float
    covariance: np.ndarray
    std_errors: np.ndarray
    converged: bool
    iterations: int
    n: int
    squeezed: bool = False


def squeeze_responses(y, n=None):
    """(y*(n-1) + 0.5) / n, mapping boundary responses into (0,1)."""
    y = np.asarray(y, dtype=float)
    n = len(y) if n is None else n
    return (y * (n - 1) + 0.5) / n


def prepare_responses(spec, data):
    """Apply the squeeze transform if requested, else reject boundary y."""
    y = data.y
    on_boundary = (y <= 0) | (y >= 1)
    if np.any(on_boundary):
        if not spec.squeeze:
            rows = np.flatnonzero(on_boundary)
            raise BoundaryResponseError(
                f"responses at the boundary in rows {rows.tolist()}; "
                "re-run with squeeze enabled or transform the data")
        return squeeze_responses(y), True
    return y, False


def design_matrix(data):
    return np.column_stack([np.ones(data.n), data.x])


def _linked_location(spec, params, X):
    eta = X @ params.beta
    return links.apply(spec.link, eta)


def per_observation_log_likelihood(spec, params, data, y=None):
    """Vector of per-observation log densities at the given parameters."""
    X = design_matrix(data)
    if params.beta.shape[0] != X.shape[1]:
        raise ValueError("coefficient length does not match design")
    y = data.y if y is None else y
    loc = _linked_location(spec, params, X)
    s = params.scale
    logy = np.log(y)
    log1my = np.log1p(-y)
    if spec.family == "beta_mode":
        a1 = 1 + s * loc
        a2 = 1 + s * (1 - loc)
    elif spec.family == "beta_mean":
        a1 = s * loc
        a2 = s * (1 - loc)
    else:
        d = np.where(y <= loc, y / loc, (1 - y) / (1 - loc))
        dm = d**s
        with np.errstate(divide="ignore"):
            return (np.log((2 * s + 1) * (s + 1) / (3 * s + 1))
                    + s * np.log(d) + np.log(2 - dm))
    return (scipy.special.gammaln(a1 + a2) - scipy.special.gammaln(a1)
            - scipy.special.gammaln(a2) + (a1 - 1) * logy + (a2 - 1) * log1my)


def log_likelihood(spec, params, data, y=None):
    """Total log-likelihood; -inf rather than an exception on bad regions."""
    try:
        contrib = per_observation_log_likelihood(spec, params, data, y=y)
    except FloatingPointError:
        return -np.inf
    total = np.sum(contrib)
    return float(total) if np.isfinite(total) else -np.inf


def starting_values(spec, data, y=None):
    """OLS of the inverted link on the design, plus a default scale."""
    y = data.y if y is None else y
    X = design_matrix(data)
    z = links.invert(spec.link, np.clip(y, 0.01, 0.99))
    try:
        beta, *_ = np.linalg.lstsq(X, z, rcond=None)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        beta = np.zeros(X.shape[1])
    if spec.family == "beta_mean":
        mu = links.apply(spec.link, X @ beta)
        resid_var = max(float(np.var(y - mu)), 1e-6)
        phi = max(float(np.mean(mu * (1 - mu))) / resid_var - 1.0, 1.0)
        log_scale = float(np.log(phi))
    else:
        log_scale = float(np.log(10.0))
    return Params(beta, log_scale)


def _objective(spec, data, y):
    X = design_matrix(data)
    logy = np.log(y)
    log1my = np.log1p(-y)
    n = data.n
    family = spec.family
    link = spec.link

    def negloglik(omega):
        beta = omega[:-1]
        s = np.exp(omega[-1])
        if not np.isfinite(s) or s <= 0:
            return np.inf
        eta = X @ beta
        if not np.all(np.isfinite(eta)):
            return np.inf
        loc = links.apply(link, eta)
        if family == "beta_mode":
            a1 = 1 + s * loc
            a2 = 1 + s * (1 - loc)
            val = (np.sum(scipy.special.gammaln(a1 + a2))
                   - np.sum(scipy.special.gammaln(a1))
                   - np.sum(scipy.special.gammaln(a2))
                   + np.dot(a1 - 1, logy) + np.dot(a2 - 1, log1my))
        elif family == "beta_mean":
            a1 = s * loc
            a2 = s * (1 - loc)
            val = (n * scipy.special.gammaln(s)
                   - np.sum(scipy.special.gammaln(a1))
                   - np.sum(scipy.special.gammaln(a2))
                   + np.dot(a1 - 1, logy) + np.dot(a2 - 1, log1my))
        else:
            d = np.where(y <= loc, y / loc, (1 - y) / (1 - loc))
            with np.errstate(divide="ignore"):
                val = (n * np.log((2 * s + 1) * (s + 1) / (3 * s + 1))
                       + s * np.sum(np.log(d)) + np.sum(np.log(2 - d**s)))
        if np.isnan(val):
            return np.inf
        return -val

    return negloglik


def fit(spec, data, options=None, start=None, compute_covariance=True):
    """Maximum likelihood fit of one model; see module docstring."""
    options = options or OptimizerOptions()
    y, squeezed = prepare_responses(spec, data)
    X = design_matrix(data)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientError("design matrix is rank deficient")

    start = start or starting_values(spec, data, y=y)
    negloglik = _objective(spec, data, y)
    x0 = start.pack()
    if not np.isfinite(negloglik(x0)):
        x0 = np.append(np.zeros(X.shape[1]), np.log(10.0))
    res = minimize(negloglik, x0, options)
    best_x, best_f, iterations, converged = (res.argmin, res.min_value,
                                             res.iterations, res.converged)
    if spec.family != "gbp_mode":
        # quasi-Newton polish with numeric gradients; the beta likelihoods
        # are smooth so this sharpens the simplex optimum cheaply
        polish = scipy.optimize.minimize(negloglik, best_x, method="L-BFGS-B",
                                         options={"maxiter": 200})
        iterations += polish.nit
        if np.isfinite(polish.fun) and polish.fun <= best_f:
            best_x, best_f = polish.x, polish.fun

    params = Params.unpack(best_x)
    loglik = -float(best_f)
    cov = np.full((X.shape[1] + 1, X.shape[1] + 1), np.nan)
    se = np.full(X.shape[1] + 1, np.nan)
    if compute_covariance:
        try:
            cov = sandwich_cov(spec, params, data, y=y)
            se = np.sqrt(np.clip(np.diag(cov), 0, None))
        except SingularCovarianceError:
            converged = False
    return FitResult(spec, params, loglik, cov, se, converged, iterations,
                     data.n, squeezed)


def _per_observation_gradients(spec, params, data, y):
    """Numerical per-observation score vectors, central differences."""
    omega = params.pack()
    k = omega.size
    grads = np.empty((data.n, k))
    for j in range(k):
        h = 1e-5 * max(1.0, abs(omega[j]))
        up, dn = omega.copy(), omega.copy()
        up[j] += h
        dn[j] -= h
        grads[:, j] = (
            per_observation_log_likelihood(spec, Params.unpack(up), data, y=y)
            - per_observation_log_likelihood(spec, Params.unpack(dn), data, y=y)
        ) / (2 * h)
    if not np.all(np.isfinite(grads)):
        raise SingularCovarianceError("non-finite per-observation gradients")
    return grads


def sandwich_cov(spec, params, data, y=None):
    """Sandwich covariance (1/n) A^{-1} B A^{-T} for the M-estimator.

    A is minus the numerical Hessian of the mean log-likelihood, B the
    outer-product average of per-observation numerical gradients.
    """
    if y is None:
        y, _ = prepare_responses(spec, data)
    n = data.n

    def mean_loglik(omega):
        return log_likelihood(spec, Params.unpack(omega), data, y=y) / n

    A = -finite_diff_hessian(mean_loglik, params.pack())
    grads = _per_observation_gradients(spec, params, data, y)
    B = grads.T @ grads / n
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("singular bread matrix") from exc
    cov = Ainv @ B @ Ainv.T / n
    cov = 0.5 * (cov + cov.T)
    if np.min(np.linalg.eigvalsh(cov)) < -1e-8:
        raise SingularCovarianceError("sandwich covariance is not PSD")
    return cov


def conditional_distribution(spec, params, x_new):
    """Implied response distribution at one covariate row."""
    x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
    if x_new.size != params.beta.size - 1:
        raise ValueError("x_new dimension does not match the fitted design")
    eta = params.beta[0] + params.beta[1:] @ x_new
    loc = links.apply(spec.link, eta)
    s = params.scale
    if spec.family == "beta_mode":
        return BetaModeDist(loc, s)
    if spec.family == "gbp_mode":
        return GbpDist(loc, s)
    return BetaMeanDist(loc, s)


def conditional_summary(fit_result, x_new):
    """(theta, mu, sigma2, dist) at one covariate row.

    For beta_mean the first element is the conditional mode when it exists,
    else NaN.
    """
    spec, params = fit_result.spec, fit_result.params
    dist = conditional_distribution(spec, params, x_new)
    if spec.family == "beta_mean":
        try:
            theta = dist.mode()
        except ValueError:
            theta = np.nan
    else:
        theta = dist.mode()
    return theta, dist.mean(), dist.variance(), dist


def conditional_moments(spec, params, data):
    """Vectorized (location, mean, variance) over all rows of the design."""
    X = design_matrix(data)
    loc = links.apply(spec.link, X @ params.beta)
    s = params.scale
    if spec.family == "beta_mode":
        a1, a2 = 1 + s * loc, 1 + s * (1 - loc)
    elif spec.family == "beta_mean":
        a1, a2 = s * loc, s * (1 - loc)
    else:
        return loc, gbp_mean(loc, s), gbp_variance(loc, s)
    tot = a1 + a2
    return loc, a1 / tot, a1 * a2 / (tot**2 * (tot + 1))
