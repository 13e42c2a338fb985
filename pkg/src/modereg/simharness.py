"""Synthetic-data scenarios and Monte Carlo studies.

Eight data-generating scenarios: B1-B4 pair with an assumed beta mode
model, G1-G4 with an assumed GBP mode model.  The 1-scenarios match the
assumed model; 2 misspecifies the linear predictor (adds a quadratic
term); 3 misspecifies the link (a two-component probit mixture); 4 swaps
the conditional distribution family.

Replicate r of a study draws from stream id r of the study seed, and each
bootstrap draw inside a replicate gets its own substream, so results are
identical however the replicate loop is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics, prediction, regression
from .distributions import sample_beta_shapes, sample_gbp
from .numerics import RngStream, std_normal_cdf

SCENARIOS = ("B1", "B2", "B3", "B4", "G1", "G2", "G3", "G4")

TRUE_BETA = np.array([1.0, 1.0, 1.0])

# default true shape per scenario
DEFAULT_M = {"B1": 80.0, "B2": 80.0, "B3": 80.0, "B4": 10.0,
             "G1": 10.0, "G2": 10.0, "G3": 10.0, "G4": 80.0}


def assumed_family(scenario):
    return "beta_mode" if scenario.startswith("B") else "gbp_mode"


def _check_scenario(scenario):
    if scenario not in SCENARIOS:
        raise ValueError(
            f"unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}")


@dataclass(frozen=True)
class SimConfig:
    scenario: str
    n: int
    m: float
    replicates: int = 300
    seed: int = 0

    def __post_init__(self):
        _check_scenario(self.scenario)
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


@dataclass(frozen=True)
class GeneratedDataset:
    data: regression.Dataset
    theta: np.ndarray  # true conditional mode per observation


@dataclass(frozen=True)
class MonteCarloSummary:
    study: str
    labels: tuple
    average_mle: np.ndarray
    average_est_sd: np.ndarray
    empirical_sd: np.ndarray
    mc_se: np.ndarray
    replicates: int
    failed: int
    config: SimConfig | None = None


def _mixture_mode(eta):
    return 0.5 * std_normal_cdf(2 * (eta + 2)) + 0.5 * std_normal_cdf(2 * (eta - 2))


def generate(scenario, n, m, stream):
    """One synthetic dataset; the true mode values ride along."""
    _check_scenario(scenario)
    gen_cov = stream.child(0).generator()
    if scenario.startswith("B"):
        x2 = (gen_cov.random(n) < 0.5).astype(float)
        x1 = gen_cov.normal(2 * x2 - 1, 1.0)
    else:
        x1 = gen_cov.normal(0.0, 1.0, n)
        x2 = (gen_cov.random(n) < 0.5).astype(float)
    eta = 1.0 + x1 + x2
    if scenario in ("B2", "G2"):
        eta = eta + x1**2
    if scenario in ("B3", "G3"):
        theta = _mixture_mode(1.0 + x1 + x2)
    else:
        theta = 1.0 / (1.0 + np.exp(-eta))
    resp_stream = stream.child(1)
    beta_truth = scenario in ("B1", "B2", "B3", "G4")
    if beta_truth:
        y = sample_beta_shapes(1 + m * theta, 1 + m * (1 - theta), resp_stream)
    else:
        y = sample_gbp(theta, m, resp_stream)
    data = regression.Dataset(y, np.column_stack([x1, x2]), ("x1", "x2"))
    return GeneratedDataset(data, theta)


def run_mle_study(config, options=None):
    """Per-replicate ML fits of the matching model with summary statistics."""
    spec = regression.ModelSpec(assumed_family(config.scenario), "logit")
    mles, est_sds = [], []
    failed = 0
    for r in range(config.replicates):
        gen = generate(config.scenario, config.n, config.m,
                       RngStream(config.seed, r))
        try:
            res = regression.fit(spec, gen.data, options=options)
        except (ValueError, RuntimeError):
            failed += 1
            continue
        if not (res.converged and np.all(np.isfinite(res.std_errors))):
            failed += 1
            continue
        mles.append(res.params.pack())
        est_sds.append(res.std_errors)
    if not mles:
        raise RuntimeError("every replicate failed to converge")
    mles = np.asarray(mles)
    est_sds = np.asarray(est_sds)
    kept = mles.shape[0]
    if kept > 1:
        emp_sd = mles.std(axis=0, ddof=1)
    else:
        emp_sd = np.full(mles.shape[1], np.nan)
    labels = tuple(f"beta{j}" for j in range(mles.shape[1] - 1)) + ("log_scale",)
    return MonteCarloSummary(
        study="mle",
        labels=labels,
        average_mle=mles.mean(axis=0),
        average_est_sd=est_sds.mean(axis=0),
        empirical_sd=emp_sd,
        mc_se=emp_sd / np.sqrt(kept),
        replicates=kept,
        failed=failed,
        config=config,
    )


def run_power_study(assumed, scenarios, n_grid, level=0.05, replicates=300,
                    b=300, seed=0, m=None, options=None):
    """Bootstrap score-test rejection rates per (scenario, n).

    Returns {(scenario, n): rejection_rate}.  ``m`` overrides the default
    per-scenario shape.
    """
    if assumed not in ("beta_mode", "gbp_mode"):
        raise ValueError("assumed family must be beta_mode or gbp_mode")
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    spec = regression.ModelSpec(assumed, "logit")
    rates = {}
    for scenario in scenarios:
        _check_scenario(scenario)
        m_true = DEFAULT_M[scenario] if m is None else m
        for n in n_grid:
            rejections = 0
            kept = 0
            for r in range(replicates):
                rep_stream = RngStream(seed, r)
                gen = generate(scenario, n, m_true, rep_stream)
                try:
                    result = diagnostics.bootstrap_score_test(
                        spec, gen.data, b=b, stream=rep_stream.child(2),
                        options=options)
                except (ValueError, RuntimeError):
                    continue
                kept += 1
                rejections += result.p_value < level
            if kept == 0:
                raise RuntimeError(
                    f"no usable replicates for {scenario}, n={n}")
            rates[(scenario, n)] = rejections / kept
    return rates


def run_coverage_study(scenario, n_grid, q_grid, replicates=300, seed=0,
                       m=None, options=None):
    """LOO coverage/width curves for both interval kinds.

    Returns {(n, q): {"coverage_mode", "coverage_mean", "width_mode",
    "width_mean", "width_ratio"}} averaged across replicates.
    """
    _check_scenario(scenario)
    if scenario not in ("B1", "G1"):
        raise ValueError("coverage study is defined for B1 and G1")
    spec = regression.ModelSpec(assumed_family(scenario), "logit")
    m_true = DEFAULT_M[scenario] if m is None else m
    q_grid = [float(q) for q in q_grid]
    out = {}
    for n in n_grid:
        acc = {q: np.zeros(4) for q in q_grid}
        kept = 0
        for r in range(replicates):
            gen = generate(scenario, n, m_true, RngStream(seed, r))
            try:
                curves = prediction.cv_coverage_curves(
                    spec, gen.data, q_grid, folds=None, options=options)
            except (ValueError, RuntimeError):
                continue
            kept += 1
            for q in q_grid:
                cm = curves[("mode_based", q)]
                cu = curves[("mean_based", q)]
                acc[q] += (cm.empirical_coverage, cu.empirical_coverage,
                           cm.average_width, cu.average_width)
        if kept == 0:
            raise RuntimeError(f"no usable replicates at n={n}")
        for q in q_grid:
            cov_mode, cov_mean, w_mode, w_mean = acc[q] / kept
            out[(n, q)] = {
                "coverage_mode": cov_mode,
                "coverage_mean": cov_mean,
                "width_mode": w_mode,
                "width_mean": w_mean,
                "width_ratio": w_mean / w_mode if w_mode > 0 else np.inf,
            }
    return out


def run_envelope_demo(assumed, scenario, n, seed=0, k=19, m=None,
                      options=None):
    """One generated dataset, one simulated-envelope computation."""
    _check_scenario(scenario)
    spec = regression.ModelSpec(assumed, "logit")
    m_true = DEFAULT_M[scenario] if m is None else m
    stream = RngStream(seed, 0)
    gen = generate(scenario, n, m_true, stream)
    return diagnostics.halfnormal_envelope(spec, gen.data, k=k,
                                           stream=stream.child(2),
                                           options=options)
