"""Command-line interface.

Subcommands: fit, envelope, scoretest, predict, coverage, simulate.
Tabular results go to CSV, scalar results to JSON (schema_version "1");
``--plot`` additionally renders a matplotlib figure next to the data.
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click
import numpy as np

from . import diagnostics, links, prediction, regression, report, simharness
from .numerics import RngStream

SCHEMA_VERSION = "1"

_FAMILY = click.Choice(regression.FAMILIES)
_LINK = click.Choice(links.LINK_NAMES)


def _default_seed():
    return int(os.environ.get("MODEREG_SEED", "0"))


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise click.ClickException(f"{path}: empty file")
        rows = list(reader)
    if not rows:
        raise click.ClickException(f"{path}: no data rows")
    columns = {name: [] for name in header}
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise click.ClickException(f"{path}:{r}: wrong field count")
        for name, cell in zip(header, row):
            if cell == "":
                raise click.ClickException(
                    f"{path}:{r}: missing value in column {name!r}")
            columns[name].append(cell)
    return header, columns


def _expand_dummies(header, columns, dummy_cols):
    """Reference coding: the first level encountered is the baseline."""
    for col in dummy_cols:
        if col not in columns:
            raise click.ClickException(f"--dummy column {col!r} not found")
        values = columns.pop(col)
        header.remove(col)
        levels = []
        for v in values:
            if v not in levels:
                levels.append(v)
        for level in levels[1:]:
            name = f"{col}-{level}"
            columns[name] = ["1" if v == level else "0" for v in values]
            header.append(name)
    return header, columns


def _numeric(columns, name):
    try:
        return np.array([float(v) for v in columns[name]])
    except ValueError as exc:
        raise click.ClickException(f"column {name!r} is not numeric: {exc}")


def load_dataset(input_path, response, covariates=None, dummy=(),
                 rescale_divisor=None):
    header, columns = _read_csv(input_path)
    if response not in columns:
        raise click.ClickException(f"response column {response!r} not found")
    header, columns = _expand_dummies(header, columns, dummy)
    if covariates:
        names = [c.strip() for c in covariates.split(",")]
        for c in names:
            if c not in columns:
                raise click.ClickException(f"covariate column {c!r} not found")
    else:
        names = [c for c in header if c != response]
    y = _numeric(columns, response)
    if rescale_divisor is not None:
        if rescale_divisor <= np.max(y):
            raise click.ClickException(
                "--rescale-divisor must exceed the largest response")
        y = y / rescale_divisor
    bad = np.flatnonzero((y < 0) | (y > 1))
    if bad.size:
        raise click.ClickException(
            f"responses outside [0,1] in rows {(bad + 2).tolist()}")
    x = np.column_stack([_numeric(columns, c) for c in names])
    return regression.Dataset(y, x, tuple(names))


def _spec(family, link, squeeze):
    return regression.ModelSpec(family, link, squeeze)


def _check_boundary(spec, data):
    try:
        regression.prepare_responses(spec, data)
    except regression.BoundaryResponseError as exc:
        raise click.ClickException(str(exc))


def _write_json(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path in (None, "-"):
        click.echo(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fit_payload(res, data):
    names = ("intercept",) + data.column_names
    return {
        "family": res.spec.family,
        "link": res.spec.link,
        "n": res.n,
        "coefficients": dict(zip(names, map(float, res.params.beta))),
        "log_scale": res.params.log_scale,
        "scale": res.params.scale,
        "std_errors": dict(zip(names + ("log_scale",),
                               map(float, res.std_errors))),
        "loglik": res.loglik,
        "converged": res.converged,
        "iterations": res.iterations,
        "squeezed": res.squeezed,
    }


def common_data_options(f):
    f = click.option("--input", "input_path", required=True,
                     type=click.Path(exists=True, dir_okay=False))(f)
    f = click.option("--response", default="y", show_default=True)(f)
    f = click.option("--covariates", default=None,
                     help="comma-separated covariate columns "
                          "(default: all other columns)")(f)
    f = click.option("--dummy", multiple=True,
                     help="expand a categorical column to reference-coded "
                          "dummies (repeatable)")(f)
    f = click.option("--rescale-divisor", type=float, default=None,
                     help="divide responses by this before fitting")(f)
    f = click.option("--squeeze", is_flag=True,
                     help="map boundary responses into (0,1)")(f)
    return f


@click.group()
def main():
    """Parametric mode regression for responses bounded in (0,1)."""


@main.command("fit")
@common_data_options
@click.option("--family", type=_FAMILY, required=True)
@click.option("--link", type=_LINK, default="logit", show_default=True)
@click.option("--compare-links", is_flag=True,
              help="also report log-likelihood under every link")
@click.option("--output", default="-", help="JSON output path or - for stdout")
def cmd_fit(input_path, response, covariates, dummy, rescale_divisor,
            squeeze, family, link, compare_links, output):
    """Fit one model by maximum likelihood and report MLEs."""
    data = load_dataset(input_path, response, covariates, dummy,
                        rescale_divisor)
    spec = _spec(family, link, squeeze)
    _check_boundary(spec, data)
    try:
        res = regression.fit(spec, data)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"fit failed: {exc}")
    payload = _fit_payload(res, data)
    if compare_links:
        table = {}
        for other in links.LINK_NAMES:
            alt = regression.fit(_spec(family, other, squeeze), data,
                                 compute_covariance=False)
            table[other] = alt.loglik
        payload["link_logliks"] = table
    _write_json(output, payload)
    if not res.converged:
        raise click.ClickException("optimizer did not converge")


@main.command("envelope")
@common_data_options
@click.option("--family", type=_FAMILY, required=True)
@click.option("--link", type=_LINK, default="logit", show_default=True)
@click.option("--k", default=19, show_default=True,
              help="number of simulated refits")
@click.option("--seed", type=int, default=None)
@click.option("--output", required=True, help="CSV output path")
@click.option("--plot", "plot_path", default=None,
              help="render the envelope figure to this path")
def cmd_envelope(input_path, response, covariates, dummy, rescale_divisor,
                 squeeze, family, link, k, seed, output, plot_path):
    """Half-normal residual envelope for a fitted model."""
    data = load_dataset(input_path, response, covariates, dummy,
                        rescale_divisor)
    spec = _spec(family, link, squeeze)
    _check_boundary(spec, data)
    seed = _default_seed() if seed is None else seed
    try:
        env = diagnostics.halfnormal_envelope(spec, data, k=k,
                                              stream=RngStream(seed))
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"envelope failed: {exc}")
    rows = [
        (i + 1, f"{q:.10g}", f"{r:.10g}", f"{lo:.10g}", f"{hi:.10g}")
        for i, (q, r, lo, hi) in enumerate(
            zip(env.quantiles, env.residuals_sorted, env.lower, env.upper))
    ]
    _write_csv(output, ["rank", "quantile", "residual", "lower", "upper"],
               rows)
    _write_json("-", {"proportion_outside": env.proportion_outside,
                      "k_simulations": env.k_simulations})
    if plot_path:
        report.render_envelope_figure(env, plot_path)


@main.command("scoretest")
@common_data_options
@click.option("--family", type=click.Choice(["beta_mode", "gbp_mode"]),
              required=True)
@click.option("--link", type=_LINK, default="logit", show_default=True)
@click.option("--b", default=300, show_default=True,
              help="bootstrap replicates")
@click.option("--seed", type=int, default=None)
@click.option("--output", default="-")
def cmd_scoretest(input_path, response, covariates, dummy, rescale_divisor,
                  squeeze, family, link, b, seed, output):
    """Moment-matching score test with a parametric-bootstrap p-value."""
    data = load_dataset(input_path, response, covariates, dummy,
                        rescale_divisor)
    spec = _spec(family, link, squeeze)
    _check_boundary(spec, data)
    seed = _default_seed() if seed is None else seed
    try:
        res = diagnostics.bootstrap_score_test(spec, data, b=b,
                                               stream=RngStream(seed))
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"score test failed: {exc}")
    _write_json(output, {"Q_obs": res.q_observed, "p_value": res.p_value,
                         "B": res.b})


@main.command("predict")
@common_data_options
@click.option("--family", type=_FAMILY, required=True)
@click.option("--link", type=_LINK, default="logit", show_default=True)
@click.option("--q", "q_values", default="0.1,0.2,0.5", show_default=True,
              help="comma-separated nominal levels")
@click.option("--output", required=True, help="CSV output path")
@click.option("--plot", "plot_path", default=None)
def cmd_predict(input_path, response, covariates, dummy, rescale_divisor,
                squeeze, family, link, q_values, output, plot_path):
    """Mode- and mean-based prediction intervals for every data row."""
    data = load_dataset(input_path, response, covariates, dummy,
                        rescale_divisor)
    spec = _spec(family, link, squeeze)
    _check_boundary(spec, data)
    qs = [float(v) for v in q_values.split(",")]
    try:
        res = regression.fit(spec, data, compute_covariance=False)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"fit failed: {exc}")
    rows = []
    plot_rows = []
    for i in range(data.n):
        for q in qs:
            for maker, kind in ((prediction.mode_interval, "mode_based"),
                                (prediction.mean_interval, "mean_based")):
                pi = maker(res, data.x[i], q)
                rows.append((i + 1, q, kind, f"{pi.lower:.10g}",
                             f"{pi.upper:.10g}", int(pi.truncated)))
                plot_rows.append({"row": i + 1, "kind": kind,
                                  "lower": pi.lower, "upper": pi.upper})
    _write_csv(output, ["row", "q", "kind", "lower", "upper", "truncated"],
               rows)
    if plot_path:
        report.render_intervals_figure(plot_rows, plot_path)


@main.command("coverage")
@common_data_options
@click.option("--family", type=_FAMILY, required=True)
@click.option("--link", type=_LINK, default="logit", show_default=True)
@click.option("--q", "q_values", default=None,
              help="comma-separated nominal levels for density intervals")
@click.option("--k", "k_values", default=None,
              help="comma-separated width multipliers for fixed-width "
                   "intervals")
@click.option("--folds", default=None, type=int,
              help="CV folds (default: leave-one-out)")
@click.option("--seed", type=int, default=None)
@click.option("--output", required=True, help="CSV output path")
@click.option("--plot", "plot_path", default=None)
def cmd_coverage(input_path, response, covariates, dummy, rescale_divisor,
                 squeeze, family, link, q_values, k_values, folds, seed,
                 output, plot_path):
    """Cross-validated empirical coverage of prediction intervals."""
    if (q_values is None) == (k_values is None):
        raise click.ClickException("give exactly one of --q or --k")
    data = load_dataset(input_path, response, covariates, dummy,
                        rescale_divisor)
    spec = _spec(family, link, squeeze)
    _check_boundary(spec, data)
    seed = _default_seed() if seed is None else seed
    stream = RngStream(seed)
    rows = []
    try:
        if q_values is not None:
            grid = [float(v) for v in q_values.split(",")]
            curves = prediction.cv_coverage_curves(spec, data, grid,
                                                   folds=folds, stream=stream)
            kinds = ("mode_based", "mean_based")
        else:
            grid = [float(v) for v in k_values.split(",")]
            curves = prediction.cv_fixed_width_curves(spec, data, grid,
                                                      folds=folds,
                                                      stream=stream)
            kinds = ("fixed_width_mode", "fixed_width_mean")
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"coverage failed: {exc}")
    plot_rows = []
    for g in grid:
        cm, cu = curves[(kinds[0], g)], curves[(kinds[1], g)]
        rows.append((g, f"{cm.empirical_coverage:.10g}",
                     f"{cu.empirical_coverage:.10g}",
                     f"{cm.average_width:.10g}", f"{cu.average_width:.10g}"))
        plot_rows.append({"q_or_k": g,
                          "coverage_mode": cm.empirical_coverage,
                          "coverage_mean": cu.empirical_coverage,
                          "width_mode": cm.average_width,
                          "width_mean": cu.average_width})
    _write_csv(output, ["q_or_k", "coverage_mode", "coverage_mean",
                        "width_mode", "width_mean"], rows)
    if plot_path:
        report.render_coverage_figure(
            plot_rows, plot_path,
            x_label="nominal q" if q_values is not None else "width multiplier k")


@main.command("simulate")
@click.option("--study", type=click.Choice(
    ["generate", "mle", "power", "coverage", "envelope"]),
    default="mle", show_default=True)
@click.option("--scenario", "scenarios", multiple=True,
              help="scenario id (repeatable for power studies)")
@click.option("--n", "n_grid", multiple=True, type=int,
              help="sample size (repeatable)")
@click.option("--m", type=float, default=None,
              help="true shape (default: the per-scenario study value)")
@click.option("--replicates", default=300, show_default=True)
@click.option("--b", default=300, show_default=True)
@click.option("--level", default=0.05, show_default=True)
@click.option("--q", "q_values", default="0.1,0.2,0.3,0.4,0.5",
              show_default=True)
@click.option("--assumed", type=click.Choice(["beta_mode", "gbp_mode"]),
              default=None, help="assumed family (default: matches scenario)")
@click.option("--seed", type=int, default=None)
@click.option("--fast", is_flag=True,
              help="CI profile: replicates=50, b=100")
@click.option("--output", default="-",
              help="JSON output path (CSV for --study generate)")
@click.option("--plot", "plot_path", default=None)
def cmd_simulate(study, scenarios, n_grid, m, replicates, b, level, q_values,
                 assumed, seed, fast, output, plot_path):
    """Run one of the Monte Carlo studies on synthetic data."""
    if not scenarios:
        raise click.ClickException("--scenario is required")
    for s in scenarios:
        if s not in simharness.SCENARIOS:
            raise click.ClickException(
                f"unknown scenario {s!r}; valid: "
                f"{', '.join(simharness.SCENARIOS)}")
    if not n_grid:
        raise click.ClickException("--n is required")
    seed = _default_seed() if seed is None else seed
    if fast:
        replicates, b = 50, 100
    scenario = scenarios[0]
    assumed = assumed or simharness.assumed_family(scenario)
    try:
        if study == "generate":
            gen = simharness.generate(
                scenario, n_grid[0],
                simharness.DEFAULT_M[scenario] if m is None else m,
                RngStream(seed, 0))
            rows = [(f"{y:.17g}", f"{x1:.17g}", f"{x2:.17g}", f"{t:.17g}")
                    for y, (x1, x2), t in zip(gen.data.y, gen.data.x,
                                              gen.theta)]
            if output == "-":
                raise click.ClickException(
                    "--study generate needs --output FILE.csv")
            _write_csv(output, ["y", "x1", "x2", "theta_true"], rows)
        elif study == "mle":
            config = simharness.SimConfig(
                scenario, n_grid[0],
                simharness.DEFAULT_M[scenario] if m is None else m,
                replicates, seed)
            summary = simharness.run_mle_study(config)
            _write_json(output, {
                "study": "mle", "scenario": scenario, "n": config.n,
                "m": config.m, "replicates": summary.replicates,
                "failed": summary.failed,
                "labels": list(summary.labels),
                "average_mle": summary.average_mle.tolist(),
                "average_est_sd": summary.average_est_sd.tolist(),
                "empirical_sd": summary.empirical_sd.tolist(),
                "mc_se": summary.mc_se.tolist(),
            })
        elif study == "power":
            rates = simharness.run_power_study(
                assumed, list(scenarios), list(n_grid), level=level,
                replicates=replicates, b=b, seed=seed, m=m)
            _write_json(output, {
                "study": "power", "assumed": assumed, "level": level,
                "replicates": replicates, "b": b,
                "rates": [{"scenario": s, "n": n, "rate": r}
                          for (s, n), r in sorted(rates.items())],
            })
            if plot_path:
                report.render_power_figure(rates, plot_path, level=level)
        elif study == "coverage":
            grid = [float(v) for v in q_values.split(",")]
            curves = simharness.run_coverage_study(
                scenario, list(n_grid), grid, replicates=replicates,
                seed=seed, m=m)
            payload = [{"n": n, "q": q, **{key: float(val)
                                           for key, val in d.items()}}
                       for (n, q), d in sorted(curves.items())]
            _write_json(output, {"study": "coverage", "scenario": scenario,
                                 "replicates": replicates, "curves": payload})
            if plot_path:
                n0 = sorted(n_grid)[0]
                rows = [{"q_or_k": q, **curves[(n0, q)]} for q in grid]
                report.render_coverage_figure(rows, plot_path)
        else:  # envelope
            env = simharness.run_envelope_demo(assumed, scenario, n_grid[0],
                                               seed=seed, m=m)
            if output == "-":
                raise click.ClickException(
                    "--study envelope needs --output FILE.csv")
            rows = [
                (i + 1, f"{q:.10g}", f"{r:.10g}", f"{lo:.10g}", f"{hi:.10g}")
                for i, (q, r, lo, hi) in enumerate(
                    zip(env.quantiles, env.residuals_sorted, env.lower,
                        env.upper))
            ]
            _write_csv(output, ["rank", "quantile", "residual", "lower",
                                "upper"], rows)
            _write_json("-", {"proportion_outside": env.proportion_outside,
                              "k_simulations": env.k_simulations})
            if plot_path:
                report.render_envelope_figure(env, plot_path)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(f"{study} study failed: {exc}")


if __name__ == "__main__":
    sys.exit(main())
