"""Figure rendering for the CLI report paths.

Each function takes already-computed results plus an output path and
renders one PNG (or whatever extension the path carries).  Everything uses
the Agg backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_envelope_figure(env, path, title=None):
    """Half-normal residual plot with the simulated envelope bands."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(env.quantiles, env.residuals_sorted, "o", ms=3, color="black",
            label="observed")
    ax.plot(env.quantiles, env.lower, "-", lw=1, color="tab:blue",
            label="envelope")
    ax.plot(env.quantiles, env.upper, "-", lw=1, color="tab:blue")
    ax.set_xlabel("half-normal quantile")
    ax.set_ylabel("ordered |standardized residual|")
    if title is None:
        title = f"outside: {env.proportion_outside:.1%} (k={env.k_simulations})"
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_coverage_figure(rows, path, x_label="nominal q"):
    """Coverage curves and the mean/mode width ratio, side by side.

    ``rows`` is a list of dicts with keys q_or_k, coverage_mode,
    coverage_mean, width_mode, width_mean.
    """
    xs = [r["q_or_k"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(xs, [r["coverage_mode"] for r in rows], "-o", ms=4,
             label="mode-based")
    ax1.plot(xs, [r["coverage_mean"] for r in rows], "--s", ms=4,
             label="mean-based")
    lo, hi = min(xs), max(xs)
    ax1.plot([lo, hi], [lo, hi], "-.", color="red", lw=1)
    ax1.set_xlabel(x_label)
    ax1.set_ylabel("empirical coverage")
    ax1.legend(frameon=False)
    ratios = [r["width_mean"] / r["width_mode"] if r["width_mode"] > 0
              else float("nan") for r in rows]
    ax2.plot(xs, ratios, "-o", ms=4)
    ax2.axhline(1.0, color="red", ls="-.", lw=1)
    ax2.set_xlabel(x_label)
    ax2.set_ylabel("width ratio mean/mode")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_power_figure(rates, path, level=0.05):
    """Rejection-rate curves versus n, one line per scenario."""
    scenarios = sorted({s for s, _ in rates})
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for scenario in scenarios:
        ns = sorted(n for s, n in rates if s == scenario)
        ax.plot(ns, [rates[(scenario, n)] for n in ns], "-o", ms=4,
                label=scenario)
    ax.axhline(level, color="red", ls=(0, (3, 1, 1, 1)), lw=1)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_intervals_figure(rows, path):
    """Per-row prediction intervals, one vertical segment per (row, kind)."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    colors = {"mode_based": "tab:blue", "mean_based": "tab:orange"}
    seen = set()
    for r in rows:
        x = r["row"] + (0.15 if r["kind"] == "mean_based" else -0.15)
        label = r["kind"] if r["kind"] not in seen else None
        seen.add(r["kind"])
        ax.plot([x, x], [r["lower"], r["upper"]], "-",
                color=colors.get(r["kind"], "gray"), lw=2, label=label)
    ax.set_xlabel("row")
    ax.set_ylabel("response")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
