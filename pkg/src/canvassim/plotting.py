"""Figure rendering for the CLI report path. Each subcommand's CSV gets a
companion PNG; the CSVs stay the canonical outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

plt.rcParams.update({
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
})


def _finish(fig, path):
    fig.savefig(path)
    plt.close(fig)


def plot_rent_sweep(rows, path):
    fig, ax = plt.subplots()
    series = {}
    for row in rows:
        series.setdefault((row.alpha, row.m), []).append(row)
    for (alpha, m), pts in sorted(series.items()):
        pts = [r for r in pts if r.mean_rent is not None]
        if not pts:
            continue
        xs = [r.phi for r in pts]
        ys = [r.mean_rent for r in pts]
        errs = [r.stderr_rent for r in pts]
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=f"alpha={alpha:g}, M={m}")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("dispersion phi")
    ax.set_ylabel("mean RENT")
    ax.set_title(f"RENT vs dispersion ({rows[0].policy})")
    ax.legend()
    _finish(fig, path)


def plot_gini_curve(points, path):
    fig, ax = plt.subplots()
    xs = [p.phi for p in points]
    ax.fill_between(xs, [p.min_gini for p in points], [p.max_gini for p in points],
                    alpha=0.25, label="min-max")
    ax.plot(xs, [p.mean_gini for p in points], marker="o", label="mean")
    ax.set_xlabel("dispersion phi")
    ax.set_ylabel("Gini of High-Risk counts")
    ax.set_title("Risk concentration vs dispersion")
    ax.legend()
    _finish(fig, path)


def plot_phi_calibration(points, observed_gini, estimates, path):
    fig, ax = plt.subplots()
    xs = [p.phi for p in points]
    ax.plot(xs, [p.mean_gini for p in points], marker=".", label="simulated mean Gini")
    ax.axhline(observed_gini, color="black", lw=0.9, ls=":", label=f"observed Gini {observed_gini:.4f}")
    colors = {"envelope": "tab:red", "gini_match": "tab:green"}
    for est in estimates:
        name = est.method.value
        ax.axvline(est.phi, color=colors.get(name, "gray"), lw=1.0, ls="--",
                   label=f"{name}: phi={est.phi:.4f}" + ("" if est.found else " (not covered)"))
    ax.set_xlabel("dispersion phi")
    ax.set_ylabel("Gini of High-Risk counts")
    ax.set_title("Dispersion calibration")
    ax.legend()
    _finish(fig, path)


def plot_discovered(rows, path, value_key, ylabel):
    fig, ax = plt.subplots()
    series = {}
    for row in rows:
        v = row.get(value_key)
        if v is None:
            continue
        series.setdefault((row["policy"], row["alpha"]), []).append((row["m"], v))
    for (policy, alpha), pts in sorted(series.items()):
        pts.sort()
        ax.plot([m for m, _ in pts], [v for _, v in pts], marker="o",
                label=f"{policy}, alpha={alpha:g}")
    ax.set_xlabel("neighborhood budget M")
    ax.set_ylabel(ylabel)
    ax.set_title("Policy comparison")
    ax.legend()
    _finish(fig, path)


def plot_reliability(rows_by_method, path):
    fig, ax = plt.subplots()
    ax.plot([0, 1], [0, 1], color="gray", lw=0.8, ls="--", label="perfect calibration")
    for method, bins in rows_by_method.items():
        ax.plot([b.mean_predicted for b in bins], [b.empirical_rate for b in bins],
                marker="o", label=method)
    ax.set_xlabel("mean predicted probability")
    ax.set_ylabel("empirical eviction rate")
    ax.set_title("Reliability curve")
    ax.legend()
    _finish(fig, path)


def plot_utility(rows, path):
    fig, ax = plt.subplots()
    series = {}
    for row in rows:
        series.setdefault((row["policy"], row["reduction"]), []).append((row["m"], row["expected_reduction"]))
    for (policy, reduction), pts in sorted(series.items()):
        pts.sort()
        ax.plot([m for m, _ in pts], [v for _, v in pts], marker="o",
                label=f"{policy}, reduction={reduction:g}")
    ax.set_xlabel("neighborhood budget M")
    ax.set_ylabel("expected evictions prevented")
    ax.set_title("Intervention utility")
    ax.legend()
    _finish(fig, path)
