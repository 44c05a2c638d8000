"""Command-line entry point: one subcommand per figure family.

simulate         RENT-vs-phi sweeps over alpha/M grids
gini-curve       Monte Carlo Gini of High-Risk counts across phi
calibrate-phi    envelope and Gini-match dispersion fits from a property table
evaluate         policy comparison (visits, discoveries, RENT) on a property table
calibrate-scores Platt/isotonic score calibration plus a reliability table
utility          expected eviction reductions per policy, budget, and scenario

Every run writes its CSVs plus a run_manifest.txt capturing all parameters,
the base seed, and the package version; identical manifests reproduce
byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .calibration import (
    EqualFrequency,
    calibrate_phi_envelope,
    calibrate_phi_gini,
    calibrator_to_text,
    gini_curve,
    isotonic_regression,
    platt_scaling,
    reliability_curve,
)
from .city import CityConfig, gini_index
from .dataio import load_properties, write_csv, write_manifest, fmt_value
from .evaluation import (
    InterventionScenario,
    OutcomeModel,
    PolicyKind,
    expected_discovered,
    expected_reduction,
    realized_discovered,
    rent_sweep,
)
from .policies import (
    CostModel,
    OrderingKey,
    budget_for_neighborhoods,
    hpt,
    non_targeting,
    order_neighborhoods,
    tpt,
)

RENT_SWEEP_HEADER = ("phi", "N", "n", "M", "alpha", "fraction", "p", "q", "policy",
                     "mean_rent", "stderr_rent", "mean_s_b", "mean_s_t", "replicates")


def _probability(raw: str) -> float:
    value = float(raw)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {raw}")
    return value


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {raw}")
    return value


def _alpha(raw: str) -> float:
    value = float(raw)
    if value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be >= 1 (the intra cost), got {raw}")
    return value


def _add_common(sub, out_default="."):
    sub.add_argument("--seed", type=int, default=0, help="base seed; all randomness flows from it")
    sub.add_argument("--out", default=out_default, help="output directory")
    sub.add_argument("--no-plot", action="store_true", help="skip the companion PNG figure")


def _add_phi_args(sub):
    sub.add_argument("--phi", type=_probability, action="append",
                     help="dispersion value, repeatable")
    sub.add_argument("--phi-grid", metavar="LO:HI:STEPS",
                     help="evenly spaced dispersion grid, e.g. 0.1:0.999:8")


def _resolve_phis(args, parser, default=None):
    if args.phi and args.phi_grid:
        parser.error("give either --phi or --phi-grid, not both")
    if args.phi:
        return [float(p) for p in args.phi]
    if args.phi_grid:
        parts = args.phi_grid.split(":")
        if len(parts) != 3:
            parser.error("--phi-grid must look like lo:hi:steps")
        try:
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            parser.error("--phi-grid must look like lo:hi:steps")
        if not (0.0 <= lo <= hi <= 1.0) or steps < 1:
            parser.error("--phi-grid bounds must lie in [0, 1] with steps >= 1")
        return [float(p) for p in np.linspace(lo, hi, steps)]
    if default is not None:
        return default
    parser.error("a dispersion grid is required (--phi or --phi-grid)")


def _default_calibration_grid():
    # 200 log-spaced points in [0.5, 0.9999], concentrated near 1
    return [float(p) for p in 1.0 - np.geomspace(0.5, 1e-4, 200)]


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_run_manifest(args, subcommand: str, params: dict):
    manifest = {"subcommand": subcommand, "seed": args.seed, "version": __version__}
    for key, value in params.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(fmt_value(v) for v in value)
        manifest[key] = value
    write_manifest(_out_path(args, "run_manifest.txt"), manifest)


def _load(args):
    result = load_properties(args.data, min_neighborhood_size=args.min_neighborhood_size)
    if result.dropped_neighborhoods:
        print(f"dropped {result.dropped_neighborhoods} neighborhoods "
              f"({result.dropped_properties} properties) under the size threshold")
    return result


def _baseline_order(model, profile):
    # outreach teams rank by observed prior evictions when the data has them
    if profile.prior_evictions is not None:
        return order_neighborhoods(model, OrderingKey.PRIOR_EVICTIONS,
                                   prior_evictions=profile.prior_evictions)
    return order_neighborhoods(model, OrderingKey.HIGH_RISK_COUNT)


def _cmd_simulate(args, parser):
    phis = _resolve_phis(args, parser)
    rows = rent_sweep(
        phis=phis,
        num_neighborhoods=args.neighborhoods,
        properties_per=args.properties_per,
        m_values=args.m or [10],
        alphas=args.alpha or [3.0],
        fraction=args.fraction,
        p=args.p,
        q=args.q,
        policy_kind=PolicyKind(args.policy),
        replicates=args.replicates,
        base_seed=args.seed,
    )
    csv_path = _out_path(args, "rent_sweep.csv")
    write_csv(csv_path, RENT_SWEEP_HEADER, [
        (r.phi, r.num_neighborhoods, r.properties_per, r.m, r.alpha, r.fraction,
         r.p, r.q, r.policy, r.mean_rent, r.stderr_rent, r.mean_s_b, r.mean_s_t, r.replicates)
        for r in rows
    ])
    _write_run_manifest(args, "simulate", {
        "phi": phis, "neighborhoods": args.neighborhoods, "properties_per": args.properties_per,
        "m": args.m or [10], "alpha": args.alpha or [3.0], "fraction": args.fraction,
        "p": args.p, "q": args.q, "policy": args.policy, "replicates": args.replicates,
    })
    if not args.no_plot:
        from . import plotting
        plotting.plot_rent_sweep(rows, _out_path(args, "rent_sweep.png"))
    print(f"wrote {csv_path} ({len(rows)} grid points)")


def _cmd_gini_curve(args, parser):
    phis = _resolve_phis(args, parser)
    config = CityConfig(num_neighborhoods=args.neighborhoods,
                        properties_per=args.properties_per,
                        high_risk_fraction=args.fraction)
    points = gini_curve(config, phis, samples=args.replicates, base_seed=args.seed)
    csv_path = _out_path(args, "gini_curve.csv")
    write_csv(csv_path, ("phi", "mean_gini", "min_gini", "max_gini"),
              [(p.phi, p.mean_gini, p.min_gini, p.max_gini) for p in points])
    _write_run_manifest(args, "gini-curve", {
        "phi": phis, "neighborhoods": args.neighborhoods,
        "properties_per": args.properties_per, "fraction": args.fraction,
        "samples": args.replicates,
    })
    if not args.no_plot:
        from . import plotting
        plotting.plot_gini_curve(points, _out_path(args, "gini_curve.png"))
    print(f"wrote {csv_path} ({len(points)} grid points)")


def _cmd_calibrate_phi(args, parser):
    phis = _resolve_phis(args, parser, default=_default_calibration_grid())
    result = _load(args)
    profile = result.profile
    envelope = calibrate_phi_envelope(profile, phis, n_sims=args.replicates,
                                      base_seed=args.seed, properties_per=args.properties_per)
    gini_fit = calibrate_phi_gini(profile, phis, samples=args.replicates,
                                  base_seed=args.seed, properties_per=args.properties_per)
    uncovered_at_fit = len(envelope.diagnostics["uncovered_ranks"].get(envelope.phi, ()))
    csv_path = _out_path(args, "phi_estimates.csv")
    write_csv(
        csv_path,
        ("method", "phi", "found", "observed_gini", "fitted_mean_gini", "residual", "uncovered_ranks"),
        [
            ("envelope", envelope.phi, int(envelope.found), None, None, None, uncovered_at_fit),
            ("gini_match", gini_fit.phi, int(gini_fit.found),
             gini_fit.diagnostics["observed_gini"], gini_fit.diagnostics["fitted_mean_gini"],
             gini_fit.diagnostics["residual"], None),
        ],
    )
    _write_run_manifest(args, "calibrate-phi", {
        "data": args.data, "phi": phis, "n_sims": args.replicates,
        "properties_per": args.properties_per,
        "min_neighborhood_size": args.min_neighborhood_size,
    })
    if not args.no_plot:
        from . import plotting
        from .calibration import _simulation_config
        config = _simulation_config(profile, args.properties_per)
        points = gini_curve(config, sorted(phis), samples=args.replicates, base_seed=args.seed)
        g_obs = gini_index(np.asarray(profile.high_risk_counts, dtype=np.float64))
        plotting.plot_phi_calibration(points, g_obs, [envelope, gini_fit],
                                      _out_path(args, "phi_calibration.png"))
    print(f"wrote {csv_path}: envelope phi={envelope.phi:.6g} "
          f"({'covered' if envelope.found else 'not covered'}), "
          f"gini match phi={gini_fit.phi:.6g}")


def _cmd_evaluate(args, parser):
    if (args.p is None) != (args.q is None):
        parser.error("--p and --q must be given together")
    result = _load(args)
    model, profile = result.model, result.profile
    if result.evicted is None and args.p is None:
        parser.error("the data has no evicted column; give --p and --q for expected discoveries")
    outcome = OutcomeModel(p=args.p, q=args.q) if args.p is not None else None
    baseline_order = _baseline_order(model, profile)
    hr_order = order_neighborhoods(model, OrderingKey.HIGH_RISK_COUNT)
    ms = args.m or [10]
    alphas = args.alpha or [3.0]
    rows = []
    for m in ms:
        if m > model.num_neighborhoods:
            raise ValueError(f"--m {m} exceeds the {model.num_neighborhoods} retained neighborhoods")
        for alpha in alphas:
            cost_model = CostModel(inter_cost=alpha)
            budget = budget_for_neighborhoods(model, baseline_order, m, cost_model)
            plans = {
                "non_targeting": non_targeting(model, baseline_order, budget, cost_model),
                "hpt": hpt(model, hr_order, budget, cost_model),
                "tpt": tpt(model, budget, cost_model),
            }
            expected = {name: expected_discovered(plan, outcome) if outcome else None
                        for name, plan in plans.items()}
            realized = {name: realized_discovered(plan, result.evicted)
                        if result.evicted is not None else None
                        for name, plan in plans.items()}
            for name, plan in plans.items():
                def ratio(vals):
                    if name == "non_targeting" or vals[name] in (None, 0):
                        return None
                    return vals["non_targeting"] / vals[name]
                rows.append({
                    "m": m, "alpha": alpha, "policy": name, "budget": budget,
                    "visits": plan.num_visits,
                    "visited_high_risk": plan.visited_high_risk,
                    "visited_low_risk": plan.visited_low_risk,
                    "expected_discovered": expected[name],
                    "realized_discovered": realized[name],
                    "rent_expected": ratio(expected),
                    "rent_realized": ratio(realized),
                })
    csv_path = _out_path(args, "evaluation.csv")
    header = ("M", "alpha", "policy", "budget", "visits", "visited_high_risk", "visited_low_risk",
              "expected_discovered", "realized_discovered", "rent_expected", "rent_realized")
    write_csv(csv_path, header, [
        (r["m"], r["alpha"], r["policy"], r["budget"], r["visits"], r["visited_high_risk"],
         r["visited_low_risk"], r["expected_discovered"], r["realized_discovered"],
         r["rent_expected"], r["rent_realized"])
        for r in rows
    ])
    _write_run_manifest(args, "evaluate", {
        "data": args.data, "m": ms, "alpha": alphas,
        "p": args.p, "q": args.q,
        "min_neighborhood_size": args.min_neighborhood_size,
        "baseline_ordering": baseline_order.ordering_key.value,
    })
    if not args.no_plot:
        from . import plotting
        key = "realized_discovered" if result.evicted is not None else "expected_discovered"
        plotting.plot_discovered(rows, _out_path(args, "evaluation.png"),
                                 value_key=key, ylabel="discovered evictions")
    print(f"wrote {csv_path} ({len(rows)} rows)")


def _cmd_calibrate_scores(args, parser):
    result = _load(args)
    if result.evicted is None:
        parser.error("calibrate-scores needs the evicted column")
    scores = result.model.risk_scores
    outcomes = result.evicted
    platt = platt_scaling(scores, outcomes)
    isotonic = isotonic_regression(scores, outcomes)
    for name, cal in (("platt", platt), ("isotonic", isotonic)):
        path = _out_path(args, f"calibrator_{name}.txt")
        with open(path, "w") as fh:
            fh.write(calibrator_to_text(cal))
    binning = EqualFrequency(args.bin_size)
    tables = {
        "raw": reliability_curve(scores, outcomes, binning),
        "platt": reliability_curve(platt(scores), outcomes, binning),
        "isotonic": reliability_curve(isotonic(scores), outcomes, binning),
    }
    csv_path = _out_path(args, "reliability_table.csv")
    write_csv(csv_path, ("method", "bin_index", "mean_predicted", "empirical_rate", "count"),
              [(method, b.bin_index, b.mean_predicted, b.empirical_rate, b.count)
               for method, bins in tables.items() for b in bins])
    _write_run_manifest(args, "calibrate-scores", {
        "data": args.data, "bin_size": args.bin_size,
        "min_neighborhood_size": args.min_neighborhood_size,
        "platt_slope": platt.slope, "platt_intercept": platt.intercept,
    })
    if not args.no_plot:
        from . import plotting
        plotting.plot_reliability(tables, _out_path(args, "reliability.png"))
    print(f"wrote {csv_path} and both calibrators")


def _cmd_utility(args, parser):
    result = _load(args)
    if result.evicted is None:
        parser.error("utility needs the evicted column to fit a calibrator")
    model, profile = result.model, result.profile
    scores = model.risk_scores
    if args.calibrator == "platt":
        calibrator = platt_scaling(scores, result.evicted)
    else:
        calibrator = isotonic_regression(scores, result.evicted)
    probs = calibrator(scores)
    baseline_order = _baseline_order(model, profile)
    hr_order = order_neighborhoods(model, OrderingKey.HIGH_RISK_COUNT)
    ms = args.m or [10]
    alphas = args.alpha or [3.0]
    reductions = args.reduction or [0.3, 0.5, 0.7]
    rows = []
    for m in ms:
        if m > model.num_neighborhoods:
            raise ValueError(f"--m {m} exceeds the {model.num_neighborhoods} retained neighborhoods")
        for alpha in alphas:
            cost_model = CostModel(inter_cost=alpha)
            budget = budget_for_neighborhoods(model, baseline_order, m, cost_model)
            plans = {
                "non_targeting": non_targeting(model, baseline_order, budget, cost_model),
                "hpt": hpt(model, hr_order, budget, cost_model),
                "tpt": tpt(model, budget, cost_model),
            }
            for reduction in reductions:
                scenario = InterventionScenario(reduction_fraction=reduction)
                for name, plan in plans.items():
                    rows.append({
                        "m": m, "alpha": alpha, "policy": name, "reduction": reduction,
                        "budget": budget,
                        "expected_reduction": expected_reduction(plan, probs, scenario),
                    })
    csv_path = _out_path(args, "utility.csv")
    write_csv(csv_path, ("M", "alpha", "policy", "reduction", "budget", "expected_reduction"),
              [(r["m"], r["alpha"], r["policy"], r["reduction"], r["budget"], r["expected_reduction"])
               for r in rows])
    _write_run_manifest(args, "utility", {
        "data": args.data, "m": ms, "alpha": alphas, "reduction": reductions,
        "calibrator": args.calibrator,
        "min_neighborhood_size": args.min_neighborhood_size,
    })
    if not args.no_plot:
        from . import plotting
        plotting.plot_utility(rows, _out_path(args, "utility.png"))
    print(f"wrote {csv_path} ({len(rows)} rows)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canvassim",
        description="Mallows-model canvassing simulation and policy evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="RENT-vs-phi sweep over alpha/M grids")
    _add_common(sim)
    _add_phi_args(sim)
    sim.add_argument("--neighborhoods", type=_positive_int, default=50)
    sim.add_argument("--properties-per", type=_positive_int, default=12)
    sim.add_argument("--fraction", type=_probability, default=0.2)
    sim.add_argument("--alpha", type=_alpha, action="append", help="inter-neighborhood cost, repeatable")
    sim.add_argument("--m", type=_positive_int, action="append", help="budget in neighborhoods, repeatable")
    sim.add_argument("--p", type=_probability, default=1.0)
    sim.add_argument("--q", type=_probability, default=0.0)
    sim.add_argument("--policy", choices=("hpt", "tpt"), default="hpt")
    sim.add_argument("--replicates", type=_positive_int, default=200)
    sim.set_defaults(func=_cmd_simulate)

    gini = sub.add_parser("gini-curve", help="Gini of High-Risk counts across dispersion values")
    _add_common(gini)
    _add_phi_args(gini)
    gini.add_argument("--neighborhoods", type=_positive_int, default=30)
    gini.add_argument("--properties-per", type=_positive_int, default=20)
    gini.add_argument("--fraction", type=_probability, default=0.2)
    gini.add_argument("--replicates", type=_positive_int, default=500,
                      help="Monte Carlo samples per grid point")
    gini.set_defaults(func=_cmd_gini_curve)

    cal = sub.add_parser("calibrate-phi", help="fit dispersion to an observed property table")
    cal.add_argument("data", help="property CSV path")
    _add_common(cal)
    _add_phi_args(cal)
    cal.add_argument("--properties-per", type=_positive_int, default=100,
                     help="uniform neighborhood size used in calibration simulations")
    cal.add_argument("--replicates", type=_positive_int, default=1000,
                     help="simulations per grid point")
    cal.add_argument("--min-neighborhood-size", type=_positive_int, default=30)
    cal.set_defaults(func=_cmd_calibrate_phi)

    ev = sub.add_parser("evaluate", help="compare policies on a property table")
    ev.add_argument("data", help="property CSV path")
    _add_common(ev)
    ev.add_argument("--alpha", type=_alpha, action="append")
    ev.add_argument("--m", type=_positive_int, action="append")
    ev.add_argument("--p", type=_probability, default=None)
    ev.add_argument("--q", type=_probability, default=None)
    ev.add_argument("--min-neighborhood-size", type=_positive_int, default=30)
    ev.set_defaults(func=_cmd_evaluate)

    cs = sub.add_parser("calibrate-scores", help="Platt/isotonic calibration and reliability table")
    cs.add_argument("data", help="property CSV path (needs the evicted column)")
    _add_common(cs)
    cs.add_argument("--bin-size", type=_positive_int, default=30,
                    help="equal-frequency reliability bin size")
    cs.add_argument("--min-neighborhood-size", type=_positive_int, default=30)
    cs.set_defaults(func=_cmd_calibrate_scores)

    ut = sub.add_parser("utility", help="expected eviction reductions per policy and scenario")
    ut.add_argument("data", help="property CSV path (needs the evicted column)")
    _add_common(ut)
    ut.add_argument("--alpha", type=_alpha, action="append")
    ut.add_argument("--m", type=_positive_int, action="append")
    ut.add_argument("--reduction", type=_probability, action="append",
                    help="relative eviction-probability reduction, repeatable")
    ut.add_argument("--calibrator", choices=("platt", "isotonic"), default="isotonic")
    ut.add_argument("--min-neighborhood-size", type=_positive_int, default=30)
    ut.set_defaults(func=_cmd_utility)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args, parser)
    except (OSError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
