"""Command-line interface.

Subcommands: solve, evaluate, compare, simulate-frequency, export-conic.
Exit codes: 0 converged/ok, 1 usage or data error, 2 iteration/gap limit
hit, 3 infeasible model.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import drcc, evaluation, gasnet, scheduler
from .instance import InstanceError, load_instance
from .optmodel import ModelError, SolveOptions, export_conic
from .scheduler import InfeasibleModelError, ModelVariant, SchedulerError

VARIANT_ALIASES = {
    "saa": "saa", "dr-m": "dr_m", "dr-u": "dr_u", "dr-m-i": "dr_m_i",
    "dr-u-i": "dr_u_i", "no-fc": "no_fc", "no-ngs": "no_ngs", "no-vi": "no_vi",
}


def _variant_kind(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in VARIANT_ALIASES:
        raise SchedulerError(f"unknown variant {name!r}; choose from "
                             f"{sorted(VARIANT_ALIASES)}")
    return VARIANT_ALIASES[key]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True,
                   help="path to an instance JSON file")
    p.add_argument("--config", default=None,
                   help="JSON file with defaults for any flag (flag wins)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=7, help="scenario RNG seed")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", default="dr-m",
                   help="scheduling model: saa, dr-m, dr-u, dr-m-i, dr-u-i, "
                        "no-fc, no-ngs, no-vi")
    p.add_argument("--epsilon", type=float, default=None,
                   help="joint violation budget in (0,1); instance value if unset")
    p.add_argument("--eps-individual", type=float, default=None,
                   help="per-constraint budget for the individual variants")
    p.add_argument("--samples", type=int, default=20,
                   help="SAA in-sample scenario count")
    p.add_argument("--eps-gap", type=float, default=1e-3,
                   help="Weymouth relaxation gap tolerance (relative)")
    p.add_argument("--rho0", type=float, default=0.02,
                   help="initial slack penalty weight")
    p.add_argument("--rho-max", type=float, default=1000.0,
                   help="slack penalty cap")
    p.add_argument("--penalty-growth", type=float, default=1.5,
                   help="slack penalty growth factor per iteration")
    p.add_argument("--max-iter", type=int, default=50,
                   help="sequential-loop iteration cap")
    p.add_argument("--mip-gap", type=float, default=0.01,
                   help="relative MIP gap passed to the backend")
    p.add_argument("--time-limit", type=float, default=None,
                   help="per-MILP time limit in seconds")
    p.add_argument("--backend", default=os.environ.get("DRFCUC_BACKEND"),
                   help="MILP backend name (default scipy/HiGHS)")


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        defaults = json.load(fh)
    for key, val in defaults.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise InstanceError(f"config key {key!r} is not a known flag")
        default = parser.get_default(attr)
        if getattr(args, attr) == default:
            setattr(args, attr, val)


def _pccp_params(args) -> gasnet.PccpParams:
    return gasnet.PccpParams(eps_gap=args.eps_gap, penalty_init=args.rho0,
                             penalty_max=args.rho_max,
                             penalty_growth=args.penalty_growth,
                             max_iter=args.max_iter)


def _solve_options(args) -> SolveOptions:
    return SolveOptions(mip_gap=args.mip_gap, time_limit=args.time_limit,
                        backend=args.backend)


def _variant(args) -> ModelVariant:
    return ModelVariant(kind=_variant_kind(args.variant), epsilon=args.epsilon,
                        eps_individual=args.eps_individual,
                        sample_size=args.samples, scenario_seed=args.seed)


def cmd_solve(args, parser) -> int:
    _apply_config(args, parser)
    instance = load_instance(args.instance)
    variant = _variant(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        sol = scheduler.run_algorithm1(instance, variant,
                                       params=_pccp_params(args),
                                       options=_solve_options(args),
                                       verbose=args.verbose)
    except InfeasibleModelError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    sol_path = outdir / "solution.json"
    sol.save(sol_path)
    gasnet.write_pccp_trace(sol.pccp, outdir / "pccp_trace.csv")
    print(f"status={sol.status} cost={sol.objective:.2f} "
          f"iterations={sol.iterations} -> {sol_path}")
    return 0 if sol.status == "converged" else 2


def cmd_evaluate(args, parser) -> int:
    _apply_config(args, parser)
    instance = load_instance(args.instance)
    sol = scheduler.load_solution(args.solution)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    truth = drcc.ambiguity_from_instance(instance)
    out_set = drcc.generate_scenarios(
        truth.mean, truth.std, instance.capacities(), args.out_samples,
        seed=args.seed, provenance="out-of-sample")
    ejvp = evaluation.compute_ejvp(sol, out_set,
                                   [w.wid for w in instance.wind_farms])
    audits = evaluation.audit_frequency(sol, instance)
    report = {
        "variant": sol.variant,
        "total_cost": sol.objective,
        "cost_breakdown": sol.cost_breakdown,
        "ejvp_pct": ejvp,
        "out_samples": args.out_samples,
        "frequency_pass": all(a.ok for a in audits),
        "failing_hours": [a.hour for a in audits if not a.ok],
    }
    if args.gas_audit:
        verdict = evaluation.audit_gas_feasibility(sol, instance,
                                                   params=_pccp_params(args))
        report["gas_audit"] = {"status": verdict.status,
                               "total_slack": verdict.total_slack,
                               "slack_by_node": verdict.slack_by_node}
    evaluation.write_hourly_csv(audits, outdir / "frequency_audit.csv")
    with open(outdir / "evaluation.json", "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    print(json.dumps(report, indent=1))
    return 0


def cmd_compare(args, parser) -> int:
    _apply_config(args, parser)
    instance = load_instance(args.instance)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    variants = [ModelVariant(kind=_variant_kind(v), epsilon=args.epsilon,
                             scenario_seed=args.seed)
                for v in args.variants.split(",") if v.strip()]
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    reports = evaluation.compare_variants(
        instance, variants, sizes, out_sample_size=args.out_samples,
        seed=args.seed, pccp=_pccp_params(args), options=_solve_options(args),
        use_estimated_moments=not args.true_moments, verbose=args.verbose)
    table = evaluation.render_table(reports)
    evaluation.reports_to_json(reports, outdir / "comparison.json")
    with open(outdir / "comparison.txt", "w") as fh:
        fh.write(table + "\n")
    print(table)
    return 0


def cmd_simulate_frequency(args, parser) -> int:
    _apply_config(args, parser)
    instance = load_instance(args.instance)
    sol = scheduler.load_solution(args.solution)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    audits = evaluation.audit_frequency(sol, instance, dt=args.dt,
                                        horizon=args.horizon)
    evaluation.write_hourly_csv(audits, outdir / "frequency_by_hour.csv")
    if args.hour is not None:
        snap = evaluation.freq_snapshot(sol, instance, args.hour)
        traj = evaluation._simulate(snap, instance.frequency, args.dt,
                                    args.horizon)
        traj.write_csv(outdir / f"trajectory_h{args.hour}.csv")
        traj.write_metrics(outdir / f"metrics_h{args.hour}.json")
    print(f"audited {len(audits)} hours; "
          f"{sum(not a.ok for a in audits)} failing")
    return 0


def cmd_export_conic(args, parser) -> int:
    _apply_config(args, parser)
    instance = load_instance(args.instance)
    variant = _variant(args)
    assembled = scheduler.assemble(instance, variant)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{Path(args.instance).stem}_{variant.kind}.conic"
    export_conic(assembled.model, path)
    print(f"wrote {path} ({assembled.model.stats()})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drfcuc",
        description="Distributionally robust frequency-constrained unit "
                    "commitment for integrated electricity-gas systems. "
                    "Units: MW, MWh, Hz, s, kcf/h, MPa, $.")
    parser.add_argument("--verbose", action="store_true",
                        help="print solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one scheduling variant")
    _add_common(p)
    _add_solver(p)
    p.set_defaults(func=cmd_solve, _parser=p)

    p = sub.add_parser("evaluate", help="score a saved solution out of sample")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--solution", required=True, help="solution JSON from solve")
    p.add_argument("--out-samples", type=int, default=10_000,
                   help="out-of-sample scenario count")
    p.add_argument("--gas-audit", action="store_true",
                   help="also run the gas-side deliverability audit")
    p.set_defaults(func=cmd_evaluate, _parser=p)

    p = sub.add_parser("compare", help="run a variant/sample-size grid")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--variants", default="saa,dr-m,dr-u",
                   help="comma-separated variant list")
    p.add_argument("--sizes", default="20",
                   help="comma-separated in-sample sizes")
    p.add_argument("--out-samples", type=int, default=10_000,
                   help="shared out-of-sample scenario count")
    p.add_argument("--true-moments", action="store_true",
                   help="build DR sets from instance truth instead of "
                        "estimating moments from the in-sample pool")
    p.set_defaults(func=cmd_compare, _parser=p)

    p = sub.add_parser("simulate-frequency",
                       help="swing-equation audit of a saved solution")
    _add_common(p)
    p.add_argument("--solution", required=True, help="solution JSON from solve")
    p.add_argument("--hour", type=int, default=None,
                   help="also export this hour's full trajectory CSV")
    p.add_argument("--dt", type=float, default=1e-3,
                   help="integration step in seconds (max 1e-3)")
    p.add_argument("--horizon", type=float, default=40.0,
                   help="simulated window in seconds")
    p.set_defaults(func=cmd_simulate_frequency, _parser=p)

    p = sub.add_parser("export-conic",
                       help="write the assembled model in the conic "
                            "exchange format")
    _add_common(p)
    _add_solver(p)
    p.set_defaults(func=cmd_export_conic, _parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args._parser)
    except (InstanceError, SchedulerError, ModelError,
            drcc.UncertaintyError, evaluation.EvaluationError,
            FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
