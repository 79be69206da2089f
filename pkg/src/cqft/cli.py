"""Command-line entry point: subcommand dispatch, CSV/JSON/figure emission.

Every run is determined by (flags, seed); reports land in the output
directory (flag --out, or the CQFT_OUT_DIR environment variable) as JSON
plus CSV, with matplotlib figures rendered next to them unless suppressed.
"""

import argparse
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance, cluster, config, forests, levyarea, plots, powercount, \
    rgflow, reporting, scales, wick

DEFAULT_OUT = "cqft-out"


def _outdir(args):
    out = Path(args.out or os.environ.get("CQFT_OUT_DIR", DEFAULT_OUT))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(out, name, checks, seed, figures=()):
    doc = reporting.report_document(checks, seed=seed,
                                    meta={"figures": [str(f) for f in figures]})
    reporting.write_json(out / f"{name}.json", doc)
    reporting.write_csv(out / f"{name}.csv", reporting.CHECKS_CSV_HEADER,
                        reporting.checks_csv_rows(checks))
    for line in reporting.summary_lines(checks):
        print(line)
    return 0 if doc["passed"] else 1


def cmd_bkar_check(args):
    out = _outdir(args)
    rng = np.random.default_rng(args.seed)
    verdicts = []
    types = None
    if args.variant == 2:
        types = tuple(2 if i >= max(1, args.n - 2) else 1 for i in range(args.n))
    objects = forests.ObjectSet(args.n, types=types)
    for trial in range(args.trials):
        z = forests.random_functional(objects, rng, max_degree=args.degree,
                                      skip_type2_pairs=args.variant == 2)
        got = forests.bkar_evaluate(objects, z, variant=args.variant)
        want = z.at_one()
        verdicts.append({"trial": trial, "exact": got == want,
                         "forest_sum": str(got), "direct": str(want)})
    doc = {"schema": reporting.SCHEMA, "command": "bkar-check",
           "n": args.n, "variant": args.variant, "seed": args.seed,
           "passed": all(v["exact"] for v in verdicts), "trials": verdicts}
    reporting.write_json(out / "bkar-check.json", doc)
    n_forests = sum(1 for _ in forests.enumerate_forests(objects)) \
        if args.variant == 1 else sum(1 for _ in forests.enumerate_restricted_forests(objects))
    print(f"bkar-check: n={args.n} variant={args.variant} forests={n_forests} "
          f"-> {'pass' if doc['passed'] else 'FAIL'} ({args.trials} trials)")
    return 0 if doc["passed"] else 1


def cmd_wick_check(args):
    out = _outdir(args)
    rng = np.random.default_rng(args.seed)
    rows = []
    ok = True
    for trial in range(args.trials):
        a = rng.standard_normal((args.size, args.size))
        cov = (a @ a.T + np.eye(args.size)).tolist()
        idx = [int(i) for i in rng.integers(0, args.size, size=args.order)]
        moment = float(wick.wick_moment(cov, idx))
        bound = wick.wick_bound(cov, idx, K=1.0)
        est, err = wick.mc_moment(cov, idx, args.mc_samples,
                                  seed=int(rng.integers(2 ** 31)))
        agree = abs(est - moment) <= 5 * err and bound >= abs(moment)
        ok = ok and agree
        rows.append([trial, moment, bound, est, err, "pass" if agree else "FAIL"])
    reporting.write_csv(out / "wick-check.csv",
                        ["trial", "moment", "bound", "mc_estimate", "stderr", "status"],
                        rows)
    print(f"wick-check: {args.trials} trials -> {'pass' if ok else 'FAIL'} "
          f"(csv: {out / 'wick-check.csv'})")
    return 0 if ok else 1


def cmd_powercount(args):
    theory = powercount.load_theory_file(args.theory)
    print(f"theory {theory.name or '(unnamed)'}: D={theory.D} tau={theory.tau}")
    for name, parity in theory.scan:
        print(f"  degree table for external {name} ({parity} multiplicities):")
        step = 2 if parity == "even" else 1
        for n in range(step, 9, step):
            omega = powercount.superficial_degree(theory, {name: n})
            star = powercount.renormalized_degree(omega, theory.tau)
            print(f"    legs={n:<2d} omega={str(omega):<10s} subtracted={star}")
    try:
        print(f"  max divergent legs + 1: {powercount.n_ext_max(theory)}")
    except ValueError as exc:
        print(f"  leg scan: {exc}")
    for coupling, members in theory.vertices:
        hm = powercount.high_momentum_condition(theory, members)
        print(f"  vertex {coupling}: high-momentum partial sums "
              f"{[str(s) for s in hm.partial_sums]} -> "
              f"{'pass' if hm.passed else 'fail'}")
    if args.diagram:
        diagram = powercount.load_diagram_file(args.diagram)
        rep = powercount.classify_quasi_local(diagram, theory)
        print(f"diagram: internal={len(diagram.internal)} external={len(diagram.external)}")
        print(f"  i={rep.i_gamma} e={rep.e_gamma} height={rep.height} "
              f"omega={rep.omega} quasi-local={rep.is_quasi_local} "
              f"dangerous={rep.dangerous}")
        exponent = powercount.amplitude_exponent(diagram, theory,
                                                 renormalized=args.renormalized)
        mode = "renormalized" if args.renormalized else "bare"
        print(f"  {mode} amplitude exponent (log_M): {exponent}")
    return 0


def cmd_cluster_demo(args):
    out = _outdir(args)
    if args.two_scale:
        report = cluster.two_scale_demo(n_top=args.cubes, order=args.order,
                                        seed=args.seed)
        reporting.write_json(out / "cluster-demo.json", report)
        print(f"two-scale demo -> {'pass' if report['all_exact'] else 'FAIL'} "
              f"({out / 'cluster-demo.json'})")
        return 0 if report["all_exact"] else 1
    interaction = cluster.Interaction(((4, Fraction(1)),))
    lattice = cluster.CubeLattice.ring(args.cubes)
    expansion = cluster.horizontal_expand(lattice, interaction, args.order)
    est = cluster.partition_function(lattice, interaction, args.lam,
                                     truncation_order=args.order,
                                     mc_samples=args.mc_samples, seed=args.seed)
    fe = cluster.free_energy_extensivity(range(3, args.cubes + 1), interaction,
                                         args.lam, order=min(args.order, 3))
    report = {
        "schema": reporting.SCHEMA,
        "cubes": args.cubes,
        "order": args.order,
        "lambda": args.lam,
        "identity_exact": expansion.identity_holds(),
        "identity_residuals": [str(a - b) for a, b in
                               zip(expansion.direct_coeffs, expansion.forest_sums)],
        "series_coeffs": [str(c) for c in expansion.direct_coeffs],
        "partition_series": est.series_value,
        "partition_mc": est.mc_value,
        "partition_mc_stderr": est.mc_stderr,
        "top_order_forest_terms": {
            str(edges): str(val)
            for edges, val in sorted(expansion.per_forest[-1].items())[:40]
        },
        "free_energy_per_cube": fe.per_cube,
        "free_energy_sizes": fe.sizes,
    }
    reporting.write_json(out / "cluster-demo.json", report)
    print(f"cluster-demo: identity {'exact' if report['identity_exact'] else 'BROKEN'}, "
          f"Z_series={est.series_value:.6f}"
          + (f", Z_mc={est.mc_value:.6f}+-{est.mc_stderr:.1e}" if est.mc_value else ""))
    return 0 if report["identity_exact"] else 1


def cmd_rgflow(args):
    out = _outdir(args)
    figures = []
    if args.model == "phi4":
        state = rgflow.flow_phi4(args.lambda0, c=args.c, steps=args.steps)
        _, dz = rgflow.flow_counterterms(state, c_m=args.c, c_z=args.c)
        rows = [(j, state.lambdas[j], state.delta_m2(j), dz[j])
                for j in range(0, len(state.lambdas), max(1, args.steps // 2000))]
        reporting.write_csv(out / "rgflow-phi4.csv",
                            ["j", "lambda", "delta_m2", "delta_z3"], rows)
        if not args.no_figures:
            figures.append(plots.plot_flow(state, out / "rgflow-phi4.png"))
        print(f"phi4 flow: asymptotic ratio {state.asymptotic_ratio():.4f} "
              f"(csv: {out / 'rgflow-phi4.csv'})")
    else:
        flow = rgflow.rough_mass_flow(args.alpha, args.lambda0, args.rho)
        rows = [(j, flow.b[j], flow.delta_m[j]) for j in range(args.rho + 1)]
        reporting.write_csv(out / "rgflow-rough.csv", ["j", "b_j", "delta_m"], rows)
        print(f"rough mass flow: delta_m(0)/M^(rho(1-4a)) = "
              f"{flow.mass_scale_ratio():.4f} (csv: {out / 'rgflow-rough.csv'})")
    return 0


def cmd_domination(args):
    out = _outdir(args)
    lams = tuple(args.sweep) if args.sweep else (1e-2, 1e-3, 1e-4)
    kinds = [args.kind] if args.kind != "all" else \
        ["phi4", "sigma-boundary", "sigma-mass"]
    reports = [rgflow.domination_check(k, lams=lams, kappa=args.kappa)
               for k in kinds]
    rows = [(r.kind, r.measured_slope, r.claimed_slope, r.slope_error)
            for r in reports]
    reporting.write_csv(out / "domination.csv",
                        ["kind", "measured_slope", "claimed_slope", "abs_error"],
                        rows)
    if not args.no_figures:
        plots.plot_domination(reports, out / "domination.png")
    ok = all(r.slope_error <= 0.02 * abs(r.claimed_slope) for r in reports)
    for r in reports:
        print(f"domination {r.kind}: slope {r.measured_slope:.4f} "
              f"(claimed {r.claimed_slope:.4f})")
    return 0 if ok else 1


def cmd_levy(args):
    out = _outdir(args)
    figures = []
    lo, hi = (int(p) for p in args.levels.split(":"))
    if args.renormalized:
        report = levyarea.renormalized_area_experiment(
            args.alpha, args.lam, rhos=range(max(4, args.rho - 8), args.rho + 1))
        rows = list(zip(report.separations, report.increment_variances))
        reporting.write_csv(out / "levy-renormalized.csv",
                            ["delta", "increment_variance"], rows)
        if not args.no_figures:
            figures.append(plots.plot_increment_variance(
                report, out / "levy-renormalized.png"))
        doc = {"schema": reporting.SCHEMA, "alpha": args.alpha, "lambda": args.lam,
               "rho": args.rho, "fitted_exponent": report.fitted_exponent,
               "expected_exponent": 4 * args.alpha,
               "lambda_scaling_exact": report.lambda_scaling_exact}
        reporting.write_json(out / "levy-renormalized.json", doc)
        print(f"renormalized area: exponent {report.fitted_exponent:.4f} "
              f"(target {4 * args.alpha})")
        return 0
    results = levyarea.coutin_qian_scan([args.alpha], levels=range(lo, hi + 1),
                                        n_samples=args.ensemble, seed=args.seed,
                                        n_log2=args.grid_log2)
    res = results[args.alpha]
    rows = list(zip(res.levels, res.variances, res.stderrs))
    reporting.write_csv(out / "levy-variance.csv",
                        ["level", "variance", "stderr"], rows)
    if not args.no_figures:
        figures.append(plots.plot_cq(results, out / "levy-variance.png"))
    doc = {"schema": reporting.SCHEMA, "alpha": args.alpha, "seed": args.seed,
           "levels": list(res.levels), "slope": res.slope,
           "refinement_ratio": res.refinement_ratio, "cauchy": res.cauchy}
    reporting.write_json(out / "levy-summary.json", doc)
    print(f"levy alpha={args.alpha}: slope {res.slope:.3f}, "
          f"refinement ratio {res.refinement_ratio:.3f} "
          f"({'Cauchy' if res.cauchy else 'divergent'})")
    return 0


def cmd_scales(args):
    out = _outdir(args)
    cfg = config.load_config(args.config)["scales"] if args.config \
        else config.ScalesConfig()
    system = cfg.system()
    partition = scales.build_partition(system, cfg.bump())
    beta = cfg.resolved_beta()
    density_exponent = 1 - 2 * beta   # |xi|^-(D-2 beta) at D=1
    sliced = scales.slice_covariance(
        partition, scales.power_law_density(density_exponent), beta)
    reporting.write_csv(out / "partition.csv", ["j", "xi", "value"],
                        scales.export_partition_rows(partition))
    reporting.write_csv(out / "slices.csv", ["j", "x", "value"],
                        scales.export_slice_rows(sliced))
    if not args.no_figures:
        plots.plot_partition(partition, out / "partition.png")
        plots.plot_slices(sliced, out / "slices.png")
    _, resid = partition.residual_on_grid()
    tel = sliced.telescoping_residual()
    print(f"scales: density exponent {density_exponent}, partition residual "
          f"{resid.max():.2e}, telescoping {tel:.2e} (csv in {out})")
    return 0


def cmd_paper_tour(args):
    out = _outdir(args)
    start = time.time()
    checks = acceptance.run_all(seed=args.seed, fast=args.fast)
    figures = []
    if not args.no_figures:
        system = scales.ScaleSystem(M=2.0, j_min=0, j_max=10,
                                    grid=scales.Grid1D(4096, 1.0 / 512))
        partition = scales.build_partition(system)
        figures.append(plots.plot_partition(partition, out / "partition.png"))
        sliced = scales.slice_covariance(partition, scales.power_law_density(1.6),
                                         beta=-0.3)
        figures.append(plots.plot_slices(sliced, out / "slices.png"))
        bubbles = [powercount.numeric_bubble_scaling(a, range(6, 15))
                   for a in (0.10, 0.15, 0.20, 0.30)]
        figures.append(plots.plot_bubble(bubbles, out / "bubble.png"))
        state = rgflow.flow_phi4(0.1, steps=2000)
        rgflow.flow_counterterms(state)
        figures.append(plots.plot_flow(state, out / "rgflow.png"))
        doms = [rgflow.domination_check("phi4", kappa=0.3),
                rgflow.domination_check("sigma-boundary")]
        figures.append(plots.plot_domination(doms, out / "domination.png"))
        props = [rgflow.renormalized_sigma_propagator(1.0, rho, 1.0, 0.15)
                 for rho in range(4, 21)]
        figures.append(plots.plot_sigma_propagator(props, out / "sigma.png"))
    status = _write_report(out, "paper-tour", checks, args.seed, figures)
    print(f"paper-tour: wrote {out / 'paper-tour.json'} "
          f"({time.time() - start:.1f}s, exit {status})")
    return status


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cqft",
        description="Desk-scale toolkit for scale decompositions, forest "
                    "formulas, cluster expansions, Wick calculus, discrete "
                    "renormalization flows and Levy-area experiments.")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default ${{CQFT_OUT_DIR}} or ./{DEFAULT_OUT})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bkar-check", help="forest-interpolation identity trials")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--variant", type=int, choices=(1, 2), default=1)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.set_defaults(func=cmd_bkar_check)

    p = sub.add_parser("wick-check", help="moments vs Monte Carlo and bounds")
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--mc-samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.set_defaults(func=cmd_wick_check)

    p = sub.add_parser("powercount", help="degree tables and diagram exponents")
    p.add_argument("--theory", required=True)
    p.add_argument("--diagram", default=None)
    p.add_argument("--renormalized", action="store_true")
    p.set_defaults(func=cmd_powercount)

    p = sub.add_parser("cluster-demo", help="expansion identities on a toy lattice")
    p.add_argument("--cubes", type=int, default=4)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--mc-samples", type=int, default=50_000)
    p.add_argument("--two-scale", action="store_true")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.set_defaults(func=cmd_cluster_demo)

    p = sub.add_parser("rgflow", help="discrete flow trajectories")
    p.add_argument("--model", choices=("phi4", "rough"), default="phi4")
    p.add_argument("--lambda0", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--rho", type=int, default=12)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_rgflow)

    p = sub.add_parser("domination", help="scalar domination slope sweeps")
    p.add_argument("--kind", choices=("phi4", "sigma-boundary", "sigma-mass", "all"),
                   default="all")
    p.add_argument("--kappa", type=float, default=0.3)
    p.add_argument("--sweep", type=float, nargs="*", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_domination)

    p = sub.add_parser("levy", help="dyadic area variances and regularity")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--levels", default="3:11")
    p.add_argument("--ensemble", type=int, default=200)
    p.add_argument("--grid-log2", type=int, default=14)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--renormalized", action="store_true")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--rho", type=int, default=16)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_levy)

    p = sub.add_parser("scales", help="export partition and slice kernels")
    p.add_argument("--config", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("paper-tour", help="run the full acceptance suite")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--fast", action="store_true",
                   help="reduced ensembles (wider statistical intervals)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_paper_tour)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
