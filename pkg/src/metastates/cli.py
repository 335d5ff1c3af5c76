"""Command line interface: solve, metastate, scan, simulate, plotdata.

Exit status: 0 success, 2 invalid input, 3 non-degeneracy violation,
4 enumeration budget exceeded, 5 solver non-convergence.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import transitions
from .config import RunConfig, apply_override, build_model, dump_config, load_config, validate_config
from .exceptions import (
    BudgetExceeded,
    NonDegeneracy1Violation,
    NonDegeneracy2Violation,
    SolverDidNotConverge,
    ValidationError,
)
from .free_energy import solve
from .metastate import build_metastate_report
from .simulator import empirical_weights

EXIT_VALIDATION = 2
EXIT_NONDEGENERACY = 3
EXIT_BUDGET = 4
EXIT_NONCONVERGENCE = 5

logger = logging.getLogger("metastates")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _join(values):
    return ";".join(repr(float(v)) for v in np.ravel(values))


def cmd_solve(cfg, out, workers=1):
    """Find all free-energy minimizers."""
    model = build_model(cfg.model)
    result = solve(model, cfg.solver_options())
    spins = [str(s) for s in model.spin_alphabet]
    header = ["index", "global", "phi", "residual", "hessian_min_eigenvalue"]
    header += [f"nu[{s}]" for s in spins] + ["hessian_spectrum"]
    rows = []
    for j, m in enumerate(result.minimizers):
        rows.append([j, int(m.is_global), m.phi_value, m.fixed_point_residual,
                     m.hessian_min_eigenvalue, *m.total_measure, _join(m.hessian_eigenvalues)])
    _write_csv(out / "minimizers.csv", header, rows)
    print(f"{len(result.minimizers)} local minimizers "
          f"({len(result.global_minimizers)} global, {len(result.saddles)} saddles, "
          f"{result.n_failed} failed starts)")
    for j, m in enumerate(result.minimizers):
        tag = "*" if m.is_global else " "
        nu = ", ".join(f"{x:.6f}" for x in m.total_measure)
        print(f"{tag} {j}: nu=({nu}) phi={m.phi_value:.12g} "
              f"min_eig={m.hessian_min_eigenvalue:.4g} residual={m.fixed_point_residual:.2e}")
    return result


def cmd_metastate(cfg, out, workers=1):
    """Stability vectors, visibility and metastate weights."""
    model = build_model(cfg.model)
    result = solve(model, cfg.solver_options())
    w = cfg.weights
    report = build_metastate_report(
        model, result.minimizers, samples=w.samples, seed=w.seed,
        lp_tolerance=w.lp_tolerance, pair_tolerance=w.pair_tolerance, workers=workers,
    )
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "summary.txt").write_text(report.summary(), encoding="utf-8")
    rows = []
    for j in range(len(report.minimizers)):
        exact = "" if report.exact_weights is None else report.exact_weights[j]
        rows.append([j, int(report.visibility.entries[j].visible), report.weights.weights[j],
                     report.weights.stderr[j], int(report.weights.counts[j]), exact,
                     _join(report.minimizers[j].total_measure),
                     _join(report.stability_vectors[j])])
    _write_csv(out / "weights.csv",
               ["state", "visible", "weight", "stderr", "count", "exact_weight",
                "total_measure", "stability_vector"], rows)
    sys.stdout.write(report.summary())
    return report


def _scan_points(cfg):
    m, s = cfg.model, cfg.scan
    if m.family == "quadratic-potts":
        axes = ("beta", "B")
    else:
        axes = ("beta", "field")
    if s.axis not in axes:
        raise ValidationError(f"scan axis for {m.family} must be one of {axes}, got {s.axis!r}")
    other = s.other_axis or next(a for a in axes if a != s.axis)
    if other not in axes or other == s.axis:
        raise ValidationError(f"other_axis must be the remaining axis of {axes}")
    if s.other_values:
        values = list(s.other_values)
    elif other == "beta":
        values = [m.beta]
    elif other == "B":
        values = [m.B]
    else:
        values = [max(abs(h) for h in m.fields)]
    return other, values


def cmd_scan(cfg, out, workers=1):
    """Locate first-order coexistence by bisection."""
    m, s = cfg.model, cfg.scan
    other, values = _scan_points(cfg)
    rows = []
    for v in values:
        if m.family == "quadratic-potts":
            if s.axis == "beta":
                gap = lambda x, v=v: transitions.potts_gap(m.q, x, v)  # noqa: E731
            else:
                gap = lambda x, v=v: transitions.potts_gap(m.q, v, x)  # noqa: E731
            x = transitions.bisect_sign_change(gap, s.lower, s.upper, s.tolerance)
        else:
            coeffs = m.coefficients if m.family == "general-ising" else None
            x = transitions.ising_coexistence(s.axis, v, s.lower, s.upper, s.tolerance, coeffs)
        rows.append([m.family, other, v, s.axis, x, s.tolerance])
        print(f"{other}={v!r}: coexistence {s.axis}={x!r}")
    _write_csv(out / "scan.csv",
               ["family", "other_axis", "other_value", "axis", "coexistence", "tolerance"], rows)
    return rows


def cmd_simulate(cfg, out, workers=1):
    """Empirical weights from exact finite-volume Gibbs measures."""
    model = build_model(cfg.model)
    result = solve(model, cfg.solver_options())
    states = result.global_minimizers
    sim = cfg.simulate
    rows, draw_rows, estimates = [], [], []
    for n in sim.n:
        est = empirical_weights(model, states, n, sim.samples, epsilon=sim.epsilon,
                                dominance_threshold=sim.threshold, seed=sim.seed,
                                workers=workers, budget=sim.budget)
        estimates.append(est)
        for j, st in enumerate(states):
            rows.append([n, j, _join(st.total_measure), est.frequencies[j], est.stderr[j],
                         est.n_samples, est.epsilon])
        rows.append([n, "unresolved", "", est.unresolved, "", est.n_samples, est.epsilon])
        for r in est.records:
            draw_rows.append([n, r.index, r.seed, _join(r.pi_hat), _join(r.masses), r.attribution])
        freqs = ", ".join(f"{f:.4f}" for f in est.frequencies)
        print(f"n={n}: frequencies=({freqs}) unresolved={est.unresolved:.4f} "
              f"epsilon={est.epsilon:.4g}")
    _write_csv(out / "simulate.csv",
               ["n", "state", "total_measure", "frequency", "stderr", "draws", "epsilon"], rows)
    _write_csv(out / "simulate_draws.csv",
               ["n", "draw", "seed", "pi_hat", "ball_masses", "attribution"], draw_rows)
    return estimates


def cmd_plotdata(cfg, out, workers=1):
    """Reduced free-energy curve for plotting."""
    m, p = cfg.model, cfg.plot
    rows = []
    if m.family == "quadratic-potts":
        x, values, minima = transitions.phi_curve_potts(m.q, m.beta, m.B, p.points, p.u_max)
    else:
        coeffs = np.asarray(m.coefficients if m.family == "general-ising" else [0.0, 0.0, -0.5])
        poly = np.polynomial.Polynomial(m.beta * coeffs)
        pi = m.pi or [1.0] * len(m.fields)
        pi = list(np.asarray(pi) / np.sum(pi))
        x = np.linspace(-p.u_max, p.u_max, p.points)
        values = transitions.phi_reduced_ising(poly, poly.deriv(), m.fields, pi, x)
        base = transitions.phi_reduced_ising(poly, poly.deriv(), m.fields, pi, 0.0)
        values = values - base
        grid_min = [i for i in range(1, len(x) - 1)
                    if values[i] <= values[i - 1] and values[i] <= values[i + 1]]
        minima = [transitions.OrderParameterMinimum(float(x[i]), float(values[i]))
                  for i in grid_min]
    rows.extend(["curve", xi, vi] for xi, vi in zip(x, values))
    rows.extend(["minimum", mn.location, mn.value] for mn in minima)
    _write_csv(out / "phi_curve.csv", ["kind", "order_parameter", "phi"], rows)
    for mn in minima:
        print(f"minimum at {mn.location:.8f}: phi={mn.value:.3e}")
    return rows


COMMANDS = {
    "solve": cmd_solve,
    "metastate": cmd_metastate,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "plotdata": cmd_plotdata,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metastates",
        description="Metastates of disordered mean-field spin models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        p.add_argument("config_path", nargs="?", help="configuration file")
        p.add_argument("--config", dest="config_flag", help="configuration file")
        p.add_argument("--seed", type=int, help="seed for solver starts, weights and draws")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--dump-config", action="store_true",
                       help="print the resolved configuration and exit")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration entry (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser



def resolve_config(args):
    path = args.config_flag or args.config_path
    if args.config_flag and args.config_path and args.config_flag != args.config_path:
        raise ValidationError("give the configuration either positionally or with --config")
    cfg = load_config(path) if path else RunConfig()
    for assignment in args.set:
        apply_override(cfg, assignment)
    if args.seed is not None:
        cfg.solver.seed = cfg.weights.seed = cfg.simulate.seed = args.seed
    return validate_config(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return 0
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, workers=args.workers)
    except (NonDegeneracy1Violation, NonDegeneracy2Violation) as exc:
        print(f"non-degeneracy violation: {exc}", file=sys.stderr)
        return EXIT_NONDEGENERACY
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SolverDidNotConverge as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValidationError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
