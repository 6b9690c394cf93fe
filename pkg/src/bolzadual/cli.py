"""Command-line front end.

Commands: solve, dualize, check-duality, characteristics, qualify, sweep,
oracle.  Exit codes: 0 success, 1 usage or parse error, 2 verification
failure, 3 solver non-optimal.  With a fixed seed every CSV is
byte-identical across runs; figures are derived artifacts and every
figure-producing command writes the underlying CSV as well.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import svgplot
from .characteristics import build_characteristic, verify_characteristic
from .conjugacy import dual_lagrangian_eval, dual_terminal, dualize
from .errors import BolzaError, ProblemFileError
from .io import load_problem
from .oracle import dual_value_table, grid_value_dp
from .qualification import (check_control_qualification,
                            check_dual_strict_feasibility,
                            check_primal_strict_feasibility, FAILS)
from .solver import OPTIMAL, duality_certificate, solve_dual, solve_primal
from .tolerances import DEFAULT_SEED, DEFAULT_TOLS

F = ".17g"


def _fmt(v):
    return format(float(v), F)


def _parse_vector(text):
    return np.array([float(p) for p in text.split(",")], dtype=float)


def _parse_grid(text):
    axes = []
    for part in text.split(","):
        lo, hi, count = part.split(":")
        axes.append(np.linspace(float(lo), float(hi), int(count)))
    return axes


def _outdir(args):
    out = args.out or os.environ.get("BOLZADUAL_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _tols(args):
    overrides = {}
    for name in ("cert", "kkt", "feas", "ri", "sub", "grid", "num", "psd"):
        val = getattr(args, f"tol_{name}", None)
        if val is not None:
            overrides[name] = val
    return DEFAULT_TOLS.override(**overrides) if overrides else DEFAULT_TOLS


def _write_keyvalues(path, pairs):
    with open(path, "w", newline="") as fh:
        for key, val in pairs:
            if isinstance(val, float):
                val = _fmt(val)
            fh.write(f"{key}={val}\n")


def _write_trajectory_csv(path, tau, states, controls, costates,
                          ham=None, el=None):
    n = states[0].size if states else 0
    m = controls[0].size if controls else 0
    cols = (["t"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
            + [f"p{i}" for i in range(n)])
    if ham is not None:
        cols += ["hamResidual", "elResidual"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for k, t in enumerate(range(tau, tau + len(states))):
            row = [str(t)]
            row += [_fmt(v) for v in states[k]]
            if k < len(controls):
                row += [_fmt(v) for v in controls[k]]
            else:
                row += [""] * m
            row += [_fmt(v) for v in (costates[k] if costates else [])]
            if ham is not None:
                if 1 <= k <= len(ham):
                    row += [_fmt(ham[k - 1]), _fmt(el[k - 1])]
                else:
                    row += ["", ""]
            fh.write(",".join(row) + "\n")


def _cmd_solve(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    if args.eta is not None:
        eta = _parse_vector(args.eta)
        res = solve_dual(problem, args.tau, eta, tols)
        label = "dual"
    else:
        xi = _parse_vector(args.xi)
        res = solve_primal(problem, args.tau, xi, tols)
        label = "primal"
    csv_path = os.path.join(out, f"solve_{label}.csv")
    _write_trajectory_csv(csv_path, res.tau, res.states, res.controls,
                          res.costates)
    _write_keyvalues(os.path.join(out, f"solve_{label}.txt"), [
        ("side", label), ("status", res.status), ("value", res.value),
        ("kktResidual", res.kkt_residual),
        ("dynamicsResidual", res.dynamics_residual),
        ("unbounded", int(res.unbounded)),
    ])
    print(f"{label} solve: status={res.status} value={_fmt(res.value)} "
          f"-> {csv_path}")
    return 0 if res.status == OPTIMAL else 3


def _cmd_dualize(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    dual = dualize(problem, tols)
    n = problem.state_dim
    rng = np.random.default_rng(args.seed)
    probes = [np.zeros(2 * n)] + [rng.standard_normal(2 * n)
                                  for _ in range(24)]
    path = os.path.join(out, "dual_stage_probes.csv")
    with open(path, "w", newline="") as fh:
        cols = (["t"] + [f"p{i}" for i in range(n)]
                + [f"w{i}" for i in range(n)] + ["K"])
        fh.write(",".join(cols) + "\n")
        for t in range(problem.horizon):
            for z in probes:
                p, w = z[:n], z[n:]
                val = dual_lagrangian_eval(problem, t, p, w, tols)
                fh.write(",".join([str(t)] + [_fmt(v) for v in p]
                                  + [_fmt(v) for v in w]
                                  + [_fmt(val) if math.isfinite(val)
                                     else "inf"]) + "\n")
    fpath = os.path.join(out, "dual_terminal_probes.csv")
    with open(fpath, "w", newline="") as fh:
        fh.write(",".join([f"b{i}" for i in range(n)] + ["f"]) + "\n")
        for z in probes:
            b = z[:n]
            val = dual_terminal(problem, b, tols)
            fh.write(",".join([_fmt(v) for v in b]
                              + [_fmt(val) if math.isfinite(val) else "inf"])
                     + "\n")
    print(f"dual problem with {dual.horizon} stages -> {path}, {fpath}")
    return 0


def _cmd_check_duality(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    xi = _parse_vector(args.xi)
    eta = _parse_vector(args.eta)
    cert = duality_certificate(problem, args.tau, xi, eta, tols)
    pairs = [("tau", args.tau), ("theta", cert.theta), ("omega", cert.omega),
             ("gap", cert.gap), ("fyResidual", cert.fy_residual),
             ("transversalityResidual", cert.transversality_residual)]
    for k, r in enumerate(cert.el_residuals):
        pairs.append((f"elResidual[{k}]", r))
    path = os.path.join(out, "duality_certificate.txt")
    _write_keyvalues(path, pairs)
    ok = cert.passes(tols.cert)
    print(f"gap={_fmt(cert.gap)} ({'within' if ok else 'exceeds'} tolerance) "
          f"-> {path}")
    return 0 if ok else 2


def _cmd_characteristics(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    xi = _parse_vector(args.xi)
    eta = _parse_vector(args.eta)
    pair = build_characteristic(problem, args.tau, xi, eta, tols)
    csv_path = os.path.join(out, "characteristic.csv")
    _write_trajectory_csv(csv_path, pair.tau, pair.states, [], pair.costates,
                          ham=pair.ham_residuals, el=pair.el_residuals)
    if pair.states:
        verdict = verify_characteristic(problem, pair, eta, tols)
        passed = verdict.passed
        pairs = [("status", pair.status), ("gap", pair.gap),
                 ("passed", int(passed)), ("epsilon", verdict.epsilon),
                 ("fyGap", verdict.fy_gap),
                 ("transversalityResidual", verdict.transversality_residual),
                 ("message", verdict.message)]
    else:
        passed = False
        pairs = [("status", pair.status), ("gap", pair.gap), ("passed", 0),
                 ("message", "no trajectory pair")]
    path = os.path.join(out, "characteristic_verdict.txt")
    _write_keyvalues(path, pairs)
    print(f"characteristic: status={pair.status} -> {csv_path}")
    return 0 if passed else 2


def _cmd_qualify(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    reports = []
    cq_all = "Holds"
    for t, stage in enumerate(problem.stages):
        rep = check_control_qualification(stage, tols)
        if rep.verdict == FAILS:
            cq_all = "Fails"
        reports.append((f"CQ[stage {t}]", rep))
    h_rep = check_primal_strict_feasibility(problem, tols)
    hp_rep = check_dual_strict_feasibility(problem, tols)
    reports.append(("H", h_rep))
    reports.append(("H'", hp_rep))
    lines = []
    any_fail = cq_all == "Fails"
    witness_path = ""
    if h_rep.witness is not None and h_rep.verdict == "Holds":
        witness_path = os.path.join(out, "qualify_witness.csv")
        states, controls = h_rep.witness
        _write_trajectory_csv(witness_path, 0, states, controls, [])
    for name, rep in reports:
        if rep.verdict == FAILS:
            any_fail = True
        extra = f" witness={witness_path}" if (name == "H" and witness_path) else ""
        lines.append(f"{name} {rep.verdict} {rep.reason_code}{extra}")
    path = os.path.join(out, "qualification_report.txt")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 2 if any_fail else 0


def _cmd_sweep(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    axes = _parse_grid(args.grid)
    if len(axes) != problem.state_dim:
        print("sweep grid dimension must match the state dimension",
              file=sys.stderr)
        return 1
    if len(axes) == 1:
        points = [np.array([x]) for x in axes[0]]
    else:
        points = [np.array([a, b]) for a in axes[0] for b in axes[1]]

    def run(point):
        res = solve_primal(problem, args.tau, point, tols)
        return res.value if res.status == OPTIMAL else math.inf

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            values = list(pool.map(run, points))
    else:
        values = [run(p) for p in points]

    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        cols = [f"xi{i}" for i in range(len(axes))] + ["theta"]
        fh.write(",".join(cols) + "\n")
        for point, val in zip(points, values):
            cells = [_fmt(v) for v in point]
            cells.append(_fmt(val) if math.isfinite(val) else "inf")
            fh.write(",".join(cells) + "\n")
    svg_path = os.path.join(out, "sweep.svg")
    if len(axes) == 1:
        svgplot.line_plot(svg_path, axes[0], np.array(values),
                          title=f"value function at tau={args.tau}",
                          xlabel="xi", ylabel="theta")
    else:
        grid = np.array(values).reshape(axes[0].size, axes[1].size)
        svgplot.heatmap(svg_path, axes[0], axes[1], grid,
                        title=f"value function at tau={args.tau}")
    print(f"sweep over {len(points)} points -> {csv_path}, {svg_path}")
    return 0


def _cmd_oracle(args):
    problem = load_problem(args.problem)
    tols = _tols(args)
    out = _outdir(args)
    grid = _parse_grid(args.grid) if args.grid else None
    if grid is not None and problem.state_dim == 1:
        grid = grid[0]
    if args.dual:
        table = dual_value_table(problem, grid, tols)
        pattern = os.path.join(out, "omega_tau_{tau}.csv")
    else:
        table = grid_value_dp(problem, grid, tols)
        pattern = os.path.join(out, "theta_tau_{tau}.csv")
    paths = table.to_csv(pattern)
    print(f"wrote {len(paths)} value tables -> {paths[0]} ..")
    return 0


def _add_common(sub):
    sub.add_argument("--problem", required=True, help="problem JSON file")
    sub.add_argument("--out", default=None, help="output directory "
                     "(default: $BOLZADUAL_OUTDIR or CWD)")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    for name in ("cert", "kkt", "feas", "ri", "sub", "grid", "num", "psd"):
        sub.add_argument(f"--tol-{name}", type=float, default=None,
                         dest=f"tol_{name}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bolzadual",
        description="discrete-time convex Bolza duality toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("solve", help="solve the primal (or dual) problem")
    _add_common(p)
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--xi", default=None, help="initial state, comma-separated")
    p.add_argument("--eta", default=None,
                   help="solve the dual from this slope instead")
    p.set_defaults(func=_cmd_solve)

    p = subs.add_parser("dualize", help="probe the dual problem's data")
    _add_common(p)
    p.set_defaults(func=_cmd_dualize)

    p = subs.add_parser("check-duality", help="duality certificate for (xi, eta)")
    _add_common(p)
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--xi", required=True)
    p.add_argument("--eta", required=True)
    p.set_defaults(func=_cmd_check_duality)

    p = subs.add_parser("characteristics",
                        help="build and verify a Hamiltonian trajectory")
    _add_common(p)
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--xi", required=True)
    p.add_argument("--eta", required=True)
    p.set_defaults(func=_cmd_characteristics)

    p = subs.add_parser("qualify", help="decide the qualification conditions")
    _add_common(p)
    p.set_defaults(func=_cmd_qualify)

    p = subs.add_parser("sweep", help="value function over an initial-state grid")
    _add_common(p)
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--grid", required=True, help="lo:hi:count[,lo:hi:count]")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("oracle", help="grid value tables (DP oracle)")
    _add_common(p)
    p.add_argument("--grid", default=None, help="lo:hi:count[,lo:hi:count]")
    p.add_argument("--dual", action="store_true",
                   help="tables of the dual value function")
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if args.command == "solve" and args.xi is None and args.eta is None:
        print("solve needs --xi (primal) or --eta (dual)", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ProblemFileError as exc:
        print(f"problem file error: {exc}", file=sys.stderr)
        return 1
    except BolzaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
