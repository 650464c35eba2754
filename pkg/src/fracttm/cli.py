"""Command-line entry point: ``fracttm --study convergence|m-sweep|surface``."""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .bench import (
    Level,
    MStudyConfig,
    StudyConfig,
    emit_surface,
    m_study_csv,
    run_convergence_study,
    run_m_study,
    run_method,
)
from .metrics import error_l2
from .problems import PROBLEMS, get_problem
from .timestep import DiscretizationConfig


def number(text: str) -> float:
    """Parse ``0.05``, ``1/20`` and the like."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracttm", description="Fractional Allen-Cahn solvers and benchmarks.")
    p.add_argument("--study", choices=["convergence", "m-sweep", "surface"], default="convergence")
    p.add_argument("--example", choices=sorted(PROBLEMS), default="example1")
    p.add_argument("--method", choices=["ttm", "fe", "both"], default="ttm")
    p.add_argument("--alpha", type=number, nargs="+", default=[1.5])
    p.add_argument("--theta", type=number, nargs="+", default=None, help="default 0 (0.5 for m-sweep)")
    p.add_argument("--epsilon", type=number, nargs="+", default=None,
                   help="default 0.01 (0.1 for m-sweep)")
    p.add_argument("--h", type=number, nargs="+", help="mesh sizes; defaults to h = tau per row")
    p.add_argument("--tau", type=number, nargs="+", help="fine time steps")
    p.add_argument("--tau-c", type=number, nargs="+", help="coarse time steps")
    p.add_argument("--M", type=int, nargs="+", help="coarse/fine step ratios")
    p.add_argument("--norms", choices=["l2", "mu"], nargs="+", default=["l2", "mu"])
    p.add_argument("--reference-res", type=int, default=64, help="reference mesh and step count (64 or 100)")
    p.add_argument("--repeats", type=int, default=0,
                   help="timed repeats per cell after a warm-up run (0: single untimed-protocol run)")
    p.add_argument("--out", help="output path (CSV or surface file); stdout if omitted")
    return p


def _broadcast(name, values, n):
    if values is None:
        return [None] * n
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise SystemExit(f"--{name} needs 1 or {n} values, got {len(values)}")
    return values


def _cells(h: float) -> int:
    n = round(1.0 / h)
    if abs(n * h - 1.0) > 1e-9:
        raise SystemExit(f"h={h} does not divide the unit interval")
    return n


def build_levels(args) -> list[Level]:
    lengths = [len(v) for v in (args.h, args.tau, args.tau_c, args.M) if v]
    n = max(lengths, default=0)
    if n == 0:
        raise SystemExit("give at least --tau or --tau-c with --M")
    hs = _broadcast("h", args.h, n)
    taus = _broadcast("tau", args.tau, n)
    tcs = _broadcast("tau-c", args.tau_c, n)
    Ms = _broadcast("M", args.M, n)
    levels = []
    for h, tau, tc, M in zip(hs, taus, tcs, Ms):
        if tau is None:
            if tc is None or M is None:
                raise SystemExit("each row needs --tau, or --tau-c together with --M")
            tau = tc / M
        if M is None:
            M = round(tc / tau) if tc is not None else 1
        if tc is not None and abs(M * tau - tc) > 1e-12:
            raise SystemExit(f"tau_c={tc} is not M*tau={M * tau}")
        levels.append(Level(_cells(h if h is not None else tau), tau, M))
    return levels


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = open(args.out, "w") if args.out and args.study != "surface" else sys.stdout
    try:
        if args.study == "convergence":
            config = StudyConfig(
                problem=args.example, levels=tuple(build_levels(args)), alphas=tuple(args.alpha),
                thetas=tuple(args.theta or [0.0]), epsilons=tuple(args.epsilon or [0.01]), method=args.method,
                norms=tuple(args.norms), reference_res=args.reference_res, repeats=args.repeats,
            )
            out.write(run_convergence_study(config).to_csv())
        elif args.study == "m-sweep":
            tau = args.tau[0] if args.tau else 1.0 / 400.0
            n_cells = _cells(args.h[0]) if args.h else 20
            Ms = tuple(args.M) if args.M else (2, 5, 10, 20)
            config = MStudyConfig(args.example, args.alpha[0], (args.theta or [0.5])[0],
                                  (args.epsilon or [0.1])[0], n_cells, tau, Ms, max(args.repeats, 1))
            out.write(m_study_csv(run_m_study(config)))
        else:
            levels = build_levels(args)
            lev = levels[0]
            problem = get_problem(args.example, args.alpha[0], (args.epsilon or [0.01])[0])
            method = "fe" if args.method == "fe" else "ttm"
            theta = (args.theta or [0.0])[0]
            disc = DiscretizationConfig(lev.n_cells, lev.tau, theta, lev.M if method == "ttm" else 1)
            traj = run_method(problem, disc, method)
            mesh = traj.opset.mesh
            emit_surface(traj.final, mesh, args.out or sys.stdout)
            if problem.exact is not None:
                err = error_l2(traj.final, problem.exact, mesh, problem.T)
                print(f"final-time L2 error {err:.6e}", file=sys.stderr)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
