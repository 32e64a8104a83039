"""Command-line entry point: ``vbdf2 <subcommand> ...``.

Exit codes: 0 success, 2 precondition violation, 3 numerical failure.
``BDF2_LOG=debug|info`` raises diagnostic verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path


from . import experiments as X
from . import kernels as K
from .errors import InvalidArgument, NumericalFailure, PreconditionError
from .integrator import dahlquist_march
from .mesh import R_S1, TimeMesh, check_s1, gamma_n, ratio_profile, read_mesh_csv
from .spatial import write_field_csv

EXIT_PRECONDITION = 2
EXIT_NUMERICAL = 3

_GEN_KEYS = {"T": float, "N": int, "seed": int, "cap": float, "ratio": float}


def parse_mesh_spec(spec: str) -> TimeMesh:
    """A CSV path, or ``family:key=value,...`` with family in uniform/random/capped/geometric.

    Example: ``random:N=64,seed=3`` or ``capped:N=128,seed=1,cap=2.4``.
    """
    if Path(spec).is_file():
        return read_mesh_csv(spec)
    family, _, rest = spec.partition(":")
    opts = {"T": 1.0, "seed": 0, "cap": R_S1, "ratio": 1.5}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        if key not in _GEN_KEYS:
            raise InvalidArgument(f"unknown mesh option {key!r} in {spec!r}")
        opts[key] = _GEN_KEYS[key](val)
    if "N" not in opts:
        raise InvalidArgument(f"mesh spec {spec!r} is neither a file nor a generator with N=")
    family = {"capped": "capped-random"}.get(family, family)
    return X.make_mesh(family, opts["T"], opts["N"], opts["seed"], r_cap=opts["cap"],
                       ratio=opts["ratio"])


def _window(text: str, n_levels: int) -> tuple[int, int]:
    a, _, b = text.partition(":")
    first = int(a) if a else 1
    last = int(b) if b else n_levels
    if not 1 <= first <= last <= n_levels:
        raise InvalidArgument(f"window {text!r} outside 1..{n_levels}")
    return first, last


def _out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", newline="")


def cmd_kernels(args) -> None:
    mesh = parse_mesh_spec(args.mesh)
    kern = K.build_bdf2_kernels(mesh)
    first, last = _window(args.window, mesh.n_steps)
    fh = _out(args.out)
    try:
        K.write_kernel_rows(kern, first, last, csv.writer(fh, lineterminator="\n"))
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_check_mesh(args) -> None:
    mesh = parse_mesh_spec(args.mesh)
    prof = ratio_profile(mesh)
    kern = K.build_bdf2_kernels(mesh)
    s1 = check_s1(prof)
    print(f"N            {mesh.n_steps}")
    print(f"T            {mesh.final_time!r}")
    print(f"tau_max      {mesh.tau_max:.6e}")
    print(f"r_max        {prof.r_max:.6g}")
    print(f"S1           {'yes' if s1 else 'no'} (r_k <= {R_S1:.6f}; sufficient, not necessary)")
    print(f"N0 |R_p|     {prof.n0_count}")
    print(f"N1           {prof.n1_count}")
    print(f"r_c          {prof.r_c:.6g}")
    print(f"r_hat_c      {prof.r_hat_c:.6g}")
    print(f"Gamma_N      {gamma_n(prof, mesh.n_steps):.6g}")
    print(f"min eig B2   {K.psd_min_eigenvalue(kern, mesh.n_steps):.6e}")
    try:
        print(f"C_r          {K.c_r_constant(prof):.6g}")
    except PreconditionError as exc:
        print(f"C_r          n/a ({exc})")


def cmd_solve_heat(args) -> None:
    mesh = X.make_mesh(args.mesh_family, args.T, args.N, args.seed, r_cap=args.r_cap,
                       ratio=args.ratio)
    uN, trace, op, err = X.solve_heat(args.eps, mesh, args.M, args.start)
    prof = ratio_profile(mesh)
    print(f"N={mesh.n_steps} eps={args.eps:g} e(N)={err:.6e} tau={mesh.tau_max:.3e} "
          f"max_r={prof.r_max:.4g} N1={prof.n1_count} energy_monotone={trace.energy_monotone}")
    if args.trace:
        fh = _out(args.trace)
        try:
            trace.write_rows(csv.writer(fh, lineterminator="\n"))
        finally:
            if fh is not sys.stdout:
                fh.close()
    if args.dump:
        write_field_csv(uN, args.dump)


def _parse_lambda(text: str) -> complex:
    re_, _, im = text.partition(",")
    return complex(float(re_), float(im) if im else 0.0)


def cmd_dahlquist(args) -> None:
    lam = _parse_lambda(args.lam)
    mesh = X.make_mesh(args.mesh_family, args.T, args.N, args.seed, r_cap=args.r_cap)
    amp = dahlquist_march(lam, mesh)
    print(f"lambda={lam} N={mesh.n_steps} S1={check_s1(ratio_profile(mesh))} "
          f"max|y^n/y^0|={amp.max():.6e} |y^N/y^0|={amp[-1]:.6e}")
    if args.series:
        fh = _out(args.series)
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "t_n", "abs_y"])
            for n, (t, a) in enumerate(zip(mesh.t, amp)):
                w.writerow([n, repr(float(t)), repr(float(a))])
        finally:
            if fh is not sys.stdout:
                fh.close()


def cmd_converge(args) -> None:
    cfg = X.ExperimentConfig(epsilon=args.eps, T=args.T, N_list=tuple(args.n_list), seed=args.seed,
                             mesh_family=args.mesh_family, starting_scheme=args.start, M=args.M,
                             r_cap=args.r_cap)
    rows = X.run_convergence(cfg)
    text = X.render(rows, args.format, X.convergence_caption(cfg))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
        if args.format in ("md", "markdown") and len(rows) > 1:
            sys.stdout.write(f"\nfitted order: {X.fitted_order(rows):.3f}\n")


def cmd_stability_suite(args) -> int:
    counts = dict(X.DEFAULT_COUNTS)
    if args.cases is not None:
        counts = {k: args.cases for k in counts}
    report = X.run_stability_suite(args.seed, counts)
    text = X.render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report.all_passed else 1


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vbdf2", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def mesh_opts(sp, default_family="random"):
        sp.add_argument("--mesh-family", default=default_family, choices=X.MESH_FAMILIES)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--T", type=float, default=1.0)
        sp.add_argument("--r-cap", type=float, default=R_S1,
                        help="ratio cap for the capped-random family")

    sp = sub.add_parser("kernels", help="dump BDF2/DOC kernels as CSV")
    sp.add_argument("--mesh", required=True, help="mesh CSV or generator spec, e.g. random:N=16,seed=1")
    sp.add_argument("--window", default=":", help="level window a:b (1-based, inclusive)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_kernels)

    sp = sub.add_parser("check-mesh", help="ratio profile, S1/S2 data and diagnostics")
    sp.add_argument("mesh")
    sp.set_defaults(func=cmd_check_mesh)

    sp = sub.add_parser("solve-heat", help="manufactured heat problem on one mesh")
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--M", type=int, default=32)
    sp.add_argument("--start", default="bdf1", choices=("bdf1", "exact", "trapezoid"))
    sp.add_argument("--ratio", type=float, default=1.5, help="geometric family ratio")
    sp.add_argument("--trace", nargs="?", const="-", help="write the step trace CSV (default stdout)")
    sp.add_argument("--dump", help="write the final field as i,j,value CSV")
    mesh_opts(sp)
    sp.set_defaults(func=cmd_solve_heat)

    sp = sub.add_parser("dahlquist", help="BDF2 on y' = lambda y")
    sp.add_argument("--lambda", dest="lam", required=True, help="re[,im]; write negative values as --lambda=-1,10")
    sp.add_argument("--N", type=int, default=64)
    sp.add_argument("--series", nargs="?", const="-", help="write |y^n| as CSV")
    mesh_opts(sp, "capped-random")
    sp.set_defaults(func=cmd_dahlquist)

    sp = sub.add_parser("converge", help="convergence table for the manufactured heat problem")
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--n-list", type=_int_list, default=[64, 128, 256, 512, 1024])
    sp.add_argument("--format", default="md", choices=("md", "markdown", "csv", "json"))
    sp.add_argument("--M", type=int, default=32)
    sp.add_argument("--start", default="bdf1", choices=("bdf1", "exact", "trapezoid"))
    sp.add_argument("--out")
    mesh_opts(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("stability-suite", help="randomized stability and identity checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cases", type=int, help="override the case count of every suite")
    sp.add_argument("--format", default="md", choices=("md", "markdown", "csv", "json"))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stability_suite)
    return p


def main(argv=None) -> int:
    level = os.environ.get("BDF2_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
