"""Command line entry point.

Exit codes: 0 success / all checks passed, 1 usage or input error,
2 an experiment ran but at least one acceptance check failed.
"""

import argparse
import math
import os
import sys

from . import lab, lattice, spectral


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_body(p):
    p.add_argument("--body", default="disk",
                   choices=["disk", "gen_ellipse", "superellipse"], help="body kind")
    p.add_argument("--gamma", type=float, help="flatness order for gen_ellipse/superellipse")
    p.add_argument("--theta", type=float, help="rotate the body by this angle (radians)")
    p.add_argument("--tan", type=int, nargs=2, metavar=("P", "Q"),
                   help="declare tan(theta) = P/Q exactly (keeps rational normals)")


def _body_from(args):
    spec = {"kind": args.body}
    if args.gamma is not None:
        spec["gamma"] = args.gamma
    if args.theta is not None:
        spec["theta"] = args.theta
    if args.tan is not None:
        spec["tan"] = list(args.tan)
    return lab.build_body(spec)


def _p_value(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def build_parser():
    parser = _Parser(prog="flatlattice", description="Lattice discrepancy of bodies with flat points")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (overrides FLATLATTICE_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("count", help="count lattice points of RB - z")
    _add_body(c)
    c.add_argument("--R", type=float, required=True)
    c.add_argument("--z", type=float, nargs=2, default=[0.0, 0.0], metavar=("Z1", "Z2"))

    lp = sub.add_parser("lpnorm", help="torus L^p norm of the discrepancy")
    _add_body(lp)
    lp.add_argument("--R", type=float, required=True)
    lp.add_argument("--p", type=_p_value, default=2.0)
    lp.add_argument("--samples", type=int, default=256, help="stratified z2 samples (M)")
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--main-term", action="store_true", help="subtract the main term Y")

    f = sub.add_parser("fourier", help="Fourier transform of the indicator")
    _add_body(f)
    f.add_argument("--zeta", type=float, nargs=2, required=True, metavar=("XI", "S"))

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("--out", help="output prefix (overrides the config)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--samples", type=int, help="override grid.M")

    rf = sub.add_parser("refit", help="refit a scaling law from an emitted CSV")
    rf.add_argument("csv")
    rf.add_argument("--experiment", help="series name in the experiment column")
    rf.add_argument("--p", type=_p_value)
    rf.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        os.environ["FLATLATTICE_THREADS"] = str(max(1, args.threads))
    try:
        return _dispatch(args)
    except (ValueError, OSError) as exc:
        print(f"flatlattice: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args):
    if args.command == "count":
        body = _body_from(args)
        n = lattice.count_points(body, args.R, args.z)
        print(f"count {n}")
        print(f"discrepancy {n - args.R ** 2 * body.area:.17g}")
        return 0
    if args.command == "lpnorm":
        body = _body_from(args)
        main_term = None
        if args.main_term:
            from .asymptotics import main_term_shift
            main_term = main_term_shift(body, args.R)
        est = lattice.lp_norm(body, args.R, args.p, args.samples, args.seed, main_term)
        print(f"value {est.value:.17g}")
        print(f"stderr {est.stderr:.17g}")
        return 0
    if args.command == "fourier":
        body = _body_from(args)
        v = spectral.chi_hat_2d(body, args.zeta)
        print(f"re {v.real:.17g}")
        print(f"im {v.imag:.17g}")
        print(f"abs {abs(v):.17g}")
        return 0
    if args.command == "run":
        cfg = lab.load_config(args.config)
        if args.out:
            cfg.output = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.samples is not None:
            if args.samples < 16:
                raise ValueError("--samples must be at least 16")
            cfg.M = args.samples
        report = lab.run_experiment(cfg)
        for chk in report.checks:
            status = "PASS" if chk["passed"] else "FAIL"
            print(f"{status} {chk['name']}: {chk['value']:.6g} (target {chk['target']})")
        print(f"total time {report.timings['total']:.2f}s")
        return 0 if report.passed else 2
    if args.command == "refit":
        fit = lab.fit_scaling(args.csv, args.window, args.experiment, args.p)
        print(f"exponent {fit.exponent:.17g}")
        print(f"intercept {fit.intercept:.17g}")
        print(f"r2 {fit.r2:.17g}")
        print(f"n {fit.n}")
        return 0
    raise ValueError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
