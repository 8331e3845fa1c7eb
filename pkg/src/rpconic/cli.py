"""Command line entry point: ``rpconic {bench,verify,sdp-smoke,transform-check}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import analysis
from .conic import project_problem
from .experiments import (KAPPA, InstanceSpec, emit_csv, emit_series_csv, generate_instance,
                          run_benchmark, sdp_smoke_experiment)
from .sketch import SketchConfig, make_sketch
from .solver import BACKENDS, SolverConfig, default_backend, solve
from .transform import make_transform, sparsity_certificate, transform_problem


def _seeds(count: int) -> range:
    if count < 1:
        raise argparse.ArgumentTypeError("need at least one seed")
    return range(count)


def _solver(args) -> SolverConfig:
    return SolverConfig(backend=args.backend, feas_tol=args.feas_tol, opt_tol=args.opt_tol,
                        time_limit=args.time_limit, log_dir=args.log_dir)


def cmd_bench(args) -> int:
    solver = _solver(args)
    rows, records = run_benchmark(args.m, args.n, args.law, args.density, args.epsilon,
                                  _seeds(args.seeds), solver, args.bounds, args.kappa)
    if args.out:
        emit_csv(rows, args.out)
    if args.series_out:
        emit_series_csv(rows, args.series_out)
    print(",".join(("m", "n", "k", "law", "meantorg", "meantproj", "meanratio", "excluded")))
    for r in rows:
        print(f"{r.m},{r.n},{r.k},{r.law},{r.meantorg:.2E},{r.meantproj:.2E},"
              f"{r.meanratio:.2E},{r.excluded}")
    if args.bounds:
        for rec in records:
            if rec.bound_report is not None:
                b1, b3 = rec.bound_report, rec.lp_bound_report
                print(f"seed={rec.spec.seed} n={rec.spec.n} law={rec.spec.law.tag} "
                      f"thm1={b1.thm1_factor} thm3={b3.thm3_factor} "
                      f"sandwich={b1.sandwich and b3.sandwich} advisory={b1.advisory}")
    return 0


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    t, s = args.trials, args.seed
    u = rng.standard_normal(100)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(100)
    v /= np.linalg.norm(v)
    y_mixed = rng.uniform(0.5, 1.5, 5000) * rng.choice([-1.0, 1.0], 5000)
    checks = {
        "jll": analysis.verify_jll(rng.standard_normal((10, 100)), 2000, 0.2, t, s),
        "frobenius_sketch": analysis.verify_frobenius_sketch(
            np.outer(u, u), np.outer(v, v), 500, 0.2, t, s),
        "gram_concentration": analysis.verify_gram_concentration(
            rng.uniform(0.5, 1.5, 5000), 10, 0.2, t, s),
        "prop1": analysis.verify_prop1(y_mixed, 50, 0.2, t, s),
        "prop3": analysis.verify_prop3(np.ones(5000), np.ones(5000), 50, 0.2, t, s),
    }
    for part, res in analysis.verify_jllapprox(u, v, np.eye(100), 2000, 0.2, t, s).items():
        checks[f"jllapprox_{part}"] = res
    for name, res in checks.items():
        print(f"{name:20s} success={res.fraction:.3f} worst={res.worst:.3g} events={res.events}")
    return 0


def cmd_sdp_smoke(args) -> int:
    res = sdp_smoke_experiment(args.p, args.n, args.k, args.q, args.epsilon, _seeds(args.seeds),
                               args.m, _solver(args))
    for t in res.trials:
        print(f"seed={t.seed} vorg={t.vorg:.6g} vproj={t.vproj:.6g} ratio={t.ratio:.3E} "
              f"identity_ratio={t.identity_ratio:.1E} thm1={t.thm1_factor} status={t.statuses}")
    print(f"relaxation holds: {res.relaxation_holds}; "
          f"max identity ratio: {res.max_identity_ratio:.1E}")
    return 0 if res.relaxation_holds else 1


def cmd_transform_check(args) -> int:
    solver = _solver(args)
    failures = 0
    for seed in _seeds(args.seeds):
        problem = generate_instance(InstanceSpec(args.m, args.n, args.density, args.law, seed))
        data = make_transform(problem)
        tp = transform_problem(problem, data)
        cert = sparsity_certificate(tp.A0, tp.b0)
        a, b = solve(problem, solver), solve(tp, solver)
        rel = abs(a.value - b.value) / max(1.0, abs(a.value))
        ok = cert.ok and rel <= 1e-6 and bool(np.all(data.ctilde > 0))
        failures += not ok
        print(f"seed={seed} v={a.value:.8g} v_transformed={b.value:.8g} rel_diff={rel:.1E} "
              f"max_ratio={cert.column_ratios.max():.3g} bound={cert.bound:.3g} ok={ok}")
        if args.sketch_k:
            sk = make_sketch(args.m, (), SketchConfig(k=args.sketch_k, seed=seed))
            pa = solve(project_problem(problem, sk), solver)
            pb = solve(project_problem(tp, sk), solver)
            print(f"  projected: {pa.value:.8g} vs {pb.value:.8g}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpconic", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def backend(p, choices=BACKENDS, default=None):
        p.add_argument("--backend", choices=choices, default=default or default_backend(),
                       help="solver backend (default from RPCONIC_BACKEND, else auto)")
        p.add_argument("--feas-tol", type=float, default=1e-8)
        p.add_argument("--opt-tol", type=float, default=1e-8)
        p.add_argument("--time-limit", type=float, default=3600.0, help="seconds per solve")
        p.add_argument("--log-dir", help="write one JSON log per solve here")

    b = sub.add_parser("bench", help="random LP benchmark, one aggregate per (law, n)")
    b.add_argument("--m", type=int, default=2000)
    b.add_argument("--n", type=int, nargs="+", default=[600])
    b.add_argument("--density", type=float, default=0.1)
    b.add_argument("--law", action="append", default=None,
                   help="entry law, U(a,b) or N(mu,var); repeatable (default U(0,1))")
    b.add_argument("--epsilon", type=float, default=0.2)
    b.add_argument("--seeds", type=int, default=10, help="number of seeds, 0..N-1")
    b.add_argument("--bounds", action="store_true", help="also evaluate both value bounds")
    b.add_argument("--kappa", type=float, default=KAPPA)
    b.add_argument("--out", help="aggregate CSV path")
    b.add_argument("--series-out", help="ratio-vs-n series CSV path")
    backend(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="Monte Carlo checks of the concentration inequalities")
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sdp-smoke", help="small instances with one PSD block")
    s.add_argument("--p", type=int, default=20)
    s.add_argument("--q", type=int, default=10)
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--m", type=int, default=20, help="orthant rows")
    s.add_argument("--k", type=int, default=10, help="sketched orthant rows")
    s.add_argument("--epsilon", type=float, default=0.2)
    s.add_argument("--seeds", type=int, default=10)
    backend(s, ("clarabel", "scs"), "clarabel")
    s.set_defaults(func=cmd_sdp_smoke)

    t = sub.add_parser("transform-check", help="value invariance of the basis transform")
    t.add_argument("--m", type=int, default=200)
    t.add_argument("--n", type=int, default=50)
    t.add_argument("--density", type=float, default=0.1)
    t.add_argument("--law", default="U(0,1)")
    t.add_argument("--seeds", type=int, default=5)
    t.add_argument("--sketch-k", type=int, default=0,
                   help="also compare projected values of both forms with this many rows")
    backend(t)
    t.set_defaults(func=cmd_transform_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "law", "") is None:
        args.law = ["U(0,1)"]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
