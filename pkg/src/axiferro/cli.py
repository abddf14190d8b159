"""Command-line entry points.

Outputs are plot-ready CSV plus JSON run records.  Every CSV starts with a
comment header carrying a hash of the canonical config, and the same hash is
the first field of every JSON record, so outputs can be traced back to the
exact configuration that produced them.  With a fixed seed all outputs are
reproducible byte for byte (the wall_time_s field of run records excepted).

Exit codes: 0 success / stationary, 1 configuration or pipeline error,
2 flow horizon reached, 3 suspected blowup.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .energy import (EnergyParams, el_residual, reduced_energy,
                     residual_supnorm, second_variation_form,
                     assemble_second_variation, wedge_certificates)
from .flow import FlowConfig, FlowStatus, comparison_trial, run, write_energy_trace_csv
from .grid import make_grid, quad_sin
from .profile import (W1, W2, WedgeSpec, builtin_profile, degree,
                      make_profile, read_profile_csv, write_profile_csv)
from .saddle import (FIRST, SECOND, SaddleValidationError, find_first_type,
                     find_second_type, sweep)
from .spectrum import eigs_lowest, legendre_validation

OUTDIR_ENV = "AXIFERRO_OUTDIR"


def config_hash(config):
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _outdir(args):
    out = args.out or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _load_initial(name, grid, kappa):
    if name.endswith(".csv"):
        p, _ = read_profile_csv(name, grid)
        return p
    return builtin_profile(name, grid, kappa=kappa)


def _auto_wedge(init_name):
    if init_name in ("pi", "first-type"):
        return WedgeSpec(W1, 1e-8)
    if init_name == "two-theta":
        return WedgeSpec(W2, 1e-8)
    return None


def cmd_flow(args):
    config = {"command": "flow", "init": args.init, "kappa": args.kappa,
              "n": args.n, "dt": args.dt, "t_max": args.t_max, "tol": args.tol,
              "record_every": args.record_every, "wedge": args.wedge,
              "half_interval": args.half_interval, "seed": args.seed}
    h = config_hash(config)
    out = _outdir(args)
    grid = make_grid(args.n)
    p0 = _load_initial(args.init, grid, args.kappa)
    wedge = {"none": None, "W1": WedgeSpec(W1, 1e-8), "W2": WedgeSpec(W2, 1e-8),
             "auto": _auto_wedge(args.init)}[args.wedge]
    cfg = FlowConfig(dt=args.dt, t_max=args.t_max, stationary_tol=args.tol,
                     record_every=args.record_every, wedge=wedge)
    params = EnergyParams(args.kappa)
    t0 = time.perf_counter()
    result = run(p0, params, cfg, half_interval=args.half_interval)
    wall = time.perf_counter() - t0
    write_energy_trace_csv(result, os.path.join(out, "energy_trace.csv"),
                           header_lines=[f"# config_hash={h}"])
    write_profile_csv(result.final, os.path.join(out, "final_profile.csv"),
                      kappa=args.kappa, extra_header=f"# config_hash={h}")
    record = {"config_hash": h, "config": config, "tool_version": __version__,
              "status": result.status.value, "steps": result.steps,
              "t_end": result.records[-1].t,
              "E_final": result.records[-1].energy,
              "residual_sup": result.records[-1].sup_residual,
              "energy_monotone": result.energy_monotone,
              "wedge_always_ok": result.wedge_always_ok,
              "wall_time_s": wall}
    _write_json(os.path.join(out, "run.json"), record)
    print(f"{result.status.value}: steps={result.steps} "
          f"E={record['E_final']:.9g} residual={record['residual_sup']:.3g}")
    return {FlowStatus.STATIONARY: 0, FlowStatus.HORIZON_REACHED: 2,
            FlowStatus.BLOWUP_SUSPECTED: 3}[result.status]


def _report_payload(report, h, config):
    verdict = report.wedge_verdict
    return {"config_hash": h, "config": config, "tool_version": __version__,
            "kappa": report.kappa, "type": report.saddle_type,
            "provenance": report.provenance,
            "energy": report.energy,
            "full_energy": 2.0 * np.pi * report.energy,
            "eigenvalues": [float(v) for v in report.spectrum.eigenvalues],
            "lambda1": report.lambda1, "lambda2": report.lambda2,
            "morse_index": report.spectrum.morse_index,
            "explicit_direction_value": report.explicit_direction_value,
            "residual_sup": report.residual_sup,
            "hemispheric": report.hemispheric,
            "hemispheric_dev": report.hemispheric_dev,
            "wedge": {"inside": verdict.inside, "node": verdict.node,
                      "excess": verdict.excess},
            "marginal": report.marginal,
            "degree": degree(report.profile),
            "boundary_class": [report.profile.m, report.profile.n_end],
            "grid_n": report.profile.grid.n}


def cmd_saddle(args):
    config = {"command": "saddle", "type": args.type, "kappa": args.kappa,
              "n": args.n, "seed": args.seed}
    h = config_hash(config)
    out = _outdir(args)
    grid = make_grid(args.n) if args.n else None
    if args.type == FIRST:
        report = find_first_type(args.kappa, grid=grid, seed=args.seed)
    else:
        report = find_second_type(args.kappa, grid=grid, seed=args.seed)
    payload = _report_payload(report, h, config)
    _write_json(os.path.join(out, "report.json"), payload)
    write_profile_csv(report.profile, os.path.join(out, "profile.csv"),
                      kappa=args.kappa, extra_header=f"# config_hash={h}")
    print(f"{args.type} saddle at kappa={args.kappa}: lambda1={report.lambda1:.6g} "
          f"dir_value={report.explicit_direction_value:.6g} "
          f"morse={report.spectrum.morse_index}"
          + (" [marginal]" if report.marginal else ""))
    return 0


def cmd_sweep(args):
    kappas = np.arange(args.kappa_from, args.kappa_to + 0.5 * args.step, args.step)
    config = {"command": "sweep", "types": args.type, "from": args.kappa_from,
              "to": args.kappa_to, "step": args.step, "n": args.n,
              "seed": args.seed, "kappa1_probe": args.kappa1_probe}
    h = config_hash(config)
    out = _outdir(args)
    os.makedirs(os.path.join(out, "profiles"), exist_ok=True)
    _write_json(os.path.join(out, "config.json"),
                {"config_hash": h, "config": config, "tool_version": __version__})
    grid = make_grid(args.n) if args.n else None
    result = sweep(kappas, types=tuple(args.type), grid=grid, seed=args.seed,
                   estimate_kappa1=args.kappa1_probe)
    lines = [f"# config_hash={h}"]
    k0 = result.kappa0_estimate
    k1 = result.kappa1_estimate
    lines.append(f"# kappa0_bracket={k0[0]!r},{k0[1]!r}" if k0 else "# kappa0_bracket=none")
    lines.append(f"# kappa1_bracket={k1[0]!r},{k1[1]!r}" if k1 else "# kappa1_bracket=none")
    lines.append("kappa,type,E,lambda1,lambda2,dir_value,status")
    for r in result.rows:
        lines.append(f"{r.kappa!r},{r.saddle_type},{r.energy!r},{r.lambda1!r},"
                     f"{r.lambda2!r},{r.dir_value!r},{r.status}")
    with open(os.path.join(out, "sweep.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for report in result.reports:
        name = f"kappa_{report.kappa:g}_{report.saddle_type}.csv"
        write_profile_csv(report.profile, os.path.join(out, "profiles", name),
                          kappa=report.kappa, extra_header=f"# config_hash={h}")
    print(f"swept {len(result.rows)} rows; kappa0={k0}; kappa1={k1}")
    return 0


def cmd_spectrum(args):
    config = {"command": "spectrum", "profile": args.profile,
              "kappa": args.kappa, "k": args.k, "n": args.n,
              "seed": args.seed, "vectors": args.vectors}
    h = config_hash(config)
    out = _outdir(args)
    grid = make_grid(args.n)
    p = _load_initial(args.profile, grid, args.kappa)
    op = assemble_second_variation(p, EnergyParams(args.kappa))
    result = eigs_lowest(op, args.k, seed=args.seed)
    lines = [f"# config_hash={h}", "index,lambda"]
    for i, lam in enumerate(result.eigenvalues):
        lines.append(f"{i + 1},{float(lam)!r}")
    with open(os.path.join(out, "spectrum.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.vectors:
        for i in range(args.k):
            vec_lines = [f"# config_hash={h}",
                         f"# eigenvalue={float(result.eigenvalues[i])!r}", "theta,v"]
            for t, v in zip(grid.nodes, result.eigenvectors[i]):
                vec_lines.append(f"{float(t)!r},{float(v)!r}")
            with open(os.path.join(out, f"eigvec_{i + 1}.csv"), "w") as fh:
                fh.write("\n".join(vec_lines) + "\n")
    print("eigenvalues:", " ".join(f"{v:.6g}" for v in result.eigenvalues))
    return 0


def _validate_properties(n, seed):
    """The property suite behind cmd_validate; yields (name, ok, detail)."""
    grid = make_grid(n)
    rng = np.random.default_rng(seed)

    # exact solutions stay residual-free
    theta_p = builtin_profile("theta", grid)
    two_theta = builtin_profile("two-theta", grid)
    worst = max(max(residual_supnorm(theta_p, EnergyParams(k))
                    for k in (0.0, 1.0, 4.0, 10.0)),
                residual_supnorm(two_theta, EnergyParams(4.0)))
    yield ("exact-solution-residuals", worst < 1e-6, f"sup residual {worst:.3g}")

    # analytic energies; the bar follows the second-order quadrature floor
    pi_p = builtin_profile("pi", grid)
    errs = (abs(reduced_energy(theta_p, EnergyParams(3.0)) - 2.0) / 2.0,
            abs(reduced_energy(two_theta, EnergyParams(4.0)) - 8.0) / 8.0,
            abs(reduced_energy(pi_p, EnergyParams(6.0)) - 4.0) / 4.0)
    energy_bar = 1e-5 * max(1.0, (1024.0 / n) ** 2)
    yield ("analytic-energies", max(errs) < energy_bar,
           f"max rel err {max(errs):.3g}")

    # Legendre spectrum of the singular operator
    rep = legendre_validation(grid, 5, seed=seed)
    ok = rep.max_deviation_coarse < 1e-2 and 3.0 < rep.refinement_ratio < 5.0
    yield ("legendre-table", ok,
           f"max dev {rep.max_deviation_coarse:.3g}, ratio {rep.refinement_ratio:.2f}")

    # gradient and Hessian consistency against centered differences
    base = make_profile(grid, np.pi + 0.2 * np.sin(grid.nodes)
                        + 0.1 * np.sin(2 * grid.nodes), 1, 1)
    params = EnergyParams(1.5)
    eps = 1e-4
    grad_worst = hess_worst = 0.0
    for _ in range(20):
        coef = rng.uniform(-1.0, 1.0, 3)
        g = sum(c * np.sin((i + 1) * grid.nodes) for i, c in enumerate(coef))
        g[0] = g[-1] = 0.0
        plus = make_profile(grid, base.values + eps * g, 1, 1)
        minus = make_profile(grid, base.values - eps * g, 1, 1)
        e_plus, e_minus = reduced_energy(plus, params), reduced_energy(minus, params)
        e0 = reduced_energy(base, params)
        fd1 = (e_plus - e_minus) / (2 * eps)
        r_full = np.zeros(grid.n + 1)
        r_full[1:-1] = el_residual(base, params)
        grad_worst = max(grad_worst, abs(fd1 + quad_sin(grid, r_full * g)))
        fd2 = (e_plus - 2 * e0 + e_minus) / eps ** 2
        hess_worst = max(hess_worst,
                         abs(fd2 - second_variation_form(base, params, g)))
    fd_bar = 1e-4 * max(1.0, (512.0 / n) ** 2)
    yield ("gradient-consistency", grad_worst < fd_bar, f"worst {grad_worst:.3g}")
    yield ("hessian-consistency", hess_worst < fd_bar, f"worst {hess_worst:.3g}")

    # sign certificates on the wedges
    cert_ok = True
    detail = []
    for kappa in (4.0, 7.0):
        rep = wedge_certificates(kappa, samples=400)
        cert_ok = cert_ok and rep.all_hold
        detail.append(f"kappa={kappa:g} {'ok' if rep.all_hold else 'VIOLATED'}")
    yield ("wedge-certificates", cert_ok, ", ".join(detail))

    # comparison principle on randomized ordered pairs
    cgrid = make_grid(256)
    worst = 0.0
    for _ in range(5):
        a = rng.uniform(0.05, 0.4)
        b = rng.uniform(0.05, 0.3)
        lo_vals = np.pi + a * np.sin(cgrid.nodes) ** 2 * np.cos(cgrid.nodes)
        up_vals = lo_vals + b * np.sin(cgrid.nodes) ** 2
        lo = make_profile(cgrid, lo_vals, 1, 1)
        up = make_profile(cgrid, up_vals, 1, 1)
        verdict = comparison_trial(lo, up, EnergyParams(5.0),
                                   FlowConfig(t_max=5.0, record_every=10))
        worst = max(worst, verdict.max_violation)
    yield ("comparison-trials", worst <= 1e-6, f"worst violation {worst:.3g}")


def cmd_validate(args):
    failures = 0
    for name, ok, detail in _validate_properties(args.n, args.seed):
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
        if not ok:
            failures += 1
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="axiferro",
        description="Axisymmetric profile flow, saddle certification, and "
                    "kappa sweeps for the spherical-ferromagnet energy.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUTDIR_ENV} or .)")
        sp.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("flow", help="integrate the profile heat flow")
    p.add_argument("--init", required=True,
                   help="pi | theta | two-theta | first-type | <profile.csv>")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-max", type=float, default=1e3)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--wedge", choices=["auto", "none", "W1", "W2"], default="auto")
    p.add_argument("--half-interval", action="store_true")
    common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("saddle", help="run one saddle pipeline")
    p.add_argument("--type", choices=[FIRST, SECOND], required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_saddle)

    p = sub.add_parser("sweep", help="sweep kappa and bracket the thresholds")
    p.add_argument("--type", nargs="+", choices=[FIRST, SECOND],
                   default=[FIRST, SECOND])
    p.add_argument("--from", dest="kappa_from", type=float, required=True)
    p.add_argument("--to", dest="kappa_to", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--kappa1-probe", action=argparse.BooleanOptionalAction,
                   default=True)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="lowest eigenvalues at a profile")
    p.add_argument("--profile", required=True,
                   help="pi | theta | two-theta | first-type | <profile.csv>")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--vectors", action="store_true")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="run the numerical property suite")
    p.add_argument("--n", type=int, default=512)
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            sys.exit(1)
        raise
    try:
        code = args.func(args)
    except (ValueError, SaddleValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
