"""Command-line entry point.

Subcommands: simulate, check-theory, spectrum, fit-decay, observability,
sweep.  Exit status: 0 success, 1 a requested check failed, 2 usage or
configuration error, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import functionals as F
from .config import Scenario, load_scenario
from .errors import BlowUpError, ConfigurationError, KawaharaLabError
from .functionals import CHECK_HEADER, CheckReport, EnergyTrace, fmt
from .model import SimParams, validate
from .spectral import assemble, dissipativity_margin, natural_shift, spectral_abscissa, MAX_DELAY_UNKNOWNS
from .stepper import simulate
from .theory import (TheoryConstants, fit_decay, nu_from_observability, p6j_constants, p7j_constants,
                     theory_constants)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3
SWEEP_PARAMS = ("L", "h", "mu1", "mu2", "xi")


def _fmt_opt(v) -> str:
    return "absent" if v is None else fmt(v)


def write_constants(path, consts: TheoryConstants) -> None:
    with open(path, "w") as fh:
        for k, v in consts.items():
            fh.write(f"{k} = {_fmt_opt(v)}\n")


def _family_constants(params: SimParams, family: str):
    if family == "mu":
        return p6j_constants(params.L, params.h, params.mu1, params.mu2, params.xi)
    return p7j_constants(params.L, params.h, params.xi)


def _skipped(name: str, why: str) -> CheckReport:
    return CheckReport(name, math.nan, math.nan, math.nan, True, 0, "skipped: " + why)


def run_checks(sc: Scenario, traj) -> list[CheckReport]:
    """Evaluate the scenario's requested checks on a finished run."""
    p, opts, trace = sc.params, sc.options, traj.trace
    family = opts["family"]
    efield = "E_mu" if family == "mu" else "E_xi"
    lc = _family_constants(p, family)
    reports = []
    for name in sc.checks:
        if name == "dissipation":
            reports.append(F.dissipation_check(trace, p, slack=opts["slack"]))
        elif name == "lyapunov":
            if lc is None:
                reports.append(_skipped("lyapunov", "Lyapunov constants unavailable"))
            else:
                reports.append(F.lyapunov_decay_check(trace, p, lc.alpha, lc.beta, lc.gamma, family,
                                                      slack=opts["slack"]))
        elif name == "envelope":
            if lc is None:
                reports.append(_skipped("envelope", "Lyapunov constants unavailable"))
            else:
                reports.append(F.envelope_check(trace, lc.kappa, lc.gamma, efield))
        elif name == "observability":
            T = opts["observability_T"] or p.t_final
            res = F.observability_ratio(trace, p, T, efield)
            ok = res.status == "ok"
            reports.append(CheckReport("observability", res.ratio, T, math.nan, ok, 0 if ok else 1,
                                       f"status={res.status}"))
        elif name in ("dissipativity", "spectrum"):
            m = opts["m_rho"]
            n = min(p.n, MAX_DELAY_UNKNOWNS // m)
            op = assemble(p, family, n, m)
            if name == "dissipativity":
                lam = natural_shift(p, family)
                margin = dissipativity_margin(op, lam, opts["trials"], sc.seed)
                bound = 0.05 * lam + 5 * op.grid.dx
                reports.append(CheckReport("dissipativity", margin, math.nan, bound, margin <= bound,
                                           int(margin > bound), f"lambda={lam:.6g}"))
            else:
                ab = spectral_abscissa(op).abscissa
                reports.append(CheckReport("spectrum", ab, math.nan, 0.0, ab < 0, int(ab >= 0),
                                           f"n={n} m_rho={m}"))
        elif name == "decay-fit":
            if lc is None:
                reports.append(_skipped("decay-fit", "theoretical rate unavailable"))
                continue
            win = tuple(opts["fit_window"]) if opts["fit_window"] else None
            fit = fit_decay(trace, efield, win)
            excess = lc.gamma - fit.gamma_emp
            reports.append(CheckReport("decay-fit", excess, math.nan, 0.0, excess <= 0, int(excess > 0),
                                       f"gamma_emp={fit.gamma_emp:.6g} gamma_theory={lc.gamma:.6g}"))
    return reports


def run_scenario(path, out_dir=None, stream=sys.stdout) -> int:
    """Simulate a scenario file and write its artifacts."""
    sc = load_scenario(path)
    out = Path(out_dir or sc.output or Path(path).with_suffix(""))
    out.mkdir(parents=True, exist_ok=True)
    report = validate(sc.params)
    for msg in report.messages:
        print(f"warning: {msg}", file=sys.stderr)
    u0, z0 = sc.initial_data()
    try:
        traj = simulate(sc.params, sc.variant, z0, u0)
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    trace = traj.trace
    trace.write_csv(out / "trace.csv")
    traj.write_csv(out / "snapshots.csv")
    efield = F.VARIANT_ENERGY[trace.variant]
    with open(out / "energy_log.dat", "w") as fh:
        fh.write(f"# t ln({efield})\n")
        for t, e in zip(trace.t, trace.data[efield]):
            if e > 0:
                fh.write(f"{fmt(t)} {fmt(math.log(e))}\n")
    write_constants(out / "constants.txt", theory_constants(sc.params, sc.options["eta"], sc.options["eps"],
                                                            sc.options["s"]))
    reports = run_checks(sc, traj)
    with open(out / "checks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CHECK_HEADER + ["detail"])
        for r in reports:
            row = r.row()
            if r.detail.startswith("skipped"):
                row[-1] = "skipped"
            w.writerow(row + [r.detail])
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        print(f"{r.name}: {'pass' if r.passed else 'FAIL'} (worst {r.worst:.3e}, slack {r.slack:.3e}) {r.detail}",
              file=stream)
    if failed and sc.expect == "violate":
        print(f"expected violation observed in: {', '.join(failed)}", file=stream)
        return EXIT_OK
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _cmd_simulate(args) -> int:
    return run_scenario(args.config, args.out)


def _cmd_check_theory(args) -> int:
    dt = args.h
    p = SimParams(L=args.L, h=args.h, mu1=args.mu1, mu2=args.mu2, xi=args.xi, n=8, dt=dt, t_final=0.0)
    rep = validate(p)
    consts = theory_constants(p, args.eta, args.eps, args.s, b_norm=args.b_norm)
    print(f"cdelay_ok = {rep.cdelay_ok}")
    print(f"length_ok = {rep.length_ok}")
    for k, v in consts.items():
        print(f"{k} = {_fmt_opt(v)}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    sc = load_scenario(args.config)
    m = args.m_rho or sc.options["m_rho"]
    n = args.n or min(sc.params.n, MAX_DELAY_UNKNOWNS // m)
    op = assemble(sc.params, args.variant, n, m)
    res = spectral_abscissa(op)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for ev in res.eigenvalues:
            w.writerow([fmt(ev.real), fmt(ev.imag)])
    print(f"abscissa = {fmt(res.abscissa)}")
    for ev in res.rightmost:
        print(f"rightmost = {fmt(ev.real)} {fmt(ev.imag)}")
    return EXIT_OK


def _cmd_fit_decay(args) -> int:
    trace = EnergyTrace.read_csv(args.trace)
    fit = fit_decay(trace, args.which, tuple(args.window) if args.window else None)
    print(f"gamma_emp = {fmt(fit.gamma_emp)}")
    print(f"kappa_emp = {fmt(fit.kappa_emp)}")
    print(f"window = {fmt(fit.window[0])} {fmt(fit.window[1])}")
    print(f"residual = {fmt(fit.residual)}")
    return EXIT_OK


def _cmd_observability(args) -> int:
    trace = EnergyTrace.read_csv(args.trace)
    res = F.observability_ratio(trace, None, args.T, "E_" + args.which)
    print(f"ratio = {fmt(res.ratio)}")
    print(f"status = {res.status}")
    if args.C0 is not None and res.status == "ok":
        g, nu = nu_from_observability(args.T, res.ratio, args.C0)
        print(f"gamma_contraction = {fmt(g)}")
        print(f"nu = {fmt(nu)}")
    return EXIT_OK if res.status == "ok" else EXIT_CHECK_FAILED


def parse_vary(spec: str) -> tuple[str, np.ndarray]:
    try:
        name, lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigurationError(f"--vary expects name:lo:hi:count, got {spec!r}") from None
    if name not in SWEEP_PARAMS:
        raise ConfigurationError(f"cannot vary {name!r}; choose from {SWEEP_PARAMS}")
    if count < 1:
        raise ConfigurationError("--vary count must be >= 1")
    return name, np.linspace(lo, hi, count)


_THEORY_COLUMNS = ("cdelay_ok", "length_ok", "C0", "gamma", "kappa", "r_max", "aux_gamma", "aux_kappa",
                   "T0", "nu", "delta")
_RUN_COLUMNS = ("status", "E_final", "gamma_emp", "checks_passed")


def _sweep_point(task):
    """Worker: theory constants (and optionally a run) for one grid point."""
    base, changes, config, do_run = task
    row = dict(changes)
    try:
        kw = {f.name: getattr(base, f.name) for f in fields(base)}
        kw.update(changes)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = SimParams.aligned(**kw)
        rep = validate(p)
        c = theory_constants(p)
        row.update(cdelay_ok=rep.cdelay_ok, length_ok=rep.length_ok, C0=c.C0, gamma=c.gamma, kappa=c.kappa,
                   r_max=c.r_max, aux_gamma=c.aux_gamma, aux_kappa=c.aux_kappa, T0=c.T0, nu=c.nu, delta=c.delta)
    except KawaharaLabError as exc:
        row["status"] = f"error: {exc}"
        return row
    if do_run:
        sc = load_scenario(config)
        sc.params = p
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                u0, z0 = sc.initial_data()
                traj = simulate(p, sc.variant, z0, u0)
            efield = F.VARIANT_ENERGY[traj.trace.variant]
            fit = fit_decay(traj.trace, efield) if np.all(traj.trace.data[efield] > 0) else None
            reports = run_checks(sc, traj)
            row.update(status="ok", E_final=float(traj.trace.data[efield][-1]),
                       gamma_emp=None if fit is None else fit.gamma_emp,
                       checks_passed=all(r.passed for r in reports))
        except BlowUpError as exc:
            row["status"] = f"blow-up at t={exc.t:.6g}"
        except KawaharaLabError as exc:
            row["status"] = f"error: {exc}"
    return row


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, float, np.floating)):
        return fmt(v)
    return str(v)


def _cmd_sweep(args) -> int:
    axes = [parse_vary(s) for s in args.vary]
    names = [a[0] for a in axes]
    if len(set(names)) != len(names):
        raise ConfigurationError("each parameter may be varied only once")
    if args.base:
        base = load_scenario(args.base).params
    else:
        base = SimParams(L=1.0, h=1.0, mu1=2.0, mu2=1.0, xi=1.5, n=8, dt=1.0, t_final=0.0)
    if args.simulate and not args.base:
        raise ConfigurationError("--simulate needs --base scenario")
    tasks = []
    for combo in itertools.product(*(a[1] for a in axes)):
        changes = {k: float(v) for k, v in zip(names, combo)}
        tasks.append((base, changes, args.base, args.simulate))
    if args.workers == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, tasks, chunksize=max(1, len(tasks) // 64)))
    cols = names + list(_THEORY_COLUMNS) + (list(_RUN_COLUMNS) if args.simulate else ["status"])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in cols])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kawahara-lab",
                                 description="Damped, delayed Kawahara equation: simulation and verification.")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    s = sub.add_parser("simulate", help="run a scenario file and its checks")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (default: next to the config)")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("check-theory", help="print the closed-form constants")
    for name in ("L", "h", "mu1", "mu2", "xi"):
        s.add_argument(f"--{name}", type=float, required=True)
    s.add_argument("--eta", type=float, default=0.5)
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--s", type=float, default=0.0)
    s.add_argument("--b-norm", type=float, default=0.0)
    s.set_defaults(func=_cmd_check_theory)

    s = sub.add_parser("spectrum", help="eigenvalues of the augmented generator")
    s.add_argument("config")
    s.add_argument("--variant", choices=("mu", "aux"), default="mu")
    s.add_argument("--n", type=int)
    s.add_argument("--m-rho", type=int)
    s.add_argument("--out", default="spectrum.csv")
    s.set_defaults(func=_cmd_spectrum)

    s = sub.add_parser("fit-decay", help="fit an exponential rate to a trace")
    s.add_argument("trace")
    s.add_argument("--which", choices=("fd1", "mu", "xi", "l2"), default="mu")
    s.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
    s.set_defaults(func=_cmd_fit_decay)

    s = sub.add_parser("observability", help="observability ratio of a trace")
    s.add_argument("trace")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--which", choices=("fd1", "mu", "xi", "l2"), default="mu")
    s.add_argument("--C0", type=float)
    s.set_defaults(func=_cmd_observability)

    s = sub.add_parser("sweep", help="grid over parameters, evaluated concurrently")
    s.add_argument("--vary", action="append", required=True, metavar="NAME:LO:HI:COUNT")
    s.add_argument("--base", help="scenario supplying the fixed parameters")
    s.add_argument("--simulate", action="store_true", help="also run the base scenario at every point")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=_cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
