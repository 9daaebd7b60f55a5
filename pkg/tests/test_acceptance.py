"""Acceptance criteria 1-10, one test each, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from helpers import Manufactured, dense_step, smooth_pair_field
from kawahara_lab.delay import init_history
from kawahara_lab.discretization import State, build_grid, build_operators
from kawahara_lab.functionals import (bilinear_sides, dissipation_check, envelope_check, h_norm,
                                      lyapunov_decay_check, observability_ratio)
from kawahara_lab.model import CoefficientProfile, SimParams
from kawahara_lab.spectral import assemble, dissipativity_margin, natural_shift, spectral_abscissa
from kawahara_lab.stepper import SystemVariant, build_imex_matrices, simulate, step
from kawahara_lab.theory import (c0, delta_bound, fit_decay, nu_from_eta, nu_from_observability, p6j_constants,
                                 p7j_constants, t0_tmin)

L3 = 3.0


def crit2_params(n=100, dt=0.005, t_final=10.0):
    return SimParams(L=L3, h=1.0, mu1=2.0, mu2=1.0, xi=1.5,
                     a_profile=CoefficientProfile.indicator(1.0, 0.0, L3 / 2), n=n, dt=dt, t_final=t_final)


def sin3(x, t=0.0):
    return np.sin(np.pi * x / L3) ** 3


@pytest.fixture(scope="module")
def nonlinear_run():
    p = crit2_params()
    lc = p6j_constants(p.L, p.h, p.mu1, p.mu2, p.xi)
    scale = 0.5 * lc.r_max / h_norm(sin3(p.grid().points), sin3, p, "mu")
    z0 = lambda x, t: scale * sin3(x)
    traj = simulate(p, SystemVariant("mu", True), z0)
    return p, lc, traj, z0


def test_c1_energy_identity(acceptance_line):
    L, n = 2.0, 200
    dx = L / (n + 1)
    p = SimParams(L=L, h=1.0, n=n, dt=dx / 2, t_final=5.0)
    t0 = time.perf_counter()
    traj = simulate(p, SystemVariant("undamped-linear"), lambda x, t: np.sin(np.pi * x / L))
    rep = dissipation_check(traj.trace, p)
    elapsed = time.perf_counter() - t0
    d = traj.trace.data
    rate = np.diff(d["E_l2"]) / p.dt
    resid = np.abs(rate + 0.5 * d["uxx0_sq_mid"] + d["num_diss_mid"])
    tol = 1e-2 * max(d["E_l2"][0], 1.0)
    ok = resid.max() <= tol and np.all(rate <= 1e-10) and elapsed < 10 and rep.passed
    acceptance_line(1, ok, f"max|dE/dt + u_xx(0)^2/2| = {resid.max():.3e} <= {tol:.1e}; "
                           f"max dE/dt = {rate.max():.2e}; runtime {elapsed:.2f}s < 10s")
    assert ok


def test_c2_dissipation_inequality(acceptance_line):
    p = crit2_params()
    assert c0(p.h, p.mu1, p.mu2, p.xi) == 0.25
    traj = simulate(p, SystemVariant("mu", False), sin3)
    slack = 1e-3 * traj.trace.E_mu[0]
    rep = dissipation_check(traj.trace, p, slack=slack)
    acceptance_line(2, rep.passed, f"worst dE/dt + C0[...] = {rep.worst:.3e} (slack {slack:.2e}), "
                                   f"{rep.violations} violations over [0, 10]")
    assert rep.passed


def test_c3_lyapunov_decay(nonlinear_run, acceptance_line):
    p, lc, traj, z0 = nonlinear_run
    norm0 = h_norm(traj.states[0], z0, p, "mu")
    assert norm0 == pytest.approx(0.5 * lc.r_max, rel=1e-12)
    rep = lyapunov_decay_check(traj.trace, p, lc.alpha, lc.beta, lc.gamma, "mu")
    env = envelope_check(traj.trace, lc.kappa, lc.gamma, "E_mu", factor=1.05)
    ok = rep.passed and env.passed
    acceptance_line(3, ok, f"||U0||_H = {norm0:.4f} = r_max/2; worst V'+2gV = {rep.worst:.2e} "
                           f"(slack {rep.slack:.1e}); max E/(1.05 kappa E0 e^-2gt) - 1 = {env.worst:.3f}")
    assert ok


def test_c4_decay_rate_ordering(nonlinear_run, acceptance_line):
    p, lc, traj, _ = nonlinear_run
    g_th = lc.gamma
    fit_nl = fit_decay(traj.trace, "mu")
    lin = crit2_params(n=50, t_final=5.0)
    fit_lin = fit_decay(simulate(lin, SystemVariant("mu", False), sin3).trace, "mu")
    ab = spectral_abscissa(assemble(lin, "mu", 50, 100)).abscissa
    rel = abs(fit_lin.gamma_emp + ab) / -ab
    ok = fit_nl.gamma_emp >= g_th and -ab >= g_th and rel <= 0.10
    acceptance_line(4, ok, f"gamma_theory = {g_th:.4f} <= gamma_emp(nonlinear) = {fit_nl.gamma_emp:.3f}; "
                           f"-abscissa = {-ab:.3f}; linear gamma_emp = {fit_lin.gamma_emp:.3f} "
                           f"(rel. diff {rel:.1%} <= 10%)")
    assert ok


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_c5_constant_formulas(acceptance_line):
    checks = []
    checks += [(c0(1, 2, 1, 1.5), 0.25), (c0(2, 1, 0.5, 1.5), 0.125), (c0(1, 3, 1, 2), 0.5)]
    lc = p6j_constants(1.0, 1.0, 2.0, 1.0, 1.5)
    checks.append((lc.r_max, 4.34801822453649334283418080519))
    lc = p6j_constants(2.0, 1.0, 2.0, 1.0, 1.5, alpha=0.01, beta=0.1)
    checks += [(lc.kappa, 1.1), (lc.beta_max, 1.0)]
    lc = p6j_constants(3.0, 1.0, 2.0, 1.0, 1.5)
    checks += [(lc.alpha_max, 0.025), (lc.r_max, 0.602785246857120161078617982698),
               (lc.gamma, 0.0133131868238165864706094786819)]
    ac = p7j_constants(1.0, 1.0, 2.0, alpha=0.05, beta=0.25)
    checks += [(ac.alpha_max, 0.1), (ac.beta_max, 0.5), (ac.kappa, 1.125), (ac.gamma, 1 / 18)]
    T0, Tmin = t0_tmin(0.1, 1.1, 2.0, 0.5, 1.0, 0.0, 0.0)
    checks += [(T0, 11.8737586074208039414782424383), (Tmin, math.log(4))]
    checks.append((t0_tmin(0.1, 1.1, 2.0, 0.5, 2.0, 0.5, 1.0)[1], 2.19314718055994530941723212146))
    checks += [(nu_from_eta(1.0, 1 / math.e - 0.1, 0.1), 1.0),
               (nu_from_eta(2.0, 0.25, 0.25), 0.346573590279972654708616060729),
               (nu_from_eta(4.0, 0.5, 0.25), 0.0719205181129452318598047514984)]
    g, nu = nu_from_observability(1.0, 3.0, 1.0)
    checks += [(g, 0.75), (nu, 0.287682072451780927439219005994)]
    g, nu = nu_from_observability(2.0, 1.0, 1.0)
    checks += [(g, 0.5), (nu, 0.346573590279972654708616060729)]
    g, nu = nu_from_observability(2.0, 1.0, 3.0)
    checks += [(g, 0.25), (nu, math.log(2))]
    checks.append((delta_bound(2.0, 1.1, 0.1, 0.5, 0.25), 4.55219159214067306309601631105e-21))
    checks.append((delta_bound(2.0, 1.1, 1e300, 0.5, 0.25), 0.5 / (math.sqrt(8 * 1.1) * math.exp(7.0))))
    checks.append((delta_bound(1.5, 1.0, 1e300, 0.5, 0.25), min(0.5 / (1.5 ** 1.5 * math.exp(5.5)), 1.0)))
    worst = max(_rel(a, b) for a, b in checks)
    ok = worst <= 1e-12
    acceptance_line(5, ok, f"{len(checks)} oracle values across 7 formulas, worst relative error {worst:.1e}")
    assert ok


def test_c6_bilinear_estimate(acceptance_line):
    grid = build_grid(1.0, 100)
    rng = np.random.default_rng(42)
    violations, worst = 0, 0.0
    for _ in range(100):
        u = smooth_pair_field(rng, grid, 101, 1.0)
        v = smooth_pair_field(rng, grid, 101, 1.0)
        lhs, rhs = bilinear_sides(u, v, grid, 1.0)
        worst = max(worst, lhs / rhs)
        violations += lhs > rhs
    ok = violations == 0
    acceptance_line(6, ok, f"100 seeded pairs, {violations} violations; max lhs/rhs = {worst:.3e}")
    assert ok


def test_c7_convergence(acceptance_line):
    ms = Manufactured()
    t0 = time.perf_counter()

    def run(n, dt, T=0.5):
        p = SimParams(L=ms.L, h=ms.h, mu1=ms.mu1, mu2=ms.mu2, xi=1.0, a_profile=CoefficientProfile.constant(1.0),
                      n=n, dt=dt, t_final=T)
        traj = simulate(p, SystemVariant("mu", True), ms.exact, source=ms.source, record=False)
        return traj.grid, traj.final.values

    space = []
    for n in (39, 79, 159):
        g, u = run(n, 0.5 / 2000)
        space.append(math.sqrt(g.dx * np.sum((u - ms.exact(g.points, 0.5)) ** 2)))
    g, ref = run(79, 0.5 / 3200)
    tim = []
    for steps in (50, 100, 200):
        g, u = run(79, 0.5 / steps)
        tim.append(math.sqrt(g.dx * np.sum((u - ref) ** 2)))
    sr = [space[i] / space[i + 1] for i in range(2)]
    tr = [tim[i] / tim[i + 1] for i in range(2)]
    elapsed = time.perf_counter() - t0
    ok = all(3.5 <= r <= 4.5 for r in sr + tr) and elapsed < 60
    acceptance_line(7, ok, f"spatial ratios {sr[0]:.3f}, {sr[1]:.3f}; temporal ratios {tr[0]:.3f}, {tr[1]:.3f}; "
                           f"runtime {elapsed:.1f}s < 60s")
    assert ok


def test_c8_observability(acceptance_line):
    ratios = []
    for n in (50, 100):
        p = crit2_params(n=n, t_final=2.0)
        res = observability_ratio(simulate(p, SystemVariant("mu", False), sin3).trace, p, 2.0)
        assert res.status == "ok"
        ratios.append(res.ratio)
    change = abs(ratios[1] - ratios[0]) / ratios[0]
    g, nu = nu_from_observability(2.0, ratios[1], 0.25)
    ok = change < 0.15
    acceptance_line(8, ok, f"ratio(n=50) = {ratios[0]:.4f}, ratio(n=100) = {ratios[1]:.4f}, change {change:.1%} "
                           f"< 15%; implied nu = {nu:.3f}")
    assert ok


def test_c9_dissipativity_margin(acceptance_line):
    margins, bounds = [], []
    for n, m in ((25, 40), (50, 40)):
        p = crit2_params(n=n)
        op = assemble(p, "mu", n, m)
        lam = natural_shift(p, "mu")
        margins.append(dissipativity_margin(op, lam, 500, seed=42))
        bounds.append(0.05 * lam + 5 * op.grid.dx)
    ok = all(mg <= b for mg, b in zip(margins, bounds)) and margins[1] < margins[0]
    acceptance_line(9, ok, f"margin {margins[0]:.3e} (n=25) -> {margins[1]:.3e} (n=50); bounds "
                           f"{bounds[0]:.3f}, {bounds[1]:.3f}")
    assert ok


def test_c10_dense_step(acceptance_line):
    rng = np.random.default_rng(42)
    n, L, h, m = 12, 1.0, 0.01, 4
    a = rng.uniform(0.5, 1.5, n)
    p = SimParams(L=L, h=h, mu1=2.0, mu2=1.0, xi=1.5, a_profile=CoefficientProfile.tabulated(a), n=n,
                  dt=h / m, t_final=h)
    grid = build_grid(L, n)
    slots = rng.standard_normal((m + 1, n))
    hist = init_history(lambda x, t: slots[int(round(-t / p.dt))], grid, m, h)
    mats = build_imex_matrices(p, SystemVariant("mu"), build_operators(grid))
    u = hist.lag(0).copy()
    new = step(State(u, 0.0), hist, mats, p, SystemVariant("mu"))
    ref = dense_step(u, slots[m], slots[m - 1], grid.dx, p.dt, 2.0 * a, 1.0 * a)
    err = np.max(np.abs(new.values - ref)) / np.max(np.abs(ref))
    ok = err <= 1e-12
    acceptance_line(10, ok, f"n=12 IMEX step vs dense solve: max relative difference {err:.2e} <= 1e-12")
    assert ok
