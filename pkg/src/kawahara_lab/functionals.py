"""Energies, Lyapunov functionals and the discrete checks built on them.

Time derivatives in the checks pair the forward difference
(F(t_{k+1}) − F(t_k))/dt with dissipation channels evaluated at the step
midpoint ū = (u^k + u^{k+1})/2.  Crank–Nicolson satisfies the quadratic
energy balance exactly in that pairing, so the residual is the genuine
splitting error rather than the O(1) mismatch that appears when the stiff,
undamped high modes of the ∂x⁵ term are sampled at grid times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .delay import DelayHistory, rho_integral, rho_weights, slot_integrals
from .discretization import SpatialGrid, State, build_grid, derivative_operator, trace_vector
from .errors import ConfigurationError, DimensionError
from .model import SimParams, cdelay_holds

ENERGY_KINDS = ("fd1", "mu", "xi")
FAMILIES = ("mu", "aux")

STEP_FIELDS = ("t", "E_l2", "E_fd1", "E_mu", "E_xi", "V1", "V2_mu", "V2_aux",
               "uxx0_sq", "damp_a", "damp_b", "damp_delay_a", "damp_delay_b", "max_abs")
INTERVAL_FIELDS = ("uxx0_sq_mid", "damp_a_mid", "damp_b_mid", "damp_delay_a_mid", "damp_delay_b_mid",
                   "num_diss_mid")

# energy that each variant is expected to dissipate
VARIANT_ENERGY = {"fd1": "E_fd1", "mu": "E_mu", "linear-mu": "E_mu", "perturbed": "E_xi",
                  "auxiliary-linear": "E_xi", "undamped-linear": "E_l2"}


def _xi_kernel(params: SimParams) -> str:
    return "uniform" if params.history_kernel == "drho" else "rho"


def energy(state: State, hist: DelayHistory, params: SimParams, which: str = "mu",
           grid: Optional[SpatialGrid] = None) -> float:
    """½∫u² plus the weighted delay integral of the chosen energy."""
    if which not in ENERGY_KINDS:
        raise ConfigurationError(f"unknown energy {which!r}; expected one of {ENERGY_KINDS}")
    g = grid if grid is not None else params.grid()
    a, b = params.coefficients(g)
    u = state.values
    base = 0.5 * g.integrate(u * u)
    if which == "fd1":
        return base + 0.5 * params.h * rho_integral(hist, b)
    if which == "mu":
        return base + 0.5 * params.xi * rho_integral(hist, a)
    return base + 0.5 * params.xi * params.h * rho_integral(hist, b, _xi_kernel(params))


def h_weight(params: SimParams, family: str = "mu", grid: Optional[SpatialGrid] = None) -> float:
    """Delay weight of the state-space norm: ξ‖a‖∞ (mu) or hξ‖b‖∞ (aux)."""
    a, b = params.coefficients(grid)
    if family == "mu":
        return params.xi * float(np.max(a))
    return params.h * params.xi * float(np.max(b))


def h_norm_history(hist: DelayHistory, params: SimParams, family: str = "mu") -> float:
    """‖(u, z)‖_H of the state held in a history buffer."""
    u = hist.lag(0)
    ones = np.ones(hist.n)
    sq = hist.dx * float(u @ u) + h_weight(params, family) * rho_integral(hist, ones)
    return math.sqrt(sq)


def h_norm(u0: np.ndarray, z0, params: SimParams, family: str = "mu") -> float:
    """‖(u₀, z₀)‖_H with z₀ sampled on the run's delay slots."""
    from .delay import init_history

    grid = params.grid()
    hist = init_history(z0, grid, params.delay_steps, params.h, u0)
    return h_norm_history(hist, params, family)


def lyapunov(state: State, hist: DelayHistory, params: SimParams, alpha: float, beta: float,
             family: str = "mu", grid: Optional[SpatialGrid] = None) -> float:
    """V = E + α∫x·u² + β·V₂ with the (1 − ρ) delay kernel in V₂."""
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown Lyapunov family {family!r}")
    if alpha < 0 or beta < 0:
        raise ConfigurationError(f"alpha and beta must be nonnegative, got {alpha}, {beta}")
    g = grid if grid is not None else params.grid()
    a, b = params.coefficients(g)
    u = state.values
    v1 = g.integrate(g.points * u * u)
    if family == "mu":
        e = energy(state, hist, params, "mu", g)
        v2 = 0.5 * params.xi * rho_integral(hist, a, "one-minus-rho")
    else:
        e = energy(state, hist, params, "xi", g)
        v2 = 0.5 * params.h * rho_integral(hist, b, "one-minus-rho")
    return e + alpha * v1 + beta * v2


@dataclass
class EnergyTrace:
    """Per-step functionals plus per-interval midpoint dissipation channels.

    Step arrays have one entry per time level; ``*_mid`` arrays have one entry
    per step interval [t_k, t_{k+1}].
    """

    variant: str
    dt: float
    data: dict = field(default_factory=dict)

    def __getattr__(self, name):
        data = self.__dict__.get("data", {})
        if name in data:
            return data[name]
        raise AttributeError(name)

    def __len__(self):
        return len(self.data["t"])

    @property
    def n_intervals(self) -> int:
        return len(self.data["uxx0_sq_mid"])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STEP_FIELDS + INTERVAL_FIELDS)
            K = len(self)
            for k in range(K):
                row = [fmt(self.data[f][k]) for f in STEP_FIELDS]
                if k < K - 1:
                    row += [fmt(self.data[f][k]) for f in INTERVAL_FIELDS]
                else:
                    row += [""] * len(INTERVAL_FIELDS)
                w.writerow(row)

    @classmethod
    def read_csv(cls, path, variant: str = "mu") -> "EnergyTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigurationError(f"{path}: empty trace")
        data = {f: np.array([float(r[f]) for r in rows]) for f in STEP_FIELDS if f in rows[0]}
        for f in INTERVAL_FIELDS:
            if f in rows[0]:
                data[f] = np.array([float(r[f]) for r in rows[:-1]])
        t = data["t"]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(variant, dt, data)


def fmt(v: float) -> str:
    """17 significant digits, the round-trip precision of a double."""
    return format(float(v), ".17g")


class TraceRecorder:
    """Accumulates an :class:`EnergyTrace` during a run."""

    def __init__(self, params: SimParams, variant: str, grid: SpatialGrid):
        self.params = params
        self.variant = variant
        self.grid = grid
        self.a, self.b = params.coefficients(grid)
        self.g = trace_vector(grid)
        m = params.delay_steps
        self.w_uniform = rho_weights(m, "uniform")
        self.w_omr = rho_weights(m, "one-minus-rho")
        self.w_xi = rho_weights(m, _xi_kernel(params))
        self.cols = {f: [] for f in STEP_FIELDS + INTERVAL_FIELDS}

    def record_state(self, hist: DelayHistory) -> None:
        p, g = self.params, self.grid
        u = hist.lag(0)
        zm = hist.lag(hist.m)
        ia = slot_integrals(hist, self.a)
        ib = slot_integrals(hist, self.b)
        l2 = 0.5 * g.integrate(u * u)
        c = self.cols
        c["t"].append(hist.time)
        c["E_l2"].append(l2)
        c["E_fd1"].append(l2 + 0.5 * p.h * (self.w_uniform @ ib))
        c["E_mu"].append(l2 + 0.5 * p.xi * (self.w_uniform @ ia))
        c["E_xi"].append(l2 + 0.5 * p.xi * p.h * (self.w_xi @ ib))
        c["V1"].append(g.integrate(g.points * u * u))
        c["V2_mu"].append(0.5 * p.xi * (self.w_omr @ ia))
        c["V2_aux"].append(0.5 * p.h * (self.w_omr @ ib))
        c["uxx0_sq"].append(float(self.g @ u) ** 2)
        c["damp_a"].append(ia[0])
        c["damp_b"].append(ib[0])
        c["damp_delay_a"].append(ia[-1])
        c["damp_delay_b"].append(ib[-1])
        c["max_abs"].append(float(np.max(np.abs(u))))

    def record_interval(self, flux_states: list, z_mid: np.ndarray, num_diss: float = 0.0) -> None:
        """Dissipation channels of one step, averaged over the given states."""
        g, c = self.grid, self.cols
        k = len(flux_states)
        c["uxx0_sq_mid"].append(sum(float(self.g @ v) ** 2 for v in flux_states) / k)
        c["damp_a_mid"].append(sum(g.integrate(self.a * v * v) for v in flux_states) / k)
        c["damp_b_mid"].append(sum(g.integrate(self.b * v * v) for v in flux_states) / k)
        c["damp_delay_a_mid"].append(g.integrate(self.a * z_mid * z_mid))
        c["damp_delay_b_mid"].append(g.integrate(self.b * z_mid * z_mid))
        c["num_diss_mid"].append(num_diss)

    def finish(self) -> EnergyTrace:
        data = {k: np.asarray(v, dtype=float) for k, v in self.cols.items()}
        return EnergyTrace(self.variant, self.params.dt, data)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one discrete inequality check.

    ``worst`` is the largest value of (lhs − rhs); the check passes when it
    does not exceed ``slack``.
    """

    name: str
    worst: float
    t_worst: float
    slack: float
    passed: bool
    violations: int = 0
    detail: str = ""

    def row(self) -> list:
        return [self.name, fmt(self.worst), fmt(self.t_worst), fmt(self.slack),
                "pass" if self.passed else "fail"]


CHECK_HEADER = ["name", "worst_violation", "t_worst", "slack", "status"]


def default_slack(trace: EnergyTrace, energy0: float) -> float:
    return max(1e-8, 1e-3 * trace.dt * energy0)


def _report(name: str, excess: np.ndarray, t: np.ndarray, slack: float, detail: str = "") -> CheckReport:
    if excess.size == 0:
        return CheckReport(name, 0.0, float(t[0]) if t.size else 0.0, slack, True, 0, detail)
    k = int(np.argmax(excess))
    worst = float(excess[k])
    nviol = int(np.sum(excess > slack))
    return CheckReport(name, worst, float(t[k]), slack, nviol == 0, nviol, detail)


def _rate(trace: EnergyTrace, field_name: str) -> tuple[np.ndarray, np.ndarray]:
    f = trace.data[field_name]
    t = trace.data["t"]
    if len(f) < 2:
        return np.zeros(0), np.zeros(0)
    return np.diff(f) / trace.dt, 0.5 * (t[1:] + t[:-1])


def dissipation_check(trace: EnergyTrace, params: SimParams, variant: Optional[str] = None,
                      slack: Optional[float] = None, tol_identity: Optional[float] = None) -> CheckReport:
    """Discrete energy dissipation law of the variant that produced ``trace``.

    * undamped-linear: dE/dt ≤ 0 and |dE/dt + ½u_xx(0)² + D| ≤ tol_identity,
      D being the recorded numerical dissipation of start-up steps (zero on
      Crank–Nicolson steps).
    * mu, linear-mu: dE/dt ≤ −C₀[u_xx(0)² + ∫au² + ∫au²(t−h)] when the delay
      window holds, otherwise only dE/dt ≤ 0 is tested.
    * fd1: dE/dt ≤ −½u_xx(0)² − ∫au² + ∫bu² (Young's inequality on the
      delayed product).
    * perturbed, auxiliary-linear: dE/dt ≤ −½u_xx(0)² − ∫au²
      − ((ξ−1)/2)[∫bu² + ∫bu²(t−h)].
    """
    from .theory import c0 as c0_fn

    if variant is not None and variant != trace.variant:
        raise ConfigurationError(f"trace comes from variant {trace.variant!r}, not {variant!r}")
    tag = trace.variant
    e_field = VARIANT_ENERGY[tag]
    e0 = float(trace.data[e_field][0]) if len(trace) else 0.0
    if slack is None:
        slack = default_slack(trace, e0)
    rate, tm = _rate(trace, e_field)
    d = trace.data
    if rate.size == 0:
        return _report(f"dissipation[{tag}]", rate, tm, slack)
    uxx = d["uxx0_sq_mid"]
    if tag == "undamped-linear":
        mono = _report("dissipation[undamped-linear]", rate, tm, slack)
        tol = tol_identity if tol_identity is not None else 1e-2 * max(e0, 1.0)
        resid = np.abs(rate + 0.5 * uxx + d["num_diss_mid"])
        ident = _report("energy-identity", resid, tm, tol)
        passed = mono.passed and ident.passed
        return CheckReport(mono.name, mono.worst, mono.t_worst, slack, passed,
                           mono.violations + ident.violations,
                           f"identity residual {ident.worst:.3e} at t={ident.t_worst:.4g} (tol {tol:.1e})")
    if tag in ("mu", "linear-mu"):
        C0 = c0_fn(params.h, params.mu1, params.mu2, params.xi)
        if C0 is None:
            bound = np.zeros_like(rate)
            detail = "delay window violated: testing monotonicity only"
        else:
            bound = -C0 * (uxx + d["damp_a_mid"] + d["damp_delay_a_mid"])
            detail = f"C0={C0:.17g}"
    elif tag == "fd1":
        bound = -0.5 * uxx - d["damp_a_mid"] + d["damp_b_mid"]
        detail = ""
    else:
        q = 0.5 * (params.xi - 1.0)
        bound = -0.5 * uxx - d["damp_a_mid"] - q * (d["damp_b_mid"] + d["damp_delay_b_mid"])
        detail = f"xi={params.xi:g}"
    return _report(f"dissipation[{tag}]", rate - bound, tm, slack, detail)


def lyapunov_series(trace: EnergyTrace, alpha: float, beta: float, family: str = "mu") -> np.ndarray:
    d = trace.data
    if family == "mu":
        return d["E_mu"] + alpha * d["V1"] + beta * d["V2_mu"]
    return d["E_xi"] + alpha * d["V1"] + beta * d["V2_aux"]


def lyapunov_decay_check(trace: EnergyTrace, params: SimParams, alpha: float, beta: float,
                         gamma: float, family: str = "mu", slack: Optional[float] = None,
                         r: Optional[float] = None) -> CheckReport:
    """Discrete V' + 2γV ≤ slack, with V' forward-differenced and V averaged over each step.

    (α, β) must lie in the admissible region of the family; γ is not
    restricted so that over-optimistic rates can be shown to fail.
    """
    from .theory import admissible_alpha_beta

    if family not in FAMILIES:
        raise ConfigurationError(f"unknown Lyapunov family {family!r}")
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    ok, why = admissible_alpha_beta(params, alpha, beta, family, r)
    if not ok:
        raise ConfigurationError(f"inadmissible Lyapunov constants: {why}")
    V = lyapunov_series(trace, alpha, beta, family)
    if slack is None:
        slack = default_slack(trace, float(V[0]) if V.size else 0.0)
    if V.size < 2:
        return _report(f"lyapunov[{family}]", np.zeros(0), trace.data["t"], slack)
    lhs = np.diff(V) / trace.dt + gamma * (V[1:] + V[:-1])
    tm = 0.5 * (trace.data["t"][1:] + trace.data["t"][:-1])
    return _report(f"lyapunov[{family}]", lhs, tm, slack, f"alpha={alpha:.6g} beta={beta:.6g} gamma={gamma:.6g}")


def envelope_check(trace: EnergyTrace, kappa: float, gamma: float, which: str = "E_mu",
                   factor: float = 1.05) -> CheckReport:
    """E(t) ≤ factor·κ·E(0)·e^{−2γt} at every recorded time (relative excess reported)."""
    E = trace.data[which]
    t = trace.data["t"]
    env = factor * kappa * E[0] * np.exp(-2.0 * gamma * t)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(env > 0, E / env - 1.0, 0.0)
    return _report(f"envelope[{which}]", rel, t, 0.0)


@dataclass(frozen=True)
class ObservabilityResult:
    ratio: float
    energy0: float
    denominator: float
    status: str  # "ok", "degenerate" or "unobservable"


def observability_ratio(trace: EnergyTrace, params: SimParams, T: float,
                        which: str = "E_mu") -> ObservabilityResult:
    """E(0) / ∫₀ᵀ[u_xx(0)² + ∫au² + ∫au²(t−h)] dt, integrals from midpoint channels."""
    t = trace.data["t"]
    if T > t[-1] + 1e-9 * max(1.0, T):
        raise ConfigurationError(f"T={T} exceeds the trace horizon {t[-1]}")
    k = int(round(T / trace.dt))
    d = trace.data
    den = trace.dt * float(np.sum(d["uxx0_sq_mid"][:k] + d["damp_a_mid"][:k] + d["damp_delay_a_mid"][:k]))
    e0 = float(d[which][0])
    if den > 0:
        return ObservabilityResult(e0 / den, e0, den, "ok")
    if e0 > 0:
        return ObservabilityResult(math.inf, e0, den, "unobservable")
    return ObservabilityResult(math.nan, e0, den, "degenerate")


def _second_derivative(grid: SpatialGrid) -> np.ndarray:
    n = grid.n
    D2 = (np.diag(np.full(n - 1, 1.0), -1) - 2.0 * np.eye(n) + np.diag(np.full(n - 1, 1.0), 1))
    return D2 / grid.dx ** 2


def _time_integral(f: np.ndarray, T: float) -> float:
    if f.size < 2:
        return 0.0
    return float(np.trapezoid(f, dx=T / (f.size - 1)))


def norm_B(y: np.ndarray, grid: SpatialGrid, T: float) -> float:
    """max_t ‖y‖ + (∫₀ᵀ‖y‖²_{H²} dt)^{1/2} for samples y[k, i] on a uniform time grid."""
    d1 = derivative_operator(grid, 1).to_dense()
    d2 = _second_derivative(grid)
    l2 = grid.dx * np.sum(y * y, axis=1)
    yx, yxx = y @ d1.T, y @ d2.T
    h2 = l2 + grid.dx * np.sum(yx * yx, axis=1) + grid.dx * np.sum(yxx * yxx, axis=1)
    return float(np.sqrt(l2.max()) + math.sqrt(_time_integral(h2, T)))


def bilinear_sides(u: np.ndarray, v: np.ndarray, grid: SpatialGrid, T: float) -> tuple[float, float]:
    """(∫₀ᵀ‖uu_x − vv_x‖dt, √2·T^{1/4}(‖u‖_B + ‖v‖_B)‖u − v‖_B)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 2 or u.shape[1] != grid.n:
        raise DimensionError(f"trajectories {u.shape} and {v.shape} do not share the grid of size {grid.n}")
    d1 = derivative_operator(grid, 1).to_dense()
    diff = u * (u @ d1.T) - v * (v @ d1.T)
    lhs = _time_integral(np.sqrt(grid.dx * np.sum(diff * diff, axis=1)), T)
    rhs = math.sqrt(2.0) * T ** 0.25 * (norm_B(u, grid, T) + norm_B(v, grid, T)) * norm_B(u - v, grid, T)
    return lhs, rhs


def bilinear_estimate_check(u: np.ndarray, v: np.ndarray, T: float, grid: SpatialGrid) -> bool:
    lhs, rhs = bilinear_sides(u, v, grid, T)
    return lhs <= rhs * (1.0 + 1e-12) + 1e-300
