"""IMEX time stepping for the damped, delayed Kawahara system.

One step from t_n to t_{n+1} = t_n + dt solves

    (I + dt/2·Λ) u^{n+1} = (I − dt/2·Λ) u^n
                           − dt·N*  − dt·e⊙(u(t_n − h) + u(t_{n+1} − h))/2
                           + dt·(f(t_n) + f(t_{n+1}))/2,

where Λ = ∂x + ∂x³ − ∂x⁵ + diag(d) is the linear part with the undelayed
damping d, e is the delayed feedback coefficient and f an optional source.
N* is the Adams–Bashforth-2 extrapolation of the nonlinearity (explicit
Euler on the first step).  Both delayed samples are already stored in the
history because h ≥ dt, so the delayed term is centered in time without
enlarging the linear solve.

Crank–Nicolson barely damps the stiffest modes (amplification → −1), so
start-up transients in them would linger far below the physical decay.
The first ``startup_steps`` steps are therefore each replaced by two
backward-Euler half steps (Rannacher start).  Backward Euler with step dt/2
has the same matrix as the Crank–Nicolson left-hand side, so no second
factorization is needed and second-order accuracy is retained.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .delay import DelayHistory, HistorySampler, init_history, push
from .discretization import BandedOperator, Operators, SpatialGrid, State, build_operators
from .errors import BlowUpError, ConfigurationError
from .functionals import EnergyTrace, TraceRecorder, fmt
from .model import SimParams

VARIANT_TAGS = ("fd1", "mu", "perturbed", "auxiliary-linear", "linear-mu", "undamped-linear")
_LINEAR_ONLY = ("auxiliary-linear", "linear-mu", "undamped-linear")
BLOWUP_THRESHOLD = 1e6

Source = Callable[[np.ndarray, float], np.ndarray]


class StepSizeWarning(UserWarning):
    """dt exceeds dx (accuracy rule of thumb)."""


@dataclass(frozen=True)
class SystemVariant:
    tag: str
    nonlinearity_on: Optional[bool] = None

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ConfigurationError(f"unknown variant {self.tag!r}; expected one of {VARIANT_TAGS}")
        if self.nonlinearity_on is None:
            object.__setattr__(self, "nonlinearity_on", self.tag not in _LINEAR_ONLY)
        elif self.nonlinearity_on and self.tag in _LINEAR_ONLY:
            raise ConfigurationError(f"variant {self.tag!r} is linear by definition")

    @property
    def trace_tag(self) -> str:
        """Tag used to pick the energy law: linear mu runs behave like linear-mu."""
        if self.tag == "mu" and not self.nonlinearity_on:
            return "linear-mu"
        return self.tag


def variant_coefficients(params: SimParams, variant: SystemVariant,
                         grid: Optional[SpatialGrid] = None) -> tuple[np.ndarray, np.ndarray]:
    """(d, e): undelayed damping and delayed feedback coefficient on the grid."""
    a, b = params.coefficients(grid)
    tag = variant.tag
    if tag == "fd1":
        return a, b
    if tag in ("mu", "linear-mu"):
        return params.mu1 * a, params.mu2 * a
    if tag in ("perturbed", "auxiliary-linear"):
        return a + params.xi * b, b
    z = np.zeros_like(a)
    return z, z.copy()


def nonlinear_term(u, grid: SpatialGrid, d1: Optional[BandedOperator] = None) -> np.ndarray:
    """(1/3)[u⊙D₁u + D₁(u²)], consistent with u·u_x and orthogonal to u."""
    v = u.values if isinstance(u, State) else np.asarray(u, dtype=float)
    if d1 is None:
        from .discretization import derivative_operator
        d1 = derivative_operator(grid, 1)
    return (v * d1.matvec(v) + d1.matvec(v * v)) / 3.0


@dataclass
class ImexMatrices:
    lhs: BandedOperator
    rhs: BandedOperator
    llin: BandedOperator
    damping: np.ndarray
    delayed: np.ndarray
    ops: Operators
    dt: float


def build_imex_matrices(params: SimParams, variant: SystemVariant,
                        ops: Optional[Operators] = None) -> ImexMatrices:
    ops = ops if ops is not None else build_operators(params.grid())
    d, e = variant_coefficients(params, variant, ops.grid)
    llin = ops.dispersive() + BandedOperator.diagonal(d, label="damping")
    n = ops.grid.n
    eye = BandedOperator.identity(n)
    lhs = eye + llin.scaled(0.5 * params.dt)
    rhs = eye - llin.scaled(0.5 * params.dt)
    lhs.factorize()
    return ImexMatrices(lhs, rhs, llin, d, e, ops, params.dt)


def _advance(state: State, hist: DelayHistory, mats: ImexMatrices, nonlinear: bool,
             prev_n: Optional[np.ndarray], source: Optional[Source], startup: bool = False):
    """One step, pushed into ``hist``.

    Returns (new state, N(u^n), states at which the step's dissipation is
    evaluated, delayed midpoint, numerical dissipation rate of the step).
    The last is zero for Crank–Nicolson and Σ½‖Δu‖²/dt for the
    backward-Euler half steps.
    """
    grid, dt = mats.ops.grid, mats.dt
    u = state.values
    t_new = hist.time + dt
    z_mid = 0.5 * (hist.lag(hist.m) + hist.lag(hist.m - 1))
    forcing = np.zeros_like(u)
    if np.any(mats.delayed):
        forcing -= mats.delayed * z_mid
    n_now = nonlinear_term(u, grid, mats.ops.d1) if nonlinear else None
    num_diss = 0.0
    if startup:
        half = u
        flux_states = []
        for j in (1, 2):
            f = forcing.copy()
            if nonlinear:
                f -= n_now if j == 1 else nonlinear_term(half, grid, mats.ops.d1)
            if source is not None:
                f += source(grid.points, state.time + 0.5 * j * dt)
            new_half = mats.lhs.solve(half + 0.5 * dt * f)
            num_diss += 0.5 * grid.integrate((new_half - half) ** 2) / dt
            half = new_half
            flux_states.append(half)
        u_new = half
    else:
        rhs = mats.rhs.matvec(u) + dt * forcing
        if nonlinear:
            rhs -= dt * (n_now if prev_n is None else 1.5 * n_now - 0.5 * prev_n)
        if source is not None:
            rhs += 0.5 * dt * (source(grid.points, state.time) + source(grid.points, t_new))
        u_new = mats.lhs.solve(rhs)
        flux_states = [0.5 * (u + u_new)]
    peak = float(np.max(np.abs(u_new))) if np.all(np.isfinite(u_new)) else float("inf")
    if not peak <= BLOWUP_THRESHOLD:
        raise BlowUpError(t_new, peak)
    new = State(u_new, t_new)
    push(hist, new)
    return new, n_now, flux_states, z_mid, num_diss


def step(state: State, hist: DelayHistory, matrices: ImexMatrices, params: SimParams,
         variant: SystemVariant, prev_nonlinear: Optional[np.ndarray] = None,
         source: Optional[Source] = None, startup: bool = False) -> State:
    """Advance one step and push the result into ``hist``.

    Without ``prev_nonlinear`` the nonlinearity is treated by explicit Euler,
    with it by Adams–Bashforth-2.  ``startup=True`` takes the step as two
    backward-Euler half steps instead of Crank–Nicolson.
    """
    if abs(state.time - hist.time) > 1e-9 * max(1.0, abs(hist.time)):
        raise ConfigurationError(f"state time {state.time} does not match history time {hist.time}")
    new, *_ = _advance(state, hist, matrices, variant.nonlinearity_on, prev_nonlinear, source, startup)
    return new


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    grid: SpatialGrid
    history: DelayHistory
    trace: Optional[EnergyTrace]
    params: SimParams
    variant: SystemVariant

    @property
    def final(self) -> State:
        return self.history.current()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            for t, u in zip(self.times, self.states):
                ft = fmt(t)
                for x, val in zip(self.grid.points, u):
                    w.writerow([ft, fmt(x), fmt(val)])


def simulate(params: SimParams, variant: SystemVariant, z0: Optional[HistorySampler] = None,
             u0: Optional[np.ndarray] = None, source: Optional[Source] = None,
             ops: Optional[Operators] = None, record: bool = True) -> Trajectory:
    """Run from t = 0 to t_final.

    ``z0(x, t)`` samples the history on [−h, 0]; ``u0`` (default z0 at t=0)
    is the initial state.
    """
    ops = ops if ops is not None else build_operators(params.grid())
    grid = ops.grid
    if params.dt > grid.dx:
        warnings.warn(f"dt={params.dt:g} > dx={grid.dx:g}", StepSizeWarning, stacklevel=2)
    hist = init_history(z0, grid, params.delay_steps, params.h, u0)
    mats = build_imex_matrices(params, variant, ops)
    recorder = TraceRecorder(params, variant.trace_tag, grid) if record else None
    if recorder:
        recorder.record_state(hist)
    state = hist.current()
    if not np.all(np.isfinite(state.values)):
        raise BlowUpError(0.0, float("inf"))
    times, snaps = [0.0], [state.values.copy()]
    prev_n = None
    stride = params.snapshot_stride
    for k in range(1, params.n_steps + 1):
        state, prev_n, flux_states, z_mid, num_diss = _advance(state, hist, mats, variant.nonlinearity_on, prev_n,
                                                     source, startup=k <= params.startup_steps)
        # exact time grid, no accumulated rounding
        state = State(state.values, k * params.dt)
        hist.time = state.time
        if recorder:
            recorder.record_interval(flux_states, z_mid, num_diss)
            recorder.record_state(hist)
        if k % stride == 0:
            times.append(state.time)
            snaps.append(state.values.copy())
    trace = recorder.finish() if recorder else None
    return Trajectory(np.array(times), np.array(snaps), grid, hist, trace, params, variant)
