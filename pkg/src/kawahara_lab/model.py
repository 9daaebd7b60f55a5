"""Simulation parameters, coefficient profiles and standing-assumption checks.

Everything here is immutable.  ``SimParams`` enforces the structural
invariants at construction (positive lengths, ``h`` an integer multiple of
``dt``); the theoretical hypotheses are only *reported* by :func:`validate`,
because simulating outside them is a legitimate experiment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .discretization import SpatialGrid, build_grid
from .errors import ConfigurationError, DimensionError, DomainError

PROFILE_KINDS = ("constant", "indicator", "smoothed-indicator", "tabulated")
HISTORY_KERNELS = ("drho", "rho")
CRITICAL_LENGTH = math.pi * math.sqrt(3.0)
_ALIGN_RTOL = 1e-9


class AlignmentWarning(UserWarning):
    """Emitted when ``dt`` is shrunk so that ``h`` becomes a multiple of it."""


@dataclass(frozen=True)
class CoefficientProfile:
    """Nonnegative coefficient a(x) or b(x).

    ``width`` is the transition width of the smoothed indicator; ``None``
    means two grid cells of whatever grid the profile is evaluated on.
    """

    kind: str = "constant"
    amplitude: float = 0.0
    support: Optional[tuple[float, float]] = None
    table: Optional[tuple[float, ...]] = None
    width: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if not math.isfinite(self.amplitude) or self.amplitude < 0:
            raise ConfigurationError(f"profile amplitude must be finite and >= 0, got {self.amplitude}")
        if self.kind in ("indicator", "smoothed-indicator"):
            if self.amplitude <= 0:
                raise ConfigurationError("indicator profiles need a positive amplitude")
            if self.support is None:
                raise ConfigurationError("indicator profiles need a support interval")
            lo, hi = self.support
            if not lo < hi:
                raise ConfigurationError(f"empty support [{lo}, {hi}]")
            object.__setattr__(self, "support", (float(lo), float(hi)))
        if self.kind == "tabulated":
            if self.table is None:
                raise ConfigurationError("tabulated profile needs a table")
            tab = tuple(float(v) for v in self.table)
            if any(not math.isfinite(v) or v < 0 for v in tab):
                raise ConfigurationError("tabulated profile values must be finite and >= 0")
            object.__setattr__(self, "table", tab)
        if self.width is not None and self.width <= 0:
            raise ConfigurationError("transition width must be positive")

    @classmethod
    def constant(cls, amplitude: float) -> "CoefficientProfile":
        return cls("constant", amplitude)

    @classmethod
    def indicator(cls, amplitude: float, lo: float, hi: float, smooth: bool = False,
                  width: Optional[float] = None) -> "CoefficientProfile":
        kind = "smoothed-indicator" if smooth else "indicator"
        return cls(kind, amplitude, (lo, hi), None, width)

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "CoefficientProfile":
        return cls("tabulated", 0.0, None, tuple(values))


def smoothstep(s):
    """C² quintic ramp 6s⁵ − 15s⁴ + 10s³, clamped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def evaluate_profile(p: CoefficientProfile, grid: SpatialGrid) -> np.ndarray:
    """Sample a profile on the interior grid points."""
    x = grid.points
    if p.support is not None:
        lo, hi = p.support
        tol = 1e-12 * max(1.0, grid.L)
        if lo < -tol or hi > grid.L + tol:
            raise DomainError(f"support [{lo}, {hi}] not contained in [0, {grid.L}]")
    if p.kind == "constant":
        return np.full(grid.n, float(p.amplitude))
    if p.kind == "indicator":
        lo, hi = p.support
        return np.where((x >= lo) & (x <= hi), p.amplitude, 0.0)
    if p.kind == "smoothed-indicator":
        lo, hi = p.support
        w = p.width if p.width is not None else 2.0 * grid.dx
        # each edge ramps over [edge - w/2, edge + w/2], value A/2 at the edge
        return p.amplitude * smoothstep((x - lo) / w + 0.5) * smoothstep((hi - x) / w + 0.5)
    table = np.asarray(p.table, dtype=float)
    if table.shape != (grid.n,):
        raise DimensionError(f"table has {table.size} values, grid has {grid.n} points")
    return table.copy()


@dataclass(frozen=True)
class SimParams:
    """Physical, feedback and numerical parameters of one run.

    ``history_kernel`` selects how the delay part of the ξ-weighted energy
    is read: ``"drho"`` integrates in dρ (default), ``"rho"`` inserts an
    extra factor ρ.  ``startup_steps`` is the number of initial steps taken
    with damped backward-Euler half steps.
    """

    L: float
    h: float
    mu1: float = 0.0
    mu2: float = 0.0
    xi: float = 1.0
    a_profile: CoefficientProfile = field(default_factory=CoefficientProfile)
    b_profile: CoefficientProfile = field(default_factory=CoefficientProfile)
    n: int = 100
    dt: float = 0.01
    t_final: float = 1.0
    snapshot_stride: int = 10
    history_kernel: str = "drho"
    startup_steps: int = 2

    def __post_init__(self):
        for name in ("L", "h", "dt", "xi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be finite and > 0, got {v}")
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigurationError(f"t_final must be >= 0, got {self.t_final}")
        if int(self.n) != self.n or self.n < 8:
            raise ConfigurationError(f"n must be an integer >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer")
        if int(self.startup_steps) != self.startup_steps or self.startup_steps < 0:
            raise ConfigurationError("startup_steps must be a nonnegative integer")
        if self.history_kernel not in HISTORY_KERNELS:
            raise ConfigurationError(f"history_kernel must be one of {HISTORY_KERNELS}")
        ratio = self.h / self.dt
        if abs(ratio - round(ratio)) > _ALIGN_RTOL * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigurationError(
                f"h={self.h} is not an integer multiple of dt={self.dt}; use SimParams.aligned")

    @classmethod
    def aligned(cls, **kwargs) -> "SimParams":
        """Build parameters, shrinking ``dt`` to the nearest divisor of ``h`` if needed."""
        h, dt = kwargs["h"], kwargs["dt"]
        if h > 0 and dt > 0:
            ratio = h / dt
            if abs(ratio - round(ratio)) > _ALIGN_RTOL * max(1.0, ratio) or round(ratio) < 1:
                m = max(1, math.ceil(ratio - _ALIGN_RTOL * ratio))
                kwargs["dt"] = h / m
                warnings.warn(f"dt adjusted from {dt!r} to {kwargs['dt']!r} so that h = {m}*dt",
                              AlignmentWarning, stacklevel=2)
        return cls(**kwargs)

    @property
    def delay_steps(self) -> int:
        """m = h / dt."""
        return int(round(self.h / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def grid(self) -> SpatialGrid:
        return build_grid(self.L, self.n)

    def coefficients(self, grid: Optional[SpatialGrid] = None) -> tuple[np.ndarray, np.ndarray]:
        """Sampled (a, b) on the run's grid."""
        g = grid if grid is not None else self.grid()
        return evaluate_profile(self.a_profile, g), evaluate_profile(self.b_profile, g)

    def with_(self, **changes) -> "SimParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ValidationReport:
    cdelay_ok: bool
    length_ok: bool
    supp_condition: str
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.cdelay_ok and self.length_ok


def cdelay_holds(h: float, mu1: float, mu2: float, xi: float) -> bool:
    """Strict window h·μ₂ < ξ < h·(2μ₁ − μ₂)."""
    return h * mu2 < xi < h * (2.0 * mu1 - mu2)


def validate(params: SimParams) -> ValidationReport:
    """Report which standing hypotheses hold.  Never raises on theory violations."""
    p = params
    msgs = []
    cd = cdelay_holds(p.h, p.mu1, p.mu2, p.xi)
    if not cd:
        msgs.append(f"delay window violated: need {p.h * p.mu2:g} < xi={p.xi:g} < {p.h * (2 * p.mu1 - p.mu2):g}")
    length_ok = p.L < CRITICAL_LENGTH
    if not length_ok:
        msgs.append(f"L={p.L:g} is not below pi*sqrt(3)={CRITICAL_LENGTH:.6f}; Lyapunov constants unavailable")
    grid = p.grid()
    a, b = p.coefficients(grid)
    if not np.any(b > 0):
        supp = "no_b"
    elif np.all(a[b > 0] > 0):
        supp = "b_in_a"
    else:
        supp = "b_not_in_a"
        msgs.append("b is active where a vanishes")
    if not np.any(a > 0):
        msgs.append("a vanishes on the whole grid: no localized damping")
    if p.mu1 <= p.mu2:
        msgs.append(f"mu1={p.mu1:g} does not exceed mu2={p.mu2:g}")
    if p.xi <= 1:
        msgs.append(f"xi={p.xi:g} <= 1: auxiliary-system constants unavailable")
    if p.dt > grid.dx:
        msgs.append(f"dt={p.dt:g} exceeds dx={grid.dx:g} (accuracy rule of thumb)")
    return ValidationReport(cd, length_ok, supp, tuple(msgs))
