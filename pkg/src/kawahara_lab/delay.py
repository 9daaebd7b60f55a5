"""Ring buffer of exact past states: the discrete transport variable z.

Slot at lag k holds u(·, t − k·dt), so z(x, ρ, t) = u(x, t − ρh) is known
exactly at ρ_k = k/m.  No interpolation is ever performed.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .discretization import SpatialGrid, State
from .errors import ConfigurationError, DimensionError, SequencingError

KERNELS = ("uniform", "one-minus-rho", "rho")

HistorySampler = Callable[[np.ndarray, float], np.ndarray]


class DelayHistory:
    """States at times t, t − dt, …, t − h (m + 1 slots)."""

    def __init__(self, slots: np.ndarray, time: float, dt: float, dx: float):
        slots = np.array(slots, dtype=float)
        if slots.ndim != 2 or slots.shape[0] < 2:
            raise DimensionError("history needs at least two slots")
        self.m = slots.shape[0] - 1
        self.n = slots.shape[1]
        self.dt = float(dt)
        self.dx = float(dx)
        # slot index of lag k is (head - k) mod (m+1); initial layout has lag k at index m - k
        self._buf = slots[::-1].copy()
        self.head = self.m
        self.time = float(time)
        self.pushes = 0

    @property
    def h(self) -> float:
        return self.m * self.dt

    @property
    def full(self) -> bool:
        return True

    def lag(self, k: int) -> np.ndarray:
        """Read-only view of u(·, t − k·dt)."""
        if not 0 <= k <= self.m:
            raise SequencingError(f"lag {k} outside 0..{self.m}")
        v = self._buf[(self.head - k) % (self.m + 1)]
        v = v.view()
        v.setflags(write=False)
        return v

    def current(self) -> State:
        return State(self.lag(0), self.time)

    def ordered(self) -> np.ndarray:
        """Array of shape (m+1, n); row k is lag k."""
        idx = (self.head - np.arange(self.m + 1)) % (self.m + 1)
        return self._buf[idx]

    def copy(self) -> "DelayHistory":
        new = DelayHistory.__new__(DelayHistory)
        new.__dict__.update(self.__dict__)
        new._buf = self._buf.copy()
        return new


def init_history(z0: Optional[HistorySampler], grid: SpatialGrid, m: int, h: float,
                 u0: Optional[np.ndarray] = None) -> DelayHistory:
    """Fill slot k with z0(x, −k·h/m).  ``z0=None`` means zero history.

    ``u0`` optionally overrides lag 0 (the initial state need not match the
    history sampler at t = 0).
    """
    if int(m) != m or m < 1:
        raise ConfigurationError(f"number of delay slots must be a positive integer, got {m}")
    m = int(m)
    dt = h / m
    slots = np.zeros((m + 1, grid.n))
    if z0 is not None:
        for k in range(m + 1):
            slots[k] = z0(grid.points, -k * dt)
    if u0 is not None:
        u0 = np.asarray(u0, dtype=float)
        if u0.shape != (grid.n,):
            raise DimensionError("initial state does not match grid")
        slots[0] = u0
    return DelayHistory(slots, 0.0, dt, grid.dx)


def push(hist: DelayHistory, s: State) -> None:
    """Make ``s`` the newest slot, dropping the state at lag m."""
    expected = hist.time + hist.dt
    if abs(s.time - expected) > 1e-9 * max(1.0, abs(expected)):
        raise SequencingError(f"pushed state at t={s.time!r}, expected t={expected!r}")
    if s.values.shape != (hist.n,):
        raise DimensionError("state does not match history width")
    hist.head = (hist.head + 1) % (hist.m + 1)
    hist._buf[hist.head] = s.values
    hist.time = float(s.time)
    hist.pushes += 1


def delayed_state(hist: DelayHistory) -> State:
    """The stored state at t − h."""
    if not hist.full:
        raise SequencingError("history not yet full")
    return State(hist.lag(hist.m), hist.time - hist.h)


def rho_weights(m: int, kernel: str = "uniform") -> np.ndarray:
    """Trapezoid weights in ρ over the m+1 slots, times the kernel K(ρ_k)."""
    if kernel not in KERNELS:
        raise ConfigurationError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    rho = np.arange(m + 1) / m
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    if kernel == "one-minus-rho":
        w *= 1.0 - rho
    elif kernel == "rho":
        w *= rho
    return w


def slot_integrals(hist: DelayHistory, weight: np.ndarray) -> np.ndarray:
    """∫ weight·u²(·, t − k·dt) dx for every lag k."""
    weight = np.asarray(weight, dtype=float)
    if weight.shape != (hist.n,):
        raise DimensionError(f"weight has length {weight.size}, history has {hist.n} points")
    z = hist.ordered()
    return hist.dx * ((z * z) @ weight)


def rho_integral(hist: DelayHistory, weight: np.ndarray, kernel: str = "uniform") -> float:
    """∫₀ᴸ∫₀¹ weight(x)·u²(x, t−ρh)·K(ρ) dρ dx by the trapezoid rule."""
    return float(rho_weights(hist.m, kernel) @ slot_integrals(hist, weight))
