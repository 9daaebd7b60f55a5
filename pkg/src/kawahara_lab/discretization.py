"""Uniform grid, banded finite-difference derivatives and the u_xx(0) trace.

Interior stencils are the standard centered second-order ones (3, 5 and 7
points for the first, third and fifth derivative).  Points outside the
interior are ghost values expressed through interior samples:

* ∂x   : zero values at x=0 and x=L (Dirichlet).  The matrix is exactly
  skew-symmetric.
* ∂x³  : zero extension beyond the boundary nodes.  This is the skew part of
  the even-reflection closure, so again exactly skew-symmetric.
* ∂x⁵  : left ghosts u₋₁ = u₂/4, u₋₂ = 16u₁ − 3u₂; right ghosts
  u_{n+2} = (8t − 1)u_n − t·u_{n−1}, u_{n+3} = −32u_n + 3u_{n−1} with
  t = 2 − √15/2.  The right rules are exact on (L − x)³, the profile allowed
  by u = u_x = u_xx = 0 at x = L.  With these choices
  ⟨u, D₅u⟩·dx = −½·(g·u)² + (a rank-one nonpositive right-end term),
  where g·u is the discrete trace u_xx(0) returned by
  :func:`boundary_trace_uxx0`.  The discrete L² norm of the undamped linear
  flow therefore obeys the continuous energy law up to a nonpositive
  right-end correction, and no step can create energy.

The price of exact dissipativity is a first-order consistency error in the
first two rows of ∂x⁵ for profiles with u_xx(0) ≠ 0 (the left ghost rule is
exact on x² but not on x³).  Profiles that vanish to high order at both ends
see the full second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.linalg import lapack

from .errors import ConfigurationError, DimensionError, NumericalError

RIGHT_GHOST_T = 2.0 - math.sqrt(15.0) / 2.0

_STENCILS = {
    1: {-1: -0.5, 1: 0.5},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    5: {-3: -0.5, -2: 2.0, -1: -2.5, 1: 2.5, 2: -2.0, 3: 0.5},
}


@dataclass(frozen=True)
class SpatialGrid:
    L: float
    n: int
    dx: float
    points: np.ndarray = field(repr=False)

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoid rule on [0, L] for a field that vanishes at both ends."""
        return float(self.dx * np.sum(f))


def build_grid(L: float, n: int) -> SpatialGrid:
    if int(n) != n or n < 8:
        raise ConfigurationError(f"grid needs n >= 8 interior points (7-point stencils), got {n}")
    if not L > 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    n = int(n)
    dx = L / (n + 1)
    pts = dx * np.arange(1, n + 1)
    pts.setflags(write=False)
    return SpatialGrid(float(L), n, dx, pts)


@dataclass(frozen=True)
class State:
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


class BandedOperator:
    """Square banded matrix with equal lower/upper half-bandwidth.

    Storage follows LAPACK: ``band[k + i - j, j] = A[i, j]``.
    """

    def __init__(self, band: np.ndarray, bandwidth: int, label: str = ""):
        band = np.asarray(band, dtype=float)
        if band.ndim != 2 or band.shape[0] != 2 * bandwidth + 1:
            raise DimensionError("band storage must have 2*bandwidth+1 rows")
        self.band = band
        self.bandwidth = int(bandwidth)
        self.rows = band.shape[1]
        self.label = label
        self._lu = None

    @classmethod
    def from_dense(cls, A: np.ndarray, bandwidth: int, label: str = "") -> "BandedOperator":
        n = A.shape[0]
        k = bandwidth
        band = np.zeros((2 * k + 1, n))
        for d in range(-k, k + 1):
            diag = np.diagonal(A, d)
            if d >= 0:
                band[k - d, d:] = diag
            else:
                band[k - d, : n + d] = diag
        rest = A.copy()
        for d in range(-k, k + 1):
            idx = np.arange(max(0, -d), min(n, n - d))
            rest[idx, idx + d] = 0.0
        if np.any(rest != 0):
            raise DimensionError("matrix has entries outside the requested band")
        return cls(band, k, label)

    @classmethod
    def identity(cls, n: int, bandwidth: int = 0) -> "BandedOperator":
        band = np.zeros((2 * bandwidth + 1, n))
        band[bandwidth] = 1.0
        return cls(band, bandwidth, "identity")

    @classmethod
    def diagonal(cls, d: np.ndarray, bandwidth: int = 0, label: str = "diag") -> "BandedOperator":
        d = np.asarray(d, dtype=float)
        band = np.zeros((2 * bandwidth + 1, d.size))
        band[bandwidth] = d
        return cls(band, bandwidth, label)

    def widened(self, bandwidth: int) -> "BandedOperator":
        if bandwidth < self.bandwidth:
            raise DimensionError("cannot shrink bandwidth")
        pad = bandwidth - self.bandwidth
        band = np.zeros((2 * bandwidth + 1, self.rows))
        band[pad: pad + 2 * self.bandwidth + 1] = self.band
        return BandedOperator(band, bandwidth, self.label)

    def to_dense(self) -> np.ndarray:
        n, k = self.rows, self.bandwidth
        A = np.zeros((n, n))
        for d in range(-k, k + 1):
            idx = np.arange(max(0, -d), min(n, n - d))
            A[idx, idx + d] = self.band[k - d, idx + d]
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.rows:
            raise DimensionError(f"vector of length {x.shape[0]} for operator of size {self.rows}")
        n, k = self.rows, self.bandwidth
        y = np.zeros_like(x)
        for d in range(-k, k + 1):
            lo, hi = max(0, -d), min(n, n - d)
            y[lo:hi] += self.band[k - d, lo + d: hi + d] * x[lo + d: hi + d]
        return y

    __matmul__ = matvec

    def _combine(self, other: "BandedOperator", sign: float) -> "BandedOperator":
        if other.rows != self.rows:
            raise DimensionError("operator sizes differ")
        k = max(self.bandwidth, other.bandwidth)
        a, b = self.widened(k), other.widened(k)
        return BandedOperator(a.band + sign * b.band, k, f"({self.label}{'+' if sign > 0 else '-'}{other.label})")

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scaled(self, c: float) -> "BandedOperator":
        return BandedOperator(c * self.band, self.bandwidth, f"{c:g}*{self.label}")

    def factorize(self) -> None:
        """Banded LU (partial pivoting), cached for :meth:`solve`."""
        k = self.bandwidth
        ab = np.zeros((3 * k + 1, self.rows))
        ab[k:] = self.band
        lu, piv, info = lapack.dgbtrf(ab, k, k)
        if info != 0:
            raise NumericalError(f"banded LU failed for {self.label!r}: LAPACK info={info} "
                                 "(zero pivot, matrix singular)")
        self._lu = (lu, piv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            self.factorize()
        lu, piv = self._lu
        k = self.bandwidth
        x, info = lapack.dgbtrs(lu, k, k, np.asarray(rhs, dtype=float), piv)
        if info != 0:
            raise NumericalError(f"banded solve failed: LAPACK info={info}")
        return x


def _ghost_rules(n: int, order: int) -> tuple[Mapping[int, dict], Mapping[int, dict]]:
    """Ghost node -> {interior node: coefficient}, nodes numbered 1..n."""
    if order == 5:
        t = RIGHT_GHOST_T
        left = {-1: {2: 0.25}, -2: {1: 16.0, 2: -3.0}}
        right = {n + 2: {n: 8.0 * t - 1.0, n - 1: -t}, n + 3: {n: -32.0, n - 1: 3.0}}
        return left, right
    return {}, {}


def derivative_operator(grid: SpatialGrid, order: int) -> BandedOperator:
    """Banded matrix of the discrete ∂x^order (order 1, 3 or 5)."""
    if order not in _STENCILS:
        raise ConfigurationError(f"unsupported derivative order {order}; use 1, 3 or 5")
    n = grid.n
    stencil = _STENCILS[order]
    k = max(stencil)
    left, right = _ghost_rules(n, order)
    A = np.zeros((n, n))
    for i in range(1, n + 1):
        for off, c in stencil.items():
            j = i + off
            if 1 <= j <= n:
                A[i - 1, j - 1] += c
            elif j in left:
                for jj, w in left[j].items():
                    A[i - 1, jj - 1] += c * w
            elif j in right:
                for jj, w in right[j].items():
                    A[i - 1, jj - 1] += c * w
            # remaining outside nodes are zero (boundary values or zero extension)
    A /= grid.dx ** order
    return BandedOperator.from_dense(A, k, f"d{order}")


def trace_vector(grid: SpatialGrid) -> np.ndarray:
    """Row vector g with g·u ≈ u_xx(0) = (8u₁ − u₂)/(2dx²)."""
    g = np.zeros(grid.n)
    g[0] = 4.0 / grid.dx ** 2
    g[1] = -0.5 / grid.dx ** 2
    return g


def boundary_trace_uxx0(state, grid: SpatialGrid) -> float:
    """One-sided estimate of u_xx(0) from u(0) = u_x(0) = 0 and u₁, u₂.

    Exact on x² and x³, hence second order.
    """
    u = state.values if isinstance(state, State) else np.asarray(state, dtype=float)
    if u.shape[0] != grid.n:
        raise DimensionError("state does not match grid")
    return float((8.0 * u[0] - u[1]) / (2.0 * grid.dx ** 2))


@dataclass(frozen=True)
class Operators:
    """The three derivative matrices on one grid."""

    grid: SpatialGrid
    d1: BandedOperator
    d3: BandedOperator
    d5: BandedOperator

    def dispersive(self) -> BandedOperator:
        """Matrix of ∂x + ∂x³ − ∂x⁵."""
        return self.d1 + self.d3 - self.d5


def build_operators(grid: SpatialGrid) -> Operators:
    return Operators(grid, *(derivative_operator(grid, o) for o in (1, 3, 5)))
