"""Independent reference implementations used as test oracles."""

import math

import numpy as np
from numpy.polynomial import Polynomial

T_RIGHT = 2.0 - math.sqrt(15.0) / 2.0


def extend(u):
    """Pad interior samples with boundary zeros and ghost values (3 per side).

    Ghosts of the fifth-derivative closure; returns (padded, offset) where
    padded[offset + i] is node i (node 0 is x = 0).
    """
    n = u.size
    ext = np.zeros(n + 8)
    off = 3
    ext[off + 1: off + n + 1] = u
    ext[off - 1] = 0.25 * u[1]
    ext[off - 2] = 16.0 * u[0] - 3.0 * u[1]
    ext[off + n + 2] = (8 * T_RIGHT - 1) * u[n - 1] - T_RIGHT * u[n - 2]
    ext[off + n + 3] = -32.0 * u[n - 1] + 3.0 * u[n - 2]
    return ext, off


def apply_d5(u, dx):
    ext, off = extend(u)
    i = np.arange(1, u.size + 1) + off
    s = (-0.5 * ext[i - 3] + 2 * ext[i - 2] - 2.5 * ext[i - 1] + 2.5 * ext[i + 1] - 2 * ext[i + 2]
         + 0.5 * ext[i + 3])
    return s / dx ** 5


def apply_d3(u, dx):
    ext = np.concatenate([np.zeros(2), u, np.zeros(2)])
    i = np.arange(2, u.size + 2)
    return (-0.5 * ext[i - 2] + ext[i - 1] - ext[i + 1] + 0.5 * ext[i + 2]) / dx ** 3


def apply_d1(u, dx):
    ext = np.concatenate([[0.0], u, [0.0]])
    return (ext[2:] - ext[:-2]) / (2 * dx)


def dense(apply, n, dx):
    return np.column_stack([apply(e, dx) for e in np.eye(n)])


def dense_step(u, z_old, z_new, dx, dt, d, e, nonlinear=True, prev_n=None):
    """One Crank–Nicolson/AB2 step written directly with dense matrices."""
    n = u.size
    D1, D3, D5 = dense(apply_d1, n, dx), dense(apply_d3, n, dx), dense(apply_d5, n, dx)
    Lam = D1 + D3 - D5 + np.diag(d)
    rhs = u - 0.5 * dt * Lam @ u - dt * e * 0.5 * (z_old + z_new)
    if nonlinear:
        N = (u * (D1 @ u) + D1 @ (u * u)) / 3.0
        rhs -= dt * (N if prev_n is None else 1.5 * N - 0.5 * prev_n)
    return np.linalg.solve(np.eye(n) + 0.5 * dt * Lam, rhs)


class Manufactured:
    """u(x, t) = cos(2t)·φ(x), φ a polynomial vanishing to sixth order at both ends."""

    def __init__(self, L=2.0, h=0.5, mu1=2.0, mu2=1.0):
        self.L, self.h, self.mu1, self.mu2 = L, h, mu1, mu2
        phi = (Polynomial([0, 1]) * Polynomial([L, -1])) ** 6 * (4 / L ** 2) ** 6 * 0.5
        self.d = [phi.deriv(k) for k in range(6)]

    def exact(self, x, t):
        return math.cos(2 * t) * self.d[0](x)

    def source(self, x, t):
        c, d = math.cos(2 * t), self.d
        u, ux = c * d[0](x), c * d[1](x)
        return (-2 * math.sin(2 * t) * d[0](x) + ux + c * d[3](x) - c * d[5](x) + u * ux
                + self.mu1 * u + self.mu2 * math.cos(2 * (t - self.h)) * d[0](x))


def smooth_pair_field(rng, grid, nt, T):
    """Random space-time field built from modes vanishing with their slope at both ends."""
    x = grid.points
    t = np.linspace(0.0, T, nt)
    field = np.zeros((nt, grid.n))
    for k in range(1, 4):
        phi = np.sin(math.pi * x / grid.L) * np.sin(k * math.pi * x / grid.L)
        for j in range(3):
            field += rng.standard_normal() * np.outer(np.cos(j * math.pi * t / T), phi)
    return field * math.exp(rng.uniform(-2, 2))
