"""Closed-form constants of the decay estimates, and empirical decay fits.

Functions return ``None`` ("flagged absent") when the hypotheses that
produce a constant fail, rather than raising: exploring those regimes is a
supported use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import ConfigurationError, WindowError
from .model import CRITICAL_LENGTH, SimParams, cdelay_holds

PI2 = math.pi ** 2


def c0(h: float, mu1: float, mu2: float, xi: float) -> Optional[float]:
    """min{½, μ₁ − ξ/(2h) − μ₂/2, ξ/(2h) − μ₂/2}; None outside the delay window."""
    if not cdelay_holds(h, mu1, mu2, xi):
        return None
    return min(0.5, mu1 - xi / (2 * h) - mu2 / 2, -mu2 / 2 + xi / (2 * h))


@dataclass(frozen=True)
class LyapunovConstants:
    alpha_max: float
    beta_max: float
    gamma: float
    kappa: float
    alpha: float
    beta: float
    r_max: Optional[float] = None
    r: Optional[float] = None


def r_max_p6j(L: float) -> float:
    return (9 * PI2 - 3 * L * L) / (2 * L ** 1.5 * PI2)


def _p6j_beta_max(h, mu1, mu2, xi):
    return (2 * h / xi) * (mu1 - xi / (2 * h) - mu2 / 2)


def _p6j_alpha_max(L, h, mu1, mu2, xi, beta):
    first = (mu1 - xi / (2 * h) - mu2 / 2 - beta * xi / (2 * h)) / (2 * L * mu1 + L * mu2)
    second = (xi / (2 * h) - mu2 / 2) / (L * mu2) if mu2 > 0 else math.inf
    return min(first, second)


def p6j_gamma(L, h, xi, alpha, beta, r) -> float:
    g1 = (9 * PI2 - 3 * L * L - 2 * L ** 1.5 * r * PI2) * alpha / (3 * L * L * (1 + 2 * L * alpha))
    g2 = beta * xi / (2 * h * (xi * beta + xi))
    return min(g1, g2)


def p6j_constants(L: float, h: float, mu1: float, mu2: float, xi: float,
                  alpha: Optional[float] = None, beta: Optional[float] = None,
                  r: Optional[float] = None) -> Optional[LyapunovConstants]:
    """Lyapunov constants for the nonlinear delayed system.

    Defaults: β = β_max/2, α = α_max(β)/2, r = r_max/2.  ``None`` when
    L ≥ π√3, the delay window fails, or the chosen (α, β, r) leave γ ≤ 0.
    """
    if not (L < CRITICAL_LENGTH and cdelay_holds(h, mu1, mu2, xi)):
        return None
    bmax = _p6j_beta_max(h, mu1, mu2, xi)
    beta = 0.5 * bmax if beta is None else beta
    amax = _p6j_alpha_max(L, h, mu1, mu2, xi, beta)
    alpha = 0.5 * amax if alpha is None else alpha
    rmax = r_max_p6j(L)
    r = 0.5 * rmax if r is None else r
    if not (0 < beta < bmax and 0 < alpha < amax and 0 <= r < rmax):
        return None
    gamma = p6j_gamma(L, h, xi, alpha, beta, r)
    if not gamma > 0:
        return None
    kappa = 1 + max(2 * alpha * L, beta)
    return LyapunovConstants(amax, bmax, gamma, kappa, alpha, beta, rmax, r)


def p7j_constants(L: float, h: float, xi: float, alpha: Optional[float] = None,
                  beta: Optional[float] = None) -> Optional[LyapunovConstants]:
    """Lyapunov constants for the linear auxiliary system (needs ξ > 1, L < π√3)."""
    if not (xi > 1 and L < CRITICAL_LENGTH):
        return None
    amax = (xi - 1) / (2 * L * (1 + 2 * xi))
    alpha = 0.5 * amax if alpha is None else alpha
    bmax = xi - 1 - 2 * alpha * L * (1 + 2 * xi)
    beta = 0.5 * bmax if beta is None else beta
    if not (0 < alpha < amax and 0 < beta < bmax):
        return None
    gamma = min((3 * PI2 - L * L) * alpha / (L * L * (1 + 2 * alpha * L)), beta / (2 * h * (xi + beta)))
    kappa = 1 + max(2 * alpha * L, beta / xi)
    return LyapunovConstants(amax, bmax, gamma, kappa, alpha, beta)


def admissible_alpha_beta(params: SimParams, alpha: float, beta: float, family: str = "mu",
                          r: Optional[float] = None) -> tuple[bool, str]:
    """Whether (α, β) lies in the open admissible region of the family."""
    p = params
    if alpha < 0 or beta < 0:
        return False, "alpha and beta must be nonnegative"
    if family == "mu":
        if not (p.L < CRITICAL_LENGTH and cdelay_holds(p.h, p.mu1, p.mu2, p.xi)):
            return False, "needs L < pi*sqrt(3) and the delay window"
        bmax = _p6j_beta_max(p.h, p.mu1, p.mu2, p.xi)
        if not beta < bmax:
            return False, f"beta={beta:g} >= beta_max={bmax:g}"
        amax = _p6j_alpha_max(p.L, p.h, p.mu1, p.mu2, p.xi, beta)
        if not alpha < amax:
            return False, f"alpha={alpha:g} >= alpha_max={amax:g}"
        if r is not None and not r < r_max_p6j(p.L):
            return False, f"r={r:g} >= r_max"
        return True, ""
    if not (p.xi > 1 and p.L < CRITICAL_LENGTH):
        return False, "needs xi > 1 and L < pi*sqrt(3)"
    amax = (p.xi - 1) / (2 * p.L * (1 + 2 * p.xi))
    if not alpha < amax:
        return False, f"alpha={alpha:g} >= alpha_max={amax:g}"
    bmax = p.xi - 1 - 2 * alpha * p.L * (1 + 2 * p.xi)
    if not beta < bmax:
        return False, f"beta={beta:g} >= beta_max={bmax:g}"
    return True, ""


def _check_eta(eta: float) -> None:
    if not 0 < eta < 1:
        raise ConfigurationError(f"eta must lie in (0, 1), got {eta}")


def t0_value(gamma: float, kappa: float, xi: float, eta: float) -> float:
    _check_eta(eta)
    return math.log(2 * xi * kappa / eta) / (2 * gamma) + 1


def t0_tmin(gamma: float, kappa: float, xi: float, eta: float, nu: float, b_norm: float,
            s: float = 0.0) -> tuple[float, float]:
    """(T₀, T_min) with T₀ = ln(2ξκ/η)/(2γ) + 1 and T_min = −ln(η/2)/ν + (2‖b‖∞/ν + 1)s."""
    T0 = t0_value(gamma, kappa, xi, eta)
    if not 0 <= s < T0:
        raise ConfigurationError(f"s must satisfy 0 <= s < T0={T0}, got {s}")
    Tmin = -math.log(eta / 2) / nu + (2 * b_norm / nu + 1) * s
    return T0, Tmin


def nu_from_eta(T0: float, eta: float, eps: float) -> float:
    """ν = ln(1/(η + ε))/T₀."""
    if not eta + eps < 1:
        raise ConfigurationError(f"eta + eps must be < 1, got {eta + eps}")
    if not (eta > 0 and eps > 0 and T0 > 0):
        raise ConfigurationError("eta, eps and T0 must be positive")
    return math.log(1 / (eta + eps)) / T0


def nu_from_observability(T: float, C: float, C0: float) -> tuple[float, float]:
    """Contraction factor γ = (C/C₀)/(1 + C/C₀) over [0, T] and rate ν = ln(1 + C₀/C)/T."""
    if not (T > 0 and C > 0 and C0 > 0):
        raise ConfigurationError("T, C and C0 must be positive")
    q = C / C0
    return q / (1 + q), math.log(1 + C0 / C) / T


def delta_bound(xi: float, kappa: float, gamma: float, eta: float, eps: float) -> float:
    """Smallness bound on ‖b‖∞ for the perturbed system."""
    if not xi > 1:
        raise ConfigurationError("delta_bound needs xi > 1")
    if not (eta > 0 and eps > 0 and eta + eps < 1):
        raise ConfigurationError("need eta, eps > 0 and eta + eps < 1")
    expo = 0.5 * (3 * xi + 1) * (math.log(2 * xi * kappa / eta) / (2 * gamma) + 2)
    # in logs: the exponent overflows for small gamma
    log_delta = 0.5 * math.log(eps) - 1.5 * math.log(xi) - 0.5 * math.log(kappa) - expo
    return min(math.exp(log_delta), 1.0)


@dataclass(frozen=True)
class TheoryConstants:
    C0: Optional[float] = None
    alpha_max: Optional[float] = None
    beta_max: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    kappa: Optional[float] = None
    r_max: Optional[float] = None
    r: Optional[float] = None
    aux_alpha: Optional[float] = None
    aux_beta: Optional[float] = None
    aux_gamma: Optional[float] = None
    aux_kappa: Optional[float] = None
    T0: Optional[float] = None
    T_min: Optional[float] = None
    nu: Optional[float] = None
    delta: Optional[float] = None

    def items(self):
        return asdict(self).items()


def theory_constants(params: SimParams, eta: float = 0.5, eps: float = 0.25, s: float = 0.0,
                     b_norm: Optional[float] = None) -> TheoryConstants:
    """Every constant available for ``params``; absent ones stay ``None``."""
    p = params
    out = {"C0": c0(p.h, p.mu1, p.mu2, p.xi)}
    lc = p6j_constants(p.L, p.h, p.mu1, p.mu2, p.xi)
    if lc is not None:
        out.update(alpha_max=lc.alpha_max, beta_max=lc.beta_max, alpha=lc.alpha, beta=lc.beta,
                   gamma=lc.gamma, kappa=lc.kappa, r_max=lc.r_max, r=lc.r)
    ac = p7j_constants(p.L, p.h, p.xi)
    if ac is not None:
        out.update(aux_alpha=ac.alpha, aux_beta=ac.beta, aux_gamma=ac.gamma, aux_kappa=ac.kappa)
        if b_norm is None:
            b_norm = float(np.max(p.coefficients()[1]))
        T0 = t0_value(ac.gamma, ac.kappa, p.xi, eta)
        nu = nu_from_eta(T0, eta, eps)
        if 0 <= s < T0:
            out["T_min"] = t0_tmin(ac.gamma, ac.kappa, p.xi, eta, nu, b_norm, s)[1]
        out.update(T0=T0, nu=nu, delta=delta_bound(p.xi, ac.kappa, ac.gamma, eta, eps))
    return TheoryConstants(**out)


@dataclass(frozen=True)
class DecayFit:
    gamma_emp: float
    kappa_emp: float
    window: tuple[float, float]
    residual: float


_ENERGY_FIELD = {"fd1": "E_fd1", "mu": "E_mu", "xi": "E_xi", "l2": "E_l2"}


def fit_decay(trace, which: str = "mu", window: Optional[tuple[float, float]] = None) -> DecayFit:
    """Least-squares fit of ln E(t) = c − 2γt over the window."""
    field = _ENERGY_FIELD.get(which, which)
    t = np.asarray(trace.data["t"])
    E = np.asarray(trace.data[field])
    if window is None:
        window = (0.2 * t[-1], t[-1])
    t0, t1 = window
    tol = 1e-9 * max(1.0, abs(t1))
    sel = (t >= t0 - tol) & (t <= t1 + tol)
    if sel.sum() < 2:
        raise WindowError(f"window [{t0}, {t1}] holds fewer than two samples")
    ts, Es = t[sel], E[sel]
    if np.any(~(Es > 0)):
        raise WindowError("energy not strictly positive in the fit window")
    slope, intercept = np.polyfit(ts, np.log(Es), 1)
    resid = float(np.max(np.abs(np.log(Es) - (slope * ts + intercept))))
    return DecayFit(-slope / 2, math.exp(intercept) / E[0] if E[0] > 0 else math.nan, (float(t0), float(t1)), resid)
