"""Scenario files: INI sections [model], [numerics], [initial], [checks].

Values are validated eagerly.  Every error names the offending line, and
missing required keys are reported together.
"""

from __future__ import annotations

import configparser
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .model import CoefficientProfile, SimParams
from .stepper import SystemVariant

SECTIONS = ("model", "numerics", "initial", "checks")
REQUIRED = {"model": ("L", "h"), "numerics": ("n", "dt", "t_final"), "initial": ("function",)}
KNOWN = {
    "model": {"name", "L", "h", "mu1", "mu2", "xi", "variant", "nonlinear", "history_kernel",
              "a_kind", "a_amplitude", "a_support", "a_width", "a_table",
              "b_kind", "b_amplitude", "b_support", "b_width", "b_table"},
    "numerics": {"n", "dt", "t_final", "snapshot_stride", "startup_steps", "seed", "adjust_dt", "m_rho"},
    "initial": {"function", "k", "power", "amplitude", "center", "width", "h_norm",
                "history", "history_time", "history_rate"},
    "checks": {"run", "expect", "slack", "observability_T", "family", "eta", "eps", "s",
               "trials", "fit_window", "output"},
}
CHECK_NAMES = ("dissipation", "lyapunov", "envelope", "observability", "dissipativity", "spectrum",
               "decay-fit")
INITIAL_FUNCTIONS = ("sin-mode", "gaussian", "one-minus-cos", "zero")
TIME_FUNCTIONS = ("one", "exp", "cos")
HISTORY_KINDS = ("zero", "constant", "product")


class ConfigError(ConfigurationError):
    """Scenario file problem; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        self.line = line
        where = f"{path}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(where + message)


def spatial_function(name: str, L: float, k: int = 1, power: int = 1, center: Optional[float] = None,
                     width: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Named profile from the built-in library."""
    if name == "sin-mode":
        return lambda x: np.sin(k * math.pi * x / L) ** power
    if name == "gaussian":
        c = 0.5 * L if center is None else center
        w = 0.1 * L if width is None else width
        return lambda x: np.exp(-((x - c) / w) ** 2)
    if name == "one-minus-cos":
        return lambda x: 1.0 - np.cos(x)
    if name == "zero":
        return lambda x: np.zeros_like(x)
    raise ConfigurationError(f"unknown initial function {name!r}; expected one of {INITIAL_FUNCTIONS}")


def time_function(name: str, rate: float = 1.0) -> Callable[[float], float]:
    if name == "one":
        return lambda t: 1.0
    if name == "exp":
        return lambda t: math.exp(rate * t)
    if name == "cos":
        return lambda t: math.cos(rate * t)
    raise ConfigurationError(f"unknown history time function {name!r}; expected one of {TIME_FUNCTIONS}")


@dataclass
class Scenario:
    name: str
    params: SimParams
    variant: SystemVariant
    initial: dict
    checks: tuple[str, ...]
    expect: str = "hold"
    options: dict = field(default_factory=dict)
    seed: int = 42
    output: Optional[str] = None
    path: Optional[str] = None

    def profile(self) -> Callable[[np.ndarray], np.ndarray]:
        ini = self.initial
        return spatial_function(ini["function"], self.params.L, ini["k"], ini["power"],
                                ini["center"], ini["width"])

    def initial_data(self):
        """(u0, z0) on the scenario grid, scaled as requested."""
        from .functionals import h_norm
        from .theory import p6j_constants

        grid = self.params.grid()
        f = self.profile()
        amp = self.initial["amplitude"]
        hist_kind = self.initial["history"]
        g = time_function(self.initial["history_time"] if hist_kind == "product" else "one",
                          self.initial["history_rate"])
        u0 = amp * f(grid.points)

        def z0(x, t, scale=1.0):
            if hist_kind == "zero":
                return np.zeros_like(x)
            return scale * amp * f(x) * g(t)

        target = self.initial["h_norm"]
        if target is not None:
            if target == "half-radius":
                p = self.params
                lc = p6j_constants(p.L, p.h, p.mu1, p.mu2, p.xi)
                if lc is None:
                    raise ConfigurationError("h_norm = half-radius needs L < pi*sqrt(3) and the delay window")
                target = 0.5 * lc.r_max
            family = "aux" if self.variant.tag in ("perturbed", "auxiliary-linear", "fd1") else "mu"
            current = h_norm(u0, lambda x, t: z0(x, t), self.params, family)
            if current == 0:
                raise ConfigurationError("cannot rescale zero initial data to a nonzero H-norm")
            c = float(target) / current
            u0 = c * u0
            return u0, (lambda x, t: z0(x, t, c))
        return u0, z0


class _Reader:
    def __init__(self, path: str, text: str):
        self.path = path
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=path)
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("key outside any [section]", path, exc.lineno) from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ConfigError("malformed line (expected 'key = value')", path, lineno) from None
        self.lines = {}
        section = None
        for i, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            m = re.match(r"^\[(.+)\]$", s)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = i
            elif section and s and s[0] not in "#;" and re.match(r"^[^=:]+[=:]", s):
                key = re.split(r"[=:]", s, 1)[0].strip()
                self.lines[(section, key)] = i

    def line(self, section, key=None):
        return self.lines.get((section, key))

    def check_structure(self):
        for sec in self.cp.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]; expected {list(SECTIONS)}", self.path, self.line(sec))
            for key in self.cp[sec]:
                if key not in KNOWN[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]", self.path, self.line(sec, key))
        missing = [f"[{sec}] {key}" for sec, keys in REQUIRED.items() for key in keys
                   if not (self.cp.has_section(sec) and self.cp.has_option(sec, key))]
        if missing:
            raise ConfigError("missing required keys: " + ", ".join(missing), self.path)

    def raw(self, sec, key, default=None):
        if self.cp.has_section(sec) and self.cp.has_option(sec, key):
            return self.cp[sec][key].strip()
        return default

    def get(self, sec, key, conv, default=None):
        v = self.raw(sec, key)
        if v is None:
            return default
        try:
            return conv(v)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigError(f"bad value for {key!r}: {v!r} ({exc})", self.path, self.line(sec, key)) from None


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(s) for s in v.replace(",", " ").split())


def _int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ValueError("expected an integer")
    return int(f)


def _profile(r: _Reader, prefix: str, L: float) -> CoefficientProfile:
    kind = r.raw("model", f"{prefix}_kind", "constant")
    amp = r.get("model", f"{prefix}_amplitude", float, 0.0)
    line = r.line("model", f"{prefix}_kind") or r.line("model", f"{prefix}_amplitude")
    try:
        if kind == "constant":
            return CoefficientProfile.constant(amp)
        if kind in ("indicator", "smoothed-indicator"):
            sup = r.get("model", f"{prefix}_support", _floats, (0.0, L))
            if len(sup) != 2:
                raise ConfigError(f"{prefix}_support needs two numbers", r.path, r.line("model", f"{prefix}_support"))
            width = r.get("model", f"{prefix}_width", float)
            return CoefficientProfile(kind, amp, sup, None, width)
        if kind == "tabulated":
            return CoefficientProfile.tabulated(r.get("model", f"{prefix}_table", _floats, ()))
        return CoefficientProfile(kind, amp)
    except ConfigError:
        raise
    except ConfigurationError as exc:
        raise ConfigError(str(exc), r.path, line) from None


def parse_scenario(text: str, path: str = "<string>") -> Scenario:
    r = _Reader(path, text)
    r.check_structure()
    L = r.get("model", "L", float)
    adjust = r.get("numerics", "adjust_dt", _bool, True)
    kwargs = dict(
        L=L, h=r.get("model", "h", float),
        mu1=r.get("model", "mu1", float, 0.0), mu2=r.get("model", "mu2", float, 0.0),
        xi=r.get("model", "xi", float, 1.0),
        a_profile=_profile(r, "a", L), b_profile=_profile(r, "b", L),
        n=r.get("numerics", "n", _int), dt=r.get("numerics", "dt", float),
        t_final=r.get("numerics", "t_final", float),
        snapshot_stride=r.get("numerics", "snapshot_stride", _int, 10),
        startup_steps=r.get("numerics", "startup_steps", _int, 2),
        history_kernel=r.raw("model", "history_kernel", "drho"),
    )
    try:
        params = SimParams.aligned(**kwargs) if adjust else SimParams(**kwargs)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), path, r.line("model") or r.line("numerics")) from None
    try:
        nl = r.get("model", "nonlinear", _bool)
        variant = SystemVariant(r.raw("model", "variant", "mu"), nl)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), path, r.line("model", "variant")) from None
    func = r.raw("initial", "function")
    if func not in INITIAL_FUNCTIONS:
        raise ConfigError(f"unknown initial function {func!r}; expected one of {INITIAL_FUNCTIONS}",
                          path, r.line("initial", "function"))
    hn = r.raw("initial", "h_norm")
    if hn is not None and hn != "half-radius":
        hn = r.get("initial", "h_norm", float)
    hist = r.raw("initial", "history", "constant")
    if hist not in HISTORY_KINDS:
        raise ConfigError(f"history must be one of {HISTORY_KINDS}", path, r.line("initial", "history"))
    htime = r.raw("initial", "history_time", "one")
    if htime not in TIME_FUNCTIONS:
        raise ConfigError(f"history_time must be one of {TIME_FUNCTIONS}", path, r.line("initial", "history_time"))
    initial = dict(function=func, k=r.get("initial", "k", _int, 1), power=r.get("initial", "power", _int, 1),
                   amplitude=r.get("initial", "amplitude", float, 1.0),
                   center=r.get("initial", "center", float), width=r.get("initial", "width", float),
                   h_norm=hn, history=hist, history_time=htime,
                   history_rate=r.get("initial", "history_rate", float, 1.0))
    run = tuple(s for s in re.split(r"[,\s]+", r.raw("checks", "run", "")) if s)
    for c in run:
        if c not in CHECK_NAMES:
            raise ConfigError(f"unknown check {c!r}; expected some of {CHECK_NAMES}", path, r.line("checks", "run"))
    expect = r.raw("checks", "expect", "hold")
    if expect not in ("hold", "violate"):
        raise ConfigError("expect must be 'hold' or 'violate'", path, r.line("checks", "expect"))
    fam = r.raw("checks", "family", "mu")
    if fam not in ("mu", "aux"):
        raise ConfigError("family must be 'mu' or 'aux'", path, r.line("checks", "family"))
    options = dict(
        slack=r.get("checks", "slack", float), observability_T=r.get("checks", "observability_T", float),
        family=fam, eta=r.get("checks", "eta", float, 0.5), eps=r.get("checks", "eps", float, 0.25),
        s=r.get("checks", "s", float, 0.0), trials=r.get("checks", "trials", _int, 500),
        fit_window=r.get("checks", "fit_window", _floats), m_rho=r.get("numerics", "m_rho", _int, 20),
    )
    name = r.raw("model", "name") or Path(path).stem
    return Scenario(name, params, variant, initial, run, expect, options,
                    r.get("numerics", "seed", _int, 42), r.raw("checks", "output"), path)


def load_scenario(path) -> Scenario:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", path) from None
    return parse_scenario(text, path)
