import numpy as np
import pytest

from kawahara_lab.errors import ConfigurationError
from kawahara_lab.model import CoefficientProfile, SimParams
from kawahara_lab.spectral import (assemble, delay_weight, dissipativity_margin, natural_shift, numerical_abscissa,
                                   spectral_abscissa)


def params(**kw):
    base = dict(L=3.0, h=1.0, mu1=2.0, mu2=1.0, xi=1.5, a_profile=CoefficientProfile.indicator(1.0, 0.0, 1.5),
                n=20, dt=0.01)
    base.update(kw)
    return SimParams(**base)


def test_structure():
    op = assemble(params(), "mu", 20, 10)
    assert op.matrix.shape == (220, 220)
    # transport rows sum to zero: constants in rho are stationary
    np.testing.assert_allclose(op.matrix[20:].sum(axis=1), 0.0, atol=1e-12)
    assert op.weight[-1] == pytest.approx(1.5 * op.grid.dx / 10)


def test_numerical_abscissa_below_shift():
    p = params()
    op = assemble(p, "mu", 20, 10)
    lam = natural_shift(p)
    assert lam == pytest.approx(0.75)
    assert numerical_abscissa(op) <= lam + 1e-9
    assert dissipativity_margin(op, lam, 200) <= numerical_abscissa(op) - lam + 1e-12


def test_margin_deterministic():
    op = assemble(params(), "mu", 20, 10)
    assert dissipativity_margin(op, 0.5, 50, seed=1) == dissipativity_margin(op, 0.5, 50, seed=1)


def test_abscissa_negative_with_damping_and_zero_without():
    ab = spectral_abscissa(assemble(params(), "mu", 20, 20)).abscissa
    assert ab < 0
    free = params(a_profile=CoefficientProfile.constant(0.0), mu1=0.0, mu2=0.0)
    res = spectral_abscissa(assemble(free, "mu", 20, 10))
    # zero delay feedback: transport block contributes eigenvalue -m/h, u block is damped by the boundary only
    assert res.abscissa < 0 and res.eigenvalues.size == 220


def test_delay_weight_fallback():
    free = params(a_profile=CoefficientProfile.constant(0.0))
    assert delay_weight(free, "mu") == 1.5
    assert delay_weight(free.with_(h=2.0, dt=0.01), "aux") == 3.0


def test_aux_variant():
    p = params(b_profile=CoefficientProfile.constant(0.2))
    op = assemble(p, "aux", 20, 10)
    assert numerical_abscissa(op) <= natural_shift(p, "aux") + 1e-9


def test_errors():
    with pytest.raises(ConfigurationError):
        assemble(params(), "fd1")
    with pytest.raises(ConfigurationError):
        assemble(params(), "mu", 200, 100)
    with pytest.raises(ConfigurationError):
        dissipativity_margin(assemble(params(), "mu", 20, 10), 0.0, 0)
