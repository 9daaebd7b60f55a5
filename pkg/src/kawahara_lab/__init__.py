"""Numerical laboratory for the damped, time-delayed Kawahara equation

    u_t + u_x + u_xxx − u_xxxxx + u·u_x + (damping) = 0  on (0, L),
    u(0) = u(L) = u_x(0) = u_x(L) = u_xx(L) = 0,

where the damping combines a(x)·u with a delayed feedback on u(t − h).
"""

from .discretization import BandedOperator, SpatialGrid, State, boundary_trace_uxx0, build_grid, derivative_operator
from .delay import DelayHistory, delayed_state, init_history, push, rho_integral
from .errors import (BlowUpError, ConfigurationError, DimensionError, DomainError, NumericalError,
                     SequencingError, WindowError)
from .model import CoefficientProfile, SimParams, ValidationReport, evaluate_profile, validate
from .stepper import SystemVariant, Trajectory, build_imex_matrices, nonlinear_term, simulate, step
from .functionals import (EnergyTrace, bilinear_estimate_check, dissipation_check, energy, lyapunov,
                          lyapunov_decay_check, observability_ratio)
from .theory import (DecayFit, TheoryConstants, c0, delta_bound, fit_decay, nu_from_eta, nu_from_observability,
                     p6j_constants, p7j_constants, t0_tmin)
from .spectral import AugmentedOperator, assemble, dissipativity_margin, spectral_abscissa

__version__ = "0.1.0"
