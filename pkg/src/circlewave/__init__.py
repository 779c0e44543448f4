"""Scalar reaction-diffusion equations u_t = u_xx + f(t, u, u_x) on the circle.

Modules: ``expr`` (nonlinearity language), ``field`` (grid profiles),
``solver`` (ETDRK4 time stepping), ``zeros`` (zero number), ``symmetry``
(circle-group alignment), ``linear`` (linearized flows and spectra),
``classify`` (recurrent-state classification), ``subshift`` (a symbolic
non-wandering example) and ``cli``.
"""
from .classify import ClassificationReport, classify_autonomous, classify_periodic, omega_limit
from .expr import ExpressionAst, parse_expression, parse_nonlinearity
from .field import GridField, distance, from_function, shift
from .solver import BlowUpError, NumericalFailure, SolverConfig, Trajectory, integrate, poincare_map
from .symmetry import align, estimate_wave_speed, orbit_distance
from .zeros import zero_number, zero_track

__version__ = "0.1.0"
