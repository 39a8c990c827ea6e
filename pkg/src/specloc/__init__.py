"""Spectral localization for Robin problems in periodically perforated domains.

Finite-element tools for the eigenproblem ``-div(a(x/eps) grad u) = lam u`` in
a perforated square with ``a du/dn + q(x) u = 0`` on the holes, together with
the homogenized cell problem and the limiting harmonic oscillator that
describe ``lam`` as ``eps -> 0``.
"""

from .asymptotics import (
    FullSolveResult,
    StudyConfig,
    StudyReport,
    ansatz_error,
    convergence_study,
    extract_mu,
    fit_rate,
    localization_mass,
    rescale_eigenfunction,
    sandwich_check,
    solve_full,
    trace_identity_check,
)
from .cell_problem import CorrectorSet, corrector_eval, effective_tensor, homogenize, solve_correctors
from .effective import OscillatorSpec, SpectrumList, analytic_spectrum, build_oscillator, numeric_oscillator
from .eigensolve import EigenPair, dense_oracle, smallest_eigenpairs
from .errors import *  # noqa: F401,F403
from .fem import Checker, ConstantMatrix, Laminate, QField
from .geometry import CellGeometry, DomainSpec, EdgeTag, Mesh2D, build_cell_mesh, build_perforated_mesh, measures

__version__ = "0.1.0"
