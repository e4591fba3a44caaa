"""Exceptional bound states of truncated non-Hermitian band projectors.

Modules: :mod:`~ebstates.linalg` (biorthogonal eigensolver, guarded solves),
:mod:`~ebstates.model` (lattice model and truncated projector),
:mod:`~ebstates.analysis` (EB classification, spectral flow, scaling),
:mod:`~ebstates.disorder` (seeded disorder ensembles),
:mod:`~ebstates.circuit` (LC + INIC circuit realization) and
:mod:`~ebstates.cli`.
"""
from .analysis import (
    classify,
    entanglement_entropy,
    estimate_lambda_eb,
    eb_values,
    fit_scaling,
    fit_two_point_asymptotics,
    lambda_operator,
    spectral_flow,
)
from .circuit import (
    CircuitSpec,
    build_laplacian,
    drive_response,
    effective_projector,
    eigenvalue_of_freq,
    freq_of_eigenvalue,
    impedance,
    inic_block,
    reconstruct_laplacian,
    sweep,
)
from .disorder import DisorderConfig, perturb, run_ensemble
from .errors import (
    AmbiguousBandError,
    DefectivePointError,
    EBStatesError,
    EigenConvergenceError,
    NearResonanceWarning,
    ResonanceError,
    SingularMatrixError,
)
from .linalg import defectiveness, eigendecompose, eigenvalues, solve_linear
from .model import (
    LatticeModel,
    build_truncated_projector,
    eval_h,
    momentum_grid,
    projector_symbol,
    projector_symbol_numeric,
    two_point_functions,
)

__version__ = "0.1.0"
