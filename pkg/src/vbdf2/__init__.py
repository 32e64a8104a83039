"""Variable-step BDF2 time stepping with discrete orthogonal convolution kernels."""

from .errors import (Bdf2Error, DomainError, GridMismatch, InvalidArgument, NumericalFailure,
                     PreconditionError, StateError)
from .integrator import (Bdf2Config, ConsistencyReport, SolveTrace, bdf2_apply, consistency_bound,
                         consistency_errors, dahlquist_march, energy_series, first_step, march,
                         zero_stability_probe)
from .kernels import (Bdf2Kernels, KernelProvider, build_bdf2_kernels, c_r_constant, doc_explicit,
                      doc_recursive, doc_row_sum, doc_tail_sum, orthogonality_defect,
                      psd_min_eigenvalue, quadratic_form, theta_hat)
from .mesh import (R_GRIGORIEFF, R_S1, RatioProfile, TimeMesh, capped_random_mesh, check_s1,
                   gamma_n, geometric_mesh, random_mesh, ratio_profile, uniform_mesh)
from .spatial import FdDirichletOperator, ScalarOperator, SpectralOperator, project_exact

__version__ = "0.1.0"

__all__ = [
    "Bdf2Error",
    "DomainError",
    "GridMismatch",
    "InvalidArgument",
    "NumericalFailure",
    "PreconditionError",
    "StateError",
    "Bdf2Config",
    "ConsistencyReport",
    "SolveTrace",
    "bdf2_apply",
    "consistency_bound",
    "consistency_errors",
    "dahlquist_march",
    "energy_series",
    "first_step",
    "march",
    "zero_stability_probe",
    "Bdf2Kernels",
    "KernelProvider",
    "build_bdf2_kernels",
    "c_r_constant",
    "doc_explicit",
    "doc_recursive",
    "doc_row_sum",
    "doc_tail_sum",
    "orthogonality_defect",
    "psd_min_eigenvalue",
    "quadratic_form",
    "theta_hat",
    "R_GRIGORIEFF",
    "R_S1",
    "RatioProfile",
    "TimeMesh",
    "capped_random_mesh",
    "check_s1",
    "gamma_n",
    "geometric_mesh",
    "random_mesh",
    "ratio_profile",
    "uniform_mesh",
    "FdDirichletOperator",
    "ScalarOperator",
    "SpectralOperator",
    "project_exact",
]
