"""Metastates of disordered mean-field spin models over finite alphabets.

The pipeline: build a model (``ising_model``, ``potts_model``, ...), find the
global free-energy minimizers (``find_minimizers``), then compute stability
vectors, visibility and metastate weights (``build_metastate_report``).  The
``simulator`` module checks the weights against exact finite-volume Gibbs
measures.
"""

from .exceptions import (
    BudgetExceeded,
    MetastateError,
    NoBracket,
    NonDegeneracy1Violation,
    NonDegeneracy2Violation,
    SolverDidNotConverge,
    TieFractionExceeded,
    ValidationError,
)
from .free_energy import (
    Minimizer,
    SolverOptions,
    find_minimizers,
    global_minimizers,
    mean_field_map,
    phi,
    phi_gradient,
    phi_hessian,
    solve,
    total_mean_field_residual,
)
from .metastate import (
    MetastateReport,
    build_metastate_report,
    check_nondegeneracy2,
    gaussian_sampler,
    metastate,
    stability_vector_direct,
    stability_vector_partition,
    visibility,
    weights_mc,
    weights_two_types,
)
from .model import (
    InteractionFunctional,
    ModelSpec,
    gamma_kernel,
    general_ising_model,
    ising_model,
    free_model,
    make_general_ising,
    make_ising_field_kernels,
    make_polynomial_ising,
    make_potts_field_kernels,
    make_quadratic_ising,
    make_quadratic_potts,
    potts_model,
    relative_entropy,
)
from .simulator import (
    ball_mass,
    empirical_weights,
    exact_empirical_distribution,
    exact_k_marginal,
    exact_total_distribution,
    marginal_distance,
    sample_disorder,
)
from .transitions import phi_reduced_potts, potts_coexistence_beta

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "InteractionFunctional",
    "MetastateError",
    "MetastateReport",
    "Minimizer",
    "ModelSpec",
    "NoBracket",
    "NonDegeneracy1Violation",
    "NonDegeneracy2Violation",
    "SolverDidNotConverge",
    "SolverOptions",
    "TieFractionExceeded",
    "ValidationError",
    "ball_mass",
    "build_metastate_report",
    "check_nondegeneracy2",
    "empirical_weights",
    "exact_empirical_distribution",
    "exact_k_marginal",
    "exact_total_distribution",
    "find_minimizers",
    "free_model",
    "gamma_kernel",
    "gaussian_sampler",
    "general_ising_model",
    "global_minimizers",
    "ising_model",
    "make_general_ising",
    "make_ising_field_kernels",
    "make_polynomial_ising",
    "make_potts_field_kernels",
    "make_quadratic_ising",
    "make_quadratic_potts",
    "marginal_distance",
    "mean_field_map",
    "metastate",
    "phi",
    "phi_gradient",
    "phi_hessian",
    "phi_reduced_potts",
    "potts_coexistence_beta",
    "potts_model",
    "relative_entropy",
    "sample_disorder",
    "solve",
    "stability_vector_direct",
    "stability_vector_partition",
    "total_mean_field_residual",
    "visibility",
    "weights_mc",
    "weights_two_types",
]
