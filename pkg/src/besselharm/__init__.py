"""Harmonic analysis for the Bessel operator on (0, inf) with the measure x^{2 lam} dx."""
from .grid import (GridFunction, Interval, LambdaSpace, LogGrid, TailWarning, ball, lp_norm, measure,
                   read_csv, write_csv)
from .special import DomainError, bessel_j, gauss_jacobi, log_gamma, reduced_bessel
from .profiles import Profile
from .kernels import KernelFamily, custom_profile, make_kernel
from .translation import convolve_profiles, translate, translate_values
from .fields import (OperatorField, TimeGrid, commutator_field, convolution_field, convolve, field_rows,
                     read_field_csv)
from .hankel import (ResolutionError, apply_bessel_operator, bochner_riesz_means, hankel_at, hankel_transform,
                     spectral_multiplier)
from .admissibility import check_variation_admissible, check_z_lambda
from .operators import (OperatorHandle, commutator_operator, field_operator, grand_maximal, hardy_operators,
                        hl_maximal, hl_maximal_bounds, kernel_bound_products, maximal, rho_variation,
                        square_function)
from .weights import (DyadicSystem, Weight, a1_characteristic, ap_characteristic, bmo_norm, build_dyadic)
from .sparse import SparseFamily, extract_sparse, sparse_operator

__all__ = [
    "GridFunction", "Interval", "LambdaSpace", "LogGrid", "TailWarning", "ball", "lp_norm", "measure",
    "read_csv", "write_csv", "DomainError", "bessel_j", "gauss_jacobi", "log_gamma", "reduced_bessel",
    "Profile", "KernelFamily", "custom_profile", "make_kernel", "convolve_profiles", "translate",
    "translate_values", "OperatorField", "TimeGrid", "commutator_field", "convolution_field", "convolve",
    "field_rows", "read_field_csv", "ResolutionError", "apply_bessel_operator", "bochner_riesz_means",
    "hankel_at", "hankel_transform", "spectral_multiplier", "check_variation_admissible", "check_z_lambda",
    "OperatorHandle", "commutator_operator", "field_operator", "grand_maximal", "hardy_operators",
    "hl_maximal", "hl_maximal_bounds", "kernel_bound_products", "maximal", "rho_variation",
    "square_function", "DyadicSystem", "Weight", "a1_characteristic", "ap_characteristic", "bmo_norm",
    "build_dyadic", "SparseFamily", "extract_sparse", "sparse_operator",
]
