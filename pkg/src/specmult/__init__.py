"""Spectral multipliers of non-negative self-adjoint operators on finite
metric measure spaces: constructions, norm estimates and numerical checks."""
try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from ._validation import (ConstructionError, DomainError, EstimatorError, NonNegativityError,
                          ResolutionError, SpecmultError, WitnessMismatchError)
from .estimates import (DaviesGaffney, NormBracket, check_annular_equivalence,
                        check_complex_time, fit_davies_gaffney, fit_gge, restricted_norm_22,
                        restricted_norm_pq)
from .funcspace import (MultiplierProfile, bessel_norm, dyadic_pieces, hoermander_norm,
                        holder_norm, nq_norm)
from .hardy import (SquareFunction, hardy_norm, make_molecule, molecule_family,
                    square_function)
from .operator import (SpectralDecomposition, SpectralMultiplier, WeightedOperator,
                       build_operator, complex_heat, decompose, heat, regularizer)
from .reports import ExperimentReport, FitReport
from .space import (Ball, DoublingDimension, MetricMeasureSpace, ball, build_space,
                    dyadic_annulus, fit_dimension, product_space)

__all__ = [
    "Ball", "ConstructionError", "DaviesGaffney", "DomainError", "DoublingDimension",
    "EstimatorError", "ExperimentReport", "FitReport", "MetricMeasureSpace",
    "MultiplierProfile", "NonNegativityError", "NormBracket", "ResolutionError",
    "SpecmultError", "SpectralDecomposition", "SpectralMultiplier", "SquareFunction",
    "WeightedOperator", "WitnessMismatchError", "ball", "bessel_norm", "build_operator",
    "build_space", "check_annular_equivalence", "check_complex_time", "complex_heat",
    "decompose", "dyadic_annulus", "dyadic_pieces", "fit_davies_gaffney", "fit_dimension",
    "fit_gge", "hardy_norm", "heat", "hoermander_norm", "holder_norm", "make_molecule",
    "molecule_family", "nq_norm", "product_space", "regularizer", "restricted_norm_22",
    "restricted_norm_pq", "square_function",
]
