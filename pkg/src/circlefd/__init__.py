"""Rigorous construction of minimal C1 circle diffeomorphisms with a
measurable fundamental domain, for any irrational rotation number.

The pipeline: certify Diophantine data for alpha (`diophantine`), grow a
digit sequence and its Cantor set of binary codes (`cantor`), stack the
tent-bump cocycle whose Birkhoff sums decay along the set (`cocycle`),
assemble the invariant-by-design measure and conjugate the rotation into
the diffeomorphism F (`conjugacy`), and drive it all from a config through
build / verify / export / inspect commands (`harness`).

All certified quantities are exact rationals or directed-rounded interval
enclosures; no check ever trusts floating point.
"""

from .cantor import (BaseMeasure, CantorCover, DigitSequence,
                     DisjointnessReport, PairDisjointness,
                     build_digit_sequence, cover, mu0_cdf, point_from_code,
                     verify_translate_disjointness)
from .cocycle import (BumpLevel, CocycleStack, birkhoff, birkhoff_range,
                      block_tail_bound, bound_M, build_level, build_stack,
                      bump_value, choose_epsilon, ideal_weight_tail,
                      level_birkhoff, phi, sum_exp_birkhoff)
from .conjugacy import (AlphaContext, Atom, ConjugacyDescriptor,
                        DerivativeSample, DerivativeStudy,
                        FundamentalDomainReport, LinForm, RotationEstimate,
                        WeightedAtomMeasure, assemble_mu, build_conjugacy,
                        build_descriptor, derivative_consistency_study,
                        dyadic_cover_length, F_derivative_check,
                        fundamental_domain_report, rotation_number_estimate)
from .diophantine import (AlphaSpec, ApproximationProfile, ContinuedFraction,
                          build_p, estimate_c_p, expand_alpha, grid_distance,
                          make_profile, min_multiple_dist, parse_alpha_spec)
from .errors import (BudgetExceeded, ConstructionError, DepthTooLarge,
                     DisjointnessUndecided, NotCertifiable,
                     PrecisionExhausted, RationalInput, ToleranceNotMet)
from .harness import BuildConfig, build_artifacts, load_descriptor, main
from .numerics import (CircleArc, CirclePoint, PrecisionReal, circle_dist,
                       exp_enclosure, round_dyadic, unit_dist)

__version__ = "0.1.0"

__all__ = [
    "AlphaContext", "AlphaSpec", "ApproximationProfile", "Atom",
    "BaseMeasure", "BudgetExceeded", "BuildConfig", "BumpLevel",
    "CantorCover", "CircleArc", "CirclePoint", "CocycleStack",
    "ConjugacyDescriptor", "ConstructionError", "ContinuedFraction",
    "DepthTooLarge", "DerivativeSample", "DerivativeStudy", "DigitSequence",
    "DisjointnessReport", "DisjointnessUndecided", "F_derivative_check",
    "FundamentalDomainReport", "LinForm", "NotCertifiable",
    "PairDisjointness", "PrecisionExhausted", "PrecisionReal",
    "RationalInput", "RotationEstimate", "ToleranceNotMet",
    "WeightedAtomMeasure", "assemble_mu", "birkhoff", "birkhoff_range",
    "block_tail_bound", "bound_M", "build_artifacts", "build_conjugacy",
    "build_descriptor", "build_digit_sequence", "build_level", "build_p",
    "build_stack", "bump_value", "choose_epsilon", "circle_dist", "cover",
    "derivative_consistency_study", "dyadic_cover_length", "estimate_c_p",
    "exp_enclosure", "expand_alpha", "fundamental_domain_report",
    "grid_distance", "ideal_weight_tail", "level_birkhoff",
    "load_descriptor", "main", "make_profile", "min_multiple_dist",
    "mu0_cdf", "parse_alpha_spec", "phi", "point_from_code",
    "rotation_number_estimate", "round_dyadic", "sum_exp_birkhoff",
    "unit_dist", "verify_translate_disjointness",
]
