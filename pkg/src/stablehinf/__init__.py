"""Stable H-infinity weighted sensitivity design for SISO time-delay plants."""

from .controller_synth import (FirBlock, RealizedController, SynthesisResult, VerifyReport,
                               assemble_sensitivity, fir_split, impulse_response,
                               realize_controller, synthesize, verify)
from .factorization import (AssumptionReport, BlaschkeProduct, InnerOuter, check_assumptions,
                            evaluate_factor, factorize)
from .np_design import (BranchAssignment, Interpolant, InterpolationData, PickProblem,
                        build_data, conformal_inverse, conformal_map, find_gamma_star,
                        fit_rational_unit, optimal_interpolant, pick_matrix)
from .quasipoly import DelayTerm, QuasiPoly, classify, conjugate, is_F_system, is_I_system
from .rational import RationalFn
from .zerofinder import ContourBox, count_zeros, default_box, locate_zeros

__version__ = "0.1.0"

__all__ = [
    "FirBlock",
    "RealizedController",
    "SynthesisResult",
    "VerifyReport",
    "assemble_sensitivity",
    "fir_split",
    "impulse_response",
    "realize_controller",
    "synthesize",
    "verify",
    "AssumptionReport",
    "BlaschkeProduct",
    "InnerOuter",
    "check_assumptions",
    "evaluate_factor",
    "factorize",
    "BranchAssignment",
    "Interpolant",
    "InterpolationData",
    "PickProblem",
    "build_data",
    "conformal_inverse",
    "conformal_map",
    "find_gamma_star",
    "fit_rational_unit",
    "optimal_interpolant",
    "pick_matrix",
    "DelayTerm",
    "QuasiPoly",
    "classify",
    "conjugate",
    "is_F_system",
    "is_I_system",
    "RationalFn",
    "ContourBox",
    "count_zeros",
    "default_box",
    "locate_zeros",
]
