"""Exterior algebra and numerical checks for De Donder-Weyl field theory."""

from .exterior import (
    Form,
    GradedBasis,
    Metric,
    Multivector,
    VectorField,
    annihilator,
    contract,
    hodge_star,
    involutivity_check,
    is_decomposable,
    lie_bracket,
    schouten_decomposable,
    wedge,
    wedge_vectors,
)
from .phase_space import PhasePoint, PhaseSpaceShape, ScalarField, build_omega, build_omega_vertical, dw_function
from .hamvec import construct_decomposition, enumerate_gauge_freedom, verify_hamvec
from .dynamics import KGParams, PlaneWave, integrate_kg, lift, lift_fields, verify_prop2
from .hjt import SFamily, TMap, check_T_conditions, hj_residual, kg_S, no_go_probe

__version__ = "0.1.0"

__all__ = [
    "Form",
    "GradedBasis",
    "Metric",
    "Multivector",
    "VectorField",
    "annihilator",
    "contract",
    "hodge_star",
    "involutivity_check",
    "is_decomposable",
    "lie_bracket",
    "schouten_decomposable",
    "wedge",
    "wedge_vectors",
    "PhasePoint",
    "PhaseSpaceShape",
    "ScalarField",
    "build_omega",
    "build_omega_vertical",
    "dw_function",
    "construct_decomposition",
    "enumerate_gauge_freedom",
    "verify_hamvec",
    "KGParams",
    "PlaneWave",
    "integrate_kg",
    "lift",
    "lift_fields",
    "verify_prop2",
    "SFamily",
    "TMap",
    "check_T_conditions",
    "hj_residual",
    "kg_S",
    "no_go_probe",
]
