"""Algebraic and geometric analysis of POMDP state-action frequencies.

Library layout:

- model:    domain types (PomdpModel, Policy, Frequency), validation, file formats
- freq:     exact frequencies, series oracle, values, policy gradients, conditioning
- rational: degree bounds, rational curve fitting, one-state policy lines,
            vertex improvement, monotone improvement paths
- geometry: linear description of the fully observable frequency polytope,
            effective-policy polytope, polynomial feasibility constraints,
            face lattices
- critical: blind-controller critical points, critical-point bounds,
            polar degrees, landscape scans, KKT residuals
- cli:      the `pomdpgeo` command-line interface
"""

from .model import (
    Frequency,
    ModelFormatError,
    PomdpModel,
    Policy,
    ValidationReport,
    Violation,
    compile_graph_source,
    effective_policy,
    load_model_text,
    parse_graph_model,
    parse_model,
    serialize_model,
    transition_kernels,
    validate,
)
from .freq import (
    ErgodicityError,
    GradientBundle,
    ValueBundle,
    conditioning_inverse,
    policy_gradient,
    reward_of,
    state_action_frequency,
    truncated_series_oracle,
    truncation_length,
    value_bundle,
)
from .rational import (
    DegreeCertificate,
    DegreeFitError,
    RationalCurve,
    best_deterministic,
    degree_bound,
    deterministic_policies,
    fit_rational_curve,
    improvement_path,
    interpolation_speed,
    line_degree_certificate,
    reward_curve_on_line,
    vertex_improvement,
)
from .geometry import (
    CertificationError,
    EffectivePolytope,
    FaceLattice,
    FeasibilityReport,
    HalfspaceSystem,
    PolynomialConstraint,
    RankError,
    SizeCapError,
    constraint_polynomials,
    effective_polytope,
    face_lattice,
    feasibility_report,
    kirchhoff_image,
    kirchhoff_residual,
    mdp_polytope,
    model_constraint_polynomials,
    pseudoinverse,
    transfer_inequality,
)
from .critical import (
    BoundInput,
    CriticalSet,
    ScanGrid,
    blind_critical_points,
    critical_point_bound,
    face_critical_bound,
    kkt_residual,
    landscape_scan,
    polar_degree_rank_one,
    polar_degree_terms,
)

__all__ = [
    "Frequency",
    "ModelFormatError",
    "PomdpModel",
    "Policy",
    "ValidationReport",
    "Violation",
    "compile_graph_source",
    "effective_policy",
    "load_model_text",
    "parse_graph_model",
    "parse_model",
    "serialize_model",
    "transition_kernels",
    "validate",
    "ErgodicityError",
    "GradientBundle",
    "ValueBundle",
    "conditioning_inverse",
    "policy_gradient",
    "reward_of",
    "state_action_frequency",
    "truncated_series_oracle",
    "truncation_length",
    "value_bundle",
    "DegreeCertificate",
    "DegreeFitError",
    "RationalCurve",
    "best_deterministic",
    "degree_bound",
    "deterministic_policies",
    "fit_rational_curve",
    "improvement_path",
    "interpolation_speed",
    "line_degree_certificate",
    "reward_curve_on_line",
    "vertex_improvement",
    "CertificationError",
    "EffectivePolytope",
    "FaceLattice",
    "FeasibilityReport",
    "HalfspaceSystem",
    "PolynomialConstraint",
    "RankError",
    "SizeCapError",
    "constraint_polynomials",
    "effective_polytope",
    "face_lattice",
    "feasibility_report",
    "kirchhoff_image",
    "kirchhoff_residual",
    "mdp_polytope",
    "model_constraint_polynomials",
    "pseudoinverse",
    "transfer_inequality",
    "BoundInput",
    "CriticalSet",
    "ScanGrid",
    "blind_critical_points",
    "critical_point_bound",
    "face_critical_bound",
    "kkt_residual",
    "landscape_scan",
    "polar_degree_rank_one",
    "polar_degree_terms",
]
