"""Tensor-product B-spline surfaces with rounded corners.

Corner classification, curvature and normal diagnostics, L2 fitting with
rounded-corner constraints, and repair of watertight multipatch models.
"""

from .corner import (
    DEFAULT_TOL,
    CornerClassification,
    CornerFrame,
    CornerKind,
    SplineCornerReport,
    Tolerances,
    classify_corner,
    corner_frame,
    spline_corner_conditions,
)
from .diagnostics import (
    ProbeSeries,
    axis_normal_limits,
    cross_norm_asymptotics,
    curvature_integral,
    diagonal_curvature_scale,
    fundamental_forms,
    injectivity_probe,
    normal_convergence_probe,
    sample_fields,
)
from .fitting import CornerConstraintSpec, FitError, FitProblem, FitReport, fit_surface, solve_kkt
from .multipatch import (
    Adjacency,
    EdgeIncompatibilityError,
    MultipatchModel,
    RepairConfig,
    detect_rounded_corners,
    repair_corner,
    repair_model,
    watertightness_check,
)
from .spline import CORNERS, CornerJet, KnotVector, TensorSurface, corner_jet

__all__ = [
    "CORNERS", "DEFAULT_TOL", "Adjacency", "CornerClassification", "CornerConstraintSpec",
    "CornerFrame", "CornerJet", "CornerKind", "EdgeIncompatibilityError", "FitError",
    "FitProblem", "FitReport", "KnotVector", "MultipatchModel", "ProbeSeries", "RepairConfig",
    "SplineCornerReport", "TensorSurface", "Tolerances", "axis_normal_limits", "classify_corner",
    "corner_frame", "corner_jet", "cross_norm_asymptotics", "curvature_integral",
    "detect_rounded_corners", "diagonal_curvature_scale", "fit_surface", "fundamental_forms",
    "injectivity_probe", "normal_convergence_probe", "repair_corner", "repair_model",
    "sample_fields", "solve_kkt", "spline_corner_conditions", "watertightness_check",
]
