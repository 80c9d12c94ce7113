"""Cohort effect detection on mortality surfaces via discrete geometry.

Pipeline: ingest a (year x age) death-rate grid, estimate per-point
surface geometry from 3-point stencils (tangents, curvature vectors, a
normal, and directional normal curvatures), aggregate the cohort-versus-
cross curvature mismatch per birth year, then summarize that series
(aggregate dispersion index, peak widths, tail diagnostics).
"""

from __future__ import annotations

from .analytics import (
    CEISeries,
    CohortReport,
    Peak,
    UShapeReport,
    aice,
    cei_series,
    detect_peaks,
    trim_series,
    u_shape_diagnostic,
)
from .errors import (
    AmbiguousNormalError,
    AnalyticsError,
    CohortGeoError,
    ConsistencyError,
    DegenerateStencilError,
    DegenerateTangentError,
    EmptySeriesError,
    FormatError,
    GeometryError,
    IngestError,
    ParameterError,
    QuadratureError,
    SampleSizeError,
    StructuralError,
    SurfaceSizeError,
    UndefinedAiceError,
)
from .geometry import (
    AGE,
    COHORT,
    CROSS,
    DIRECTION_NAMES,
    PERIOD,
    GeometryField,
    GeometryOptions,
    StencilCurve,
    compute_geometry_field,
    compute_point_geometry,
    curvature_vector,
    discrete_parameter,
    discrete_tangent,
    estimate_normal,
    ls_derivative,
    normal_curvature,
    prepare_grid,
)
from .hmd import HmdParseResult, load_hmd, parse_hmd
from .smooth import (
    AnalyticSurface,
    SmoothCurvatureSample,
    cohort_cross_direction,
    cylinder_ridge,
    gaussian_bump,
    gaussian_ridge,
    gompertz_surface,
    materialize_mortality_surface,
    plane,
    product_separable,
    sample_grid,
    smooth_cei,
    smooth_normal_curvature,
    sphere_cap,
)
from .surface import (
    MortalitySurface,
    Sex,
    SurfaceGrid,
    parse_csv_matrix,
    parse_json,
    serialize,
)
from .svgchart import render_series_chart

__version__ = "0.1.0"

__all__ = [
    "AGE",
    "COHORT",
    "CROSS",
    "DIRECTION_NAMES",
    "PERIOD",
    "AmbiguousNormalError",
    "AnalyticSurface",
    "AnalyticsError",
    "CEISeries",
    "CohortGeoError",
    "CohortReport",
    "ConsistencyError",
    "DegenerateStencilError",
    "DegenerateTangentError",
    "EmptySeriesError",
    "FormatError",
    "GeometryError",
    "GeometryField",
    "GeometryOptions",
    "HmdParseResult",
    "IngestError",
    "MortalitySurface",
    "ParameterError",
    "Peak",
    "QuadratureError",
    "SampleSizeError",
    "Sex",
    "SmoothCurvatureSample",
    "StencilCurve",
    "StructuralError",
    "SurfaceGrid",
    "SurfaceSizeError",
    "UShapeReport",
    "UndefinedAiceError",
    "aice",
    "cei_series",
    "cohort_cross_direction",
    "compute_geometry_field",
    "compute_point_geometry",
    "curvature_vector",
    "cylinder_ridge",
    "detect_peaks",
    "discrete_parameter",
    "discrete_tangent",
    "estimate_normal",
    "gaussian_bump",
    "gaussian_ridge",
    "gompertz_surface",
    "load_hmd",
    "ls_derivative",
    "materialize_mortality_surface",
    "normal_curvature",
    "parse_csv_matrix",
    "parse_hmd",
    "parse_json",
    "plane",
    "prepare_grid",
    "product_separable",
    "render_series_chart",
    "sample_grid",
    "serialize",
    "smooth_cei",
    "smooth_normal_curvature",
    "sphere_cap",
    "trim_series",
    "u_shape_diagnostic",
    "__version__",
]
