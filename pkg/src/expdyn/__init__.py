"""Escaping-set experiments for the exponential family exp(z) + a."""

from .continuum import (
    ContinuumApprox,
    HausdorffReport,
    PreimageForest,
    RefinementBudgetError,
    SampledCurve,
    build_continuum,
    build_gamma,
    build_preimage_forest,
    build_Y,
    connectivity_probe,
    density_probe,
    hausdorff_report,
)
from .dynamics import (
    EscapeResult,
    ExpMap,
    Itinerary,
    apply,
    inv_halfplane,
    inv_strip,
    itinerary,
    orbit,
)
from .numerics import (
    EXP_LEDGE,
    INFINITY,
    LogMagnitude,
    PointSet,
    SpherePoint,
    Window,
    chordal_dist,
    eps_components,
    hausdorff_discrete,
    safe_exp,
)
from .rays import Address, RayTrace, classify_path_component, trace_ray

__all__ = [
    "EXP_LEDGE",
    "INFINITY",
    "Address",
    "ContinuumApprox",
    "EscapeResult",
    "ExpMap",
    "HausdorffReport",
    "Itinerary",
    "LogMagnitude",
    "PointSet",
    "PreimageForest",
    "RayTrace",
    "RefinementBudgetError",
    "SampledCurve",
    "SpherePoint",
    "Window",
    "apply",
    "build_Y",
    "build_continuum",
    "build_gamma",
    "build_preimage_forest",
    "chordal_dist",
    "classify_path_component",
    "connectivity_probe",
    "density_probe",
    "eps_components",
    "hausdorff_discrete",
    "inv_halfplane",
    "inv_strip",
    "itinerary",
    "orbit",
    "safe_exp",
    "trace_ray",
]

__version__ = "0.1.0"
