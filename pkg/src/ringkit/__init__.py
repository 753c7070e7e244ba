"""ringkit: tree-ring analysis toolkit for wood cross-section images.

Automatic baseline ring detection, two-dimensional ring metrics,
ray-based width measurement, a detection evaluation harness, exchange
formats (annotation JSON, pos, CSV, SVG/HTML reports) and a local HTTP
service for the interactive boundary editor.
"""

from .errors import RingkitError
from .geometry import (
    PolygonStats,
    RingMetricsRow,
    area_excluding,
    circle_similarity,
    compute_ring_metrics,
    enclosed_areas,
    equivalent_ring_width,
    polygon_area_perimeter,
    ring_eccentricity,
)
from .imageproc import (
    DetectorConfig,
    EdgePolarity,
    ForegroundMask,
    GrayImage,
    detect_rings,
    estimate_pith,
    load_image,
    remove_background,
    resize_lanczos,
)
from .measurement import (
    RaySeries,
    RaySpec,
    SeriesComparison,
    compare_series,
    measure_ray,
)
from .evaluation import MatchReport, evaluate_folder, match_detections, nearest_gt
from .model import (
    AnnotationDocument,
    Pith,
    PithMethod,
    Point2,
    RingBoundary,
    ScaleCalibration,
    ScaleSource,
    ShapeKind,
    Violation,
    resample_boundary,
    sort_rings,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationDocument",
    "DetectorConfig",
    "EdgePolarity",
    "ForegroundMask",
    "GrayImage",
    "MatchReport",
    "Pith",
    "PithMethod",
    "Point2",
    "PolygonStats",
    "RaySeries",
    "RaySpec",
    "RingBoundary",
    "RingMetricsRow",
    "RingkitError",
    "ScaleCalibration",
    "ScaleSource",
    "SeriesComparison",
    "ShapeKind",
    "Violation",
    "area_excluding",
    "circle_similarity",
    "compare_series",
    "compute_ring_metrics",
    "detect_rings",
    "enclosed_areas",
    "equivalent_ring_width",
    "estimate_pith",
    "evaluate_folder",
    "load_image",
    "match_detections",
    "measure_ray",
    "nearest_gt",
    "polygon_area_perimeter",
    "remove_background",
    "resample_boundary",
    "resize_lanczos",
    "ring_eccentricity",
    "sort_rings",
    "validate",
]
