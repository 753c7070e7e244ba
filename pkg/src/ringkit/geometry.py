"""Polygon engine for the ring metrics: areas, perimeter, equivalent
width, circle similarity, eccentricity, EW/LW decomposition, defect
exclusion.

Conventions (fixed and documented because the source material leaves them
open): the equivalent ring width is computed from *cumulative* enclosed
areas, so it is the radius difference of same-area circles; circle
similarity and eccentricity use the region enclosed by each boundary;
eccentricity phase is measured counterclockwise from the +x image axis
with y pointing down (so 90° is up/"north"), normalized to [0, 360).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import polyclip, primitives
from .errors import (
    DegeneratePolygon,
    EWBoundaryOutOfBand,
    MissingEWBoundary,
    MissingPith,
    MissingScale,
    NegativeArea,
    ZeroPerimeter,
)
from .model import AnnotationDocument, Point2, RingBoundary, ScaleCalibration, ShapeKind

_DEGENERATE_AREA_PX2 = 1e-12


@dataclass(frozen=True)
class PolygonStats:
    """Area, perimeter and centroid of one simple polygon.

    Millimeter fields are None when no scale calibration is available.
    """

    area_px2: float
    perimeter_px: float
    centroid: Point2
    area_mm2: float | None = None
    perimeter_mm: float | None = None


@dataclass(frozen=True)
class RingMetricsRow:
    """Computed metrics for one annual ring (all physical units in mm)."""

    ring_index: int
    annulus_area: float
    cumulative_area: float
    perimeter: float
    equivalent_ring_width: float
    similarity_factor: float
    eccentricity_module: float
    eccentricity_phase: float
    ew_area: float | None = None
    lw_area: float | None = None
    cumulative_ew_area: float | None = None
    excluded_area: float = 0.0
    year_label: int | None = None


def polygon_area_perimeter(
    points, scale: ScaleCalibration | None = None
) -> PolygonStats:
    """Shoelace area, segment-sum perimeter and first-moment centroid.

    The polyline is treated as closed (the segment back to point 0 is
    included in the perimeter); orientation does not matter.
    """
    pts = primitives.as_xy(points)
    if len(pts) < 3:
        raise DegeneratePolygon("polygon needs at least 3 points")
    area = primitives.polygon_area(pts)
    if area < _DEGENERATE_AREA_PX2:
        raise DegeneratePolygon(f"polygon area {area} px^2 below degeneracy threshold")
    perim = primitives.polyline_length(pts, closed=True)
    cx, cy = primitives.polygon_centroid(pts)
    return PolygonStats(
        area_px2=area,
        perimeter_px=perim,
        centroid=Point2(cx, cy),
        area_mm2=scale.px2_to_mm2(area) if scale else None,
        perimeter_mm=scale.px_to_mm(perim) if scale else None,
    )


def _require_scale(doc: AnnotationDocument) -> ScaleCalibration:
    if doc.scale is None:
        raise MissingScale("document has no pixel-to-millimeter calibration")
    return doc.scale


def enclosed_areas(doc: AnnotationDocument) -> list[tuple[float, float]]:
    """(cumulative_area, annulus_area) in mm² per ring, pith-outward.

    cumulative(i) is the area enclosed by boundary i; annulus(i) is the
    difference to the previous boundary (cumulative(-1) := 0).
    """
    scale = _require_scale(doc)
    out = []
    prev = 0.0
    for ring in doc.annual_rings():
        cum = polygon_area_perimeter(ring.as_array(), scale).area_mm2
        out.append((cum, cum - prev))
        prev = cum
    return out


def equivalent_ring_width(cum_prev: float, cum_i: float) -> float:
    """Radius difference of circles with the two cumulative areas."""
    if cum_prev < 0 or cum_i < cum_prev:
        raise NegativeArea(f"need 0 <= prev <= current, got ({cum_prev}, {cum_i})")
    return math.sqrt(cum_i / math.pi) - math.sqrt(cum_prev / math.pi)


def circle_similarity(area: float, perimeter: float) -> float:
    """2·sqrt(pi·A)/P in [0, 1]; equals 1 exactly for a perfect circle.

    The clamp only absorbs <=1e-9 numerical overshoot for near-perfect
    circles; the isoperimetric inequality keeps true values below 1.
    """
    if perimeter <= 0:
        raise ZeroPerimeter(f"perimeter must be positive, got {perimeter}")
    if area < 0:
        raise NegativeArea(f"area must be non-negative, got {area}")
    return min(1.0, max(0.0, 2.0 * math.sqrt(math.pi * area) / perimeter))


def ring_eccentricity(doc: AnnotationDocument, i: int) -> tuple[float, float]:
    """(module mm, phase deg) of centroid(enclosed region of ring i) - pith."""
    scale = _require_scale(doc)
    if doc.pith is None:
        raise MissingPith("eccentricity needs a pith location")
    rings = doc.annual_rings()
    ring = rings[i]
    cx, cy = primitives.polygon_centroid(ring.as_array())
    vx = scale.px_to_mm(cx - doc.pith.center.x)
    vy = scale.px_to_mm(cy - doc.pith.center.y)
    module = math.hypot(vx, vy)
    if module < 1e-9:
        return 0.0, 0.0
    # y grows down in image coordinates; negate so phase runs CCW on screen.
    phase = math.degrees(math.atan2(-vy, vx)) % 360.0
    if phase >= 360.0 - 1e-9:
        phase = 0.0
    return module, phase


def _contains(outer: RingBoundary, inner: RingBoundary) -> bool:
    return primitives.polygon_contains_polygon(outer.as_array(), inner.as_array())


def region_areas(doc: AnnotationDocument, i: int) -> tuple[float, float, float]:
    """(ew_area, lw_area, cumulative_ew_area) in mm² for ring i.

    The earlywood/latewood boundary of year i must be nested between the
    annual boundaries i-1 and i.
    """
    scale = _require_scale(doc)
    rings = doc.annual_rings()
    outer = rings[i]
    inner = rings[i - 1] if i > 0 else None

    candidates = []
    for s in doc.shapes_of_kind(ShapeKind.EARLYWOOD_LATEWOOD):
        if not s.closed or len(s.points) < 3:
            continue
        area = s.enclosed_area_px2()
        lo = inner.enclosed_area_px2() if inner is not None else 0.0
        if not (lo < area < outer.enclosed_area_px2()):
            continue
        if primitives.polylines_cross(s.as_array(), True, outer.as_array(), True) or (
            inner is not None
            and primitives.polylines_cross(s.as_array(), True, inner.as_array(), True)
        ):
            raise EWBoundaryOutOfBand(
                f"earlywood boundary {s.id!r} crosses an annual neighbour of ring {i}"
            )
        if not _contains(outer, s):
            continue
        if inner is not None and not _contains(s, inner):
            continue
        candidates.append((area, s))
    if not candidates:
        raise MissingEWBoundary(f"no earlywood/latewood boundary between rings {i - 1} and {i}")
    ew_boundary = max(candidates)[1]

    cum_ew = polygon_area_perimeter(ew_boundary.as_array(), scale).area_mm2
    cum_prev = (
        polygon_area_perimeter(inner.as_array(), scale).area_mm2 if inner is not None else 0.0
    )
    cum_i = polygon_area_perimeter(outer.as_array(), scale).area_mm2
    return cum_ew - cum_prev, cum_i - cum_ew, cum_ew


def area_excluding(region, defects, scale: ScaleCalibration | None = None) -> float:
    """area(region) - area(region ∩ union(defects)).

    Result is in mm² when a scale is given, px² otherwise. Defects may
    overlap each other and the region arbitrarily.
    """
    pts = primitives.as_xy(region)
    base = polygon_area_perimeter(pts).area_px2
    covered = polyclip.union_intersection_area(pts, [primitives.as_xy(d) for d in defects])
    result_px2 = base - covered
    return scale.px2_to_mm2(result_px2) if scale else result_px2


_EXCLUDABLE = (ShapeKind.DEFECT, ShapeKind.REGION_OF_INTEREST)


def compute_ring_metrics(doc: AnnotationDocument) -> list[RingMetricsRow]:
    """Full metrics table for a sorted document (one row per annual ring).

    EW/LW columns stay None for rings without an earlywood boundary;
    excluded_area sums the defect and region-of-interest overlap with each
    ring's annulus.
    """
    scale = _require_scale(doc)
    rings = doc.annual_rings()
    areas = enclosed_areas(doc)
    defects = [
        s.as_array() for s in doc.shapes if s.kind in _EXCLUDABLE and s.closed and len(s.points) >= 3
    ]

    covered_thru: list[float] = []
    if defects:
        for ring in rings:
            cov_px2 = polyclip.union_intersection_area(ring.as_array(), defects)
            covered_thru.append(scale.px2_to_mm2(cov_px2))

    rows = []
    prev_cum = 0.0
    for i, ring in enumerate(rings):
        cum, annulus = areas[i]
        stats = polygon_area_perimeter(ring.as_array(), scale)
        module, phase = ring_eccentricity(doc, i)
        try:
            ew, lw, cum_ew = region_areas(doc, i)
        except MissingEWBoundary:
            ew = lw = cum_ew = None
        excluded = 0.0
        if defects:
            prev_cov = covered_thru[i - 1] if i > 0 else 0.0
            excluded = max(0.0, covered_thru[i] - prev_cov)
        rows.append(
            RingMetricsRow(
                ring_index=i,
                annulus_area=annulus,
                cumulative_area=cum,
                perimeter=stats.perimeter_mm,
                equivalent_ring_width=equivalent_ring_width(prev_cum, cum),
                similarity_factor=circle_similarity(stats.area_mm2, stats.perimeter_mm),
                eccentricity_module=module,
                eccentricity_phase=phase,
                ew_area=ew,
                lw_area=lw,
                cumulative_ew_area=cum_ew,
                excluded_area=excluded,
                year_label=ring.year_label,
            )
        )
        prev_cum = cum
    return rows
