"""Annotation data model: points, calibration, pith, ring boundaries, documents.

All types are immutable values; the operations (`sort_rings`,
`resample_boundary`, `validate`) are pure functions returning new values,
so documents can be processed from any number of workers without locks.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

from . import primitives
from .errors import CrossingBoundaries, DegenerateBoundary, PithOutsideRing

DEFAULT_NODE_BUDGET = 360


class Point2(NamedTuple):
    """Image-space point: x grows right, y grows down, units are pixels."""

    x: float
    y: float


class ScaleSource(str, Enum):
    MANUAL_TWO_POINTS = "manual_two_points"
    METADATA = "metadata"


class PithMethod(str, Enum):
    MANUAL = "manual"
    FOREGROUND_CENTROID = "foreground_centroid"


class ShapeKind(str, Enum):
    ANNUAL = "annual"
    EARLYWOOD_LATEWOOD = "earlywood_latewood"
    DEFECT = "defect"
    REGION_OF_INTEREST = "region_of_interest"


@dataclass(frozen=True)
class ScaleCalibration:
    """Pixel-to-millimeter ratio used by every metric computation."""

    pixels_per_mm: float
    source: ScaleSource = ScaleSource.METADATA

    def __post_init__(self):
        if not (self.pixels_per_mm > 0):
            raise ValueError(f"pixels_per_mm must be positive, got {self.pixels_per_mm}")

    @classmethod
    def from_two_points(cls, p1: Point2, p2: Point2, mm_distance: float) -> "ScaleCalibration":
        if mm_distance <= 0:
            raise ValueError("mm_distance must be positive")
        px = float(np.hypot(p2.x - p1.x, p2.y - p1.y))
        return cls(pixels_per_mm=px / mm_distance, source=ScaleSource.MANUAL_TWO_POINTS)

    def px_to_mm(self, px: float) -> float:
        return px / self.pixels_per_mm

    def px2_to_mm2(self, px2: float) -> float:
        return px2 / self.pixels_per_mm**2


@dataclass(frozen=True)
class Pith:
    center: Point2
    method: PithMethod = PithMethod.MANUAL


@dataclass(frozen=True)
class RingBoundary:
    """Labeled polyline; the unit of editing, detection and matching.

    ``extras`` carries unknown keys from annotation files so round-trips
    are lossless.
    """

    id: str
    points: tuple[Point2, ...]
    closed: bool
    kind: ShapeKind = ShapeKind.ANNUAL
    year_label: int | None = None
    node_budget: int = DEFAULT_NODE_BUDGET
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "points", tuple(Point2(float(p[0]), float(p[1])) for p in self.points)
        )
        if self.node_budget < 1:
            raise ValueError("node_budget must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.float64).reshape(-1, 2)

    def enclosed_area_px2(self) -> float:
        """|shoelace|/2 of the polyline treated as closed."""
        return primitives.polygon_area(self.as_array())


@dataclass(frozen=True)
class AnnotationDocument:
    """Complete per-image record: metadata, scale, pith, and all shapes."""

    image_path: str
    image_size: tuple[int, int]
    scale: ScaleCalibration | None = None
    pith: Pith | None = None
    harvest_year: int | None = None
    shapes: tuple[RingBoundary, ...] = ()
    provenance: dict[str, str] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))

    def annual_rings(self) -> tuple[RingBoundary, ...]:
        """All annual boundaries in document order, open linestrips included."""
        return tuple(s for s in self.shapes if s.kind is ShapeKind.ANNUAL)

    def shapes_of_kind(self, kind: ShapeKind) -> tuple[RingBoundary, ...]:
        return tuple(s for s in self.shapes if s.kind is kind)

    def replace(self, **kw) -> "AnnotationDocument":
        return dataclasses.replace(self, **kw)


_KIND_ORDER = {
    ShapeKind.ANNUAL: 0,
    ShapeKind.EARLYWOOD_LATEWOOD: 1,
    ShapeKind.DEFECT: 2,
    ShapeKind.REGION_OF_INTEREST: 3,
}


def sort_rings(doc: AnnotationDocument) -> AnnotationDocument:
    """Establish the pith-outward ring order every metric assumes.

    Annual closed rings are sorted by strictly increasing enclosed area,
    then year labels are assigned from ``harvest_year`` (outermost ring
    gets the harvest year, decreasing by one inward). Raises
    CrossingBoundaries / PithOutsideRing on malformed input; idempotent on
    valid input.
    """
    annual = [s for s in doc.shapes if s.kind is ShapeKind.ANNUAL]
    others = [s for s in doc.shapes if s.kind is not ShapeKind.ANNUAL]

    closed = [s for s in annual if s.closed]
    if doc.pith is not None:
        px, py = doc.pith.center
        for s in closed:
            if not primitives.point_in_polygon(px, py, s.as_array()):
                raise PithOutsideRing(f"annual ring {s.id!r} does not contain the pith")

    arrays = {s.id: s.as_array() for s in closed}
    for i in range(len(closed)):
        for j in range(i + 1, len(closed)):
            a, b = closed[i], closed[j]
            if primitives.polylines_cross(arrays[a.id], True, arrays[b.id], True):
                raise CrossingBoundaries(f"annual rings {a.id!r} and {b.id!r} cross")

    annual.sort(key=lambda s: (s.enclosed_area_px2(), s.id))
    if doc.harvest_year is not None:
        n = len(annual)
        annual = [
            dataclasses.replace(s, year_label=doc.harvest_year - (n - 1 - i))
            for i, s in enumerate(annual)
        ]

    others.sort(key=lambda s: (_KIND_ORDER[s.kind], s.enclosed_area_px2(), s.id))
    return doc.replace(shapes=tuple(annual) + tuple(others))


def resample_boundary(b: RingBoundary, n: int) -> RingBoundary:
    """Resample to exactly n points equally spaced by arc length.

    Closed boundaries keep the input's point 0; the node budget of the
    result is n so the `|points| == node_budget` invariant holds.
    """
    if len(b.points) < 2:
        raise DegenerateBoundary(f"boundary {b.id!r} has fewer than 2 points")
    if n < 1:
        raise ValueError("n must be positive")
    pts = b.as_array()
    if primitives.polyline_length(pts, b.closed) <= 0:
        raise DegenerateBoundary(f"boundary {b.id!r} has zero length")
    out = primitives.resample_polyline(pts, n, b.closed)
    return dataclasses.replace(
        b, points=tuple(Point2(float(x), float(y)) for x, y in out), node_budget=n
    )


class ViolationCode(str, Enum):
    NON_FINITE = "non_finite"
    TOO_FEW_POINTS = "too_few_points"
    SELF_INTERSECTION = "self_intersection"
    PITH_OUTSIDE_RING = "pith_outside_ring"
    CROSSING_BOUNDARIES = "crossing_boundaries"
    AREA_NOT_INCREASING = "area_not_increasing"
    YEAR_LABEL_MISMATCH = "year_label_mismatch"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    shape_id: str | None
    message: str

    def __str__(self):
        return f"{self.code.value}({self.shape_id}): {self.message}"


def validate(doc: AnnotationDocument) -> list[Violation]:
    """Collect every invariant violation; empty list iff well-formed.

    Violations are data, not failures: editors surface them to the user
    instead of crashing.
    """
    out: list[Violation] = []
    for s in doc.shapes:
        pts = s.as_array()
        if not np.isfinite(pts).all():
            out.append(Violation(ViolationCode.NON_FINITE, s.id, "non-finite coordinate"))
            continue
        if s.closed and len(s.points) < 3:
            out.append(
                Violation(ViolationCode.TOO_FEW_POINTS, s.id, "closed boundary needs >= 3 points")
            )
            continue
        if s.closed and primitives.polyline_self_intersects(pts, True):
            out.append(Violation(ViolationCode.SELF_INTERSECTION, s.id, "boundary self-intersects"))

    annual = [s for s in doc.annual_rings() if np.isfinite(s.as_array()).all()]
    closed = [s for s in annual if s.closed and len(s.points) >= 3]
    if doc.pith is not None:
        px, py = doc.pith.center
        for s in closed:
            if not primitives.point_in_polygon(px, py, s.as_array()):
                out.append(
                    Violation(ViolationCode.PITH_OUTSIDE_RING, s.id, "ring does not contain pith")
                )

    for i in range(len(closed)):
        for j in range(i + 1, len(closed)):
            if primitives.polylines_cross(
                closed[i].as_array(), True, closed[j].as_array(), True
            ):
                out.append(
                    Violation(
                        ViolationCode.CROSSING_BOUNDARIES,
                        closed[i].id,
                        f"crosses annual ring {closed[j].id!r}",
                    )
                )

    areas = [s.enclosed_area_px2() for s in closed]
    for i in range(1, len(areas)):
        if not areas[i] > areas[i - 1]:
            out.append(
                Violation(
                    ViolationCode.AREA_NOT_INCREASING,
                    closed[i].id,
                    "enclosed area not strictly greater than previous ring",
                )
            )

    labeled = [(i, s) for i, s in enumerate(annual) if s.year_label is not None]
    n = len(annual)
    if doc.harvest_year is not None:
        for i, s in labeled:
            expect = doc.harvest_year - (n - 1 - i)
            if s.year_label != expect:
                out.append(
                    Violation(
                        ViolationCode.YEAR_LABEL_MISMATCH,
                        s.id,
                        f"year label {s.year_label} != expected {expect}",
                    )
                )
    elif len(labeled) >= 2:
        for (i0, s0), (i1, s1) in zip(labeled, labeled[1:]):
            if s1.year_label - s0.year_label != i1 - i0:
                out.append(
                    Violation(
                        ViolationCode.YEAR_LABEL_MISMATCH,
                        s1.id,
                        "year labels not consecutive pith-outward",
                    )
                )
    return out
