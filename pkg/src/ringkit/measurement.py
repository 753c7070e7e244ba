"""Ray-based ring-width measurement and width-series comparison.

Angles are degrees counterclockwise from the +x image axis with y down,
so 0° points east, 90° north (up), 180° west, 270° south — matching the
four cardinal manual-measurement directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import primitives
from .errors import DegenerateVariance, LengthMismatch, MissingPith, MissingScale
from .model import AnnotationDocument, Point2

CARDINAL_ANGLES = {"east": 0.0, "north": 90.0, "west": 180.0, "south": 270.0}


@dataclass(frozen=True)
class RaySpec:
    """A measurement ray; origin defaults to the document pith."""

    angle_deg: float
    origin: Point2 | None = None
    max_length_px: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "angle_deg", float(self.angle_deg) % 360.0)

    def direction(self) -> tuple[float, float]:
        rad = math.radians(self.angle_deg)
        return math.cos(rad), -math.sin(rad)


@dataclass(frozen=True)
class RayHit:
    ring_index: int
    distance_mm: float
    point: Point2


@dataclass(frozen=True)
class RingWidth:
    ring_index: int
    width_mm: float


@dataclass(frozen=True)
class RaySeries:
    """Ordered ring hits and widths along one radial path.

    Widths are distances between consecutive hits (the first width is
    measured from the origin); rings the ray misses are listed in
    ``skipped`` rather than contributing zero widths.
    """

    ray: RaySpec
    origin: Point2
    hits: tuple[RayHit, ...]
    widths: tuple[RingWidth, ...]
    skipped: tuple[int, ...]


def measure_ray(doc: AnnotationDocument, ray: RaySpec) -> RaySeries:
    """Intersect the ray with every annual boundary of a sorted document.

    A wavy boundary can cross the ray more than once; the hit nearest the
    origin is kept so nested rings yield monotone distances.
    """
    if doc.scale is None:
        raise MissingScale("ray measurement needs a pixel-to-millimeter calibration")
    if ray.origin is not None:
        origin = ray.origin
    else:
        if doc.pith is None:
            raise MissingPith("ray origin defaults to the pith and none is set")
        origin = doc.pith.center

    o = np.array([origin.x, origin.y])
    d = np.array(ray.direction())
    hits: list[RayHit] = []
    skipped: list[int] = []
    for idx, ring in enumerate(doc.annual_rings()):
        hit = primitives.ray_polyline_first_hit(
            o, d, ring.as_array(), ring.closed, max_t=ray.max_length_px
        )
        if hit is None:
            skipped.append(idx)
            continue
        t, pt = hit
        hits.append(RayHit(idx, doc.scale.px_to_mm(t), Point2(float(pt[0]), float(pt[1]))))

    widths = []
    prev = 0.0
    for h in hits:
        widths.append(RingWidth(h.ring_index, h.distance_mm - prev))
        prev = h.distance_mm
    return RaySeries(
        ray=ray,
        origin=origin,
        hits=tuple(hits),
        widths=tuple(widths),
        skipped=tuple(skipped),
    )


@dataclass(frozen=True)
class SeriesComparison:
    n: int
    pearson_r: float
    slope: float
    intercept: float
    rmse: float


def compare_series(a, b) -> SeriesComparison:
    """Pearson r, least-squares fit of b on a, and RMSE of paired widths."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise LengthMismatch(f"series lengths differ: {xa.shape} vs {xb.shape}")
    n = len(xa)
    if n < 2:
        raise DegenerateVariance(f"need at least 2 paired observations, got {n}")
    if not (np.isfinite(xa).all() and np.isfinite(xb).all()):
        raise ValueError("series contain non-finite values")

    da = xa - xa.mean()
    db = xb - xb.mean()
    ssa = float(np.dot(da, da))
    ssb = float(np.dot(db, db))
    if ssa == 0.0 or ssb == 0.0:
        raise DegenerateVariance("a constant series has no defined correlation")
    cov = float(np.dot(da, db))
    slope = cov / ssa
    return SeriesComparison(
        n=n,
        pearson_r=cov / math.sqrt(ssa * ssb),
        slope=slope,
        intercept=float(xb.mean() - slope * xa.mean()),
        rmse=float(np.sqrt(np.mean((xa - xb) ** 2))),
    )
