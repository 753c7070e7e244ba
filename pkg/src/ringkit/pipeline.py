"""Shared detection pipeline.

One code path feeds both the CLI and the HTTP service so their outputs
are byte-identical for identical inputs: load, optional Lanczos resize
(triggered above the configured width), background removal, pith
estimate or manual override, ring detection, coordinate mapping back to
the original resolution, and pith-outward sorting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import imageproc
from .imageproc import DetectorConfig, ForegroundMask, GrayImage
from .model import (
    AnnotationDocument,
    Pith,
    PithMethod,
    Point2,
    RingBoundary,
    ScaleCalibration,
    sort_rings,
)


@dataclass(frozen=True)
class DetectSettings:
    detector: DetectorConfig = DetectorConfig()
    scale: ScaleCalibration | None = None
    pith_override: Point2 | None = None
    harvest_year: int | None = None
    remove_background: bool = True
    provenance: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DetectOutcome:
    document: AnnotationDocument
    stage_seconds: dict[str, float]


def _full_mask(img: GrayImage) -> ForegroundMask:
    import numpy as np

    return ForegroundMask(np.ones(img.samples.shape, dtype=bool))


def _scale_boundary(b: RingBoundary, fx: float, fy: float) -> RingBoundary:
    import dataclasses

    return dataclasses.replace(
        b, points=tuple(Point2(p.x * fx, p.y * fy) for p in b.points)
    )


def run_detection(image_path: str, settings: DetectSettings) -> DetectOutcome:
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    img = imageproc.load_image(image_path)
    orig_w, orig_h = img.width, img.height
    timings["load"] = time.perf_counter() - t0

    # Work at reduced resolution when the source is very wide; detected
    # boundaries are mapped back to the original pixel grid afterwards.
    t0 = time.perf_counter()
    fx = fy = 1.0
    if orig_w > settings.detector.resize_max_width:
        new_w = settings.detector.resize_max_width
        new_h = max(1, round(orig_h * new_w / orig_w))
        img = imageproc.resize_lanczos(img, new_w, new_h)
        fx = orig_w / new_w
        fy = orig_h / new_h
    timings["resize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if settings.remove_background:
        mask = imageproc.remove_background(img)
    else:
        mask = _full_mask(img)
    timings["background"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if settings.pith_override is not None:
        pith_work = Pith(
            center=Point2(settings.pith_override.x / fx, settings.pith_override.y / fy),
            method=PithMethod.MANUAL,
        )
    else:
        pith_work = imageproc.estimate_pith(mask)
    timings["pith"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    boundaries = imageproc.detect_rings(img, pith_work, mask, settings.detector)
    if fx != 1.0 or fy != 1.0:
        boundaries = [_scale_boundary(b, fx, fy) for b in boundaries]
    timings["detect"] = time.perf_counter() - t0

    pith_out = Pith(
        center=Point2(pith_work.center.x * fx, pith_work.center.y * fy),
        method=pith_work.method,
    )
    doc = AnnotationDocument(
        image_path=str(image_path),
        image_size=(orig_w, orig_h),
        scale=settings.scale,
        pith=pith_out,
        harvest_year=settings.harvest_year,
        shapes=tuple(boundaries),
        provenance=dict(settings.provenance),
    )
    return DetectOutcome(document=sort_rings(doc), stage_seconds=timings)
