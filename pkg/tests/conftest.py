import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ringkit.model import (
    AnnotationDocument,
    Pith,
    PithMethod,
    Point2,
    RingBoundary,
    ScaleCalibration,
    ScaleSource,
    ShapeKind,
)


def circle_boundary(
    radius: float,
    center=(0.0, 0.0),
    n: int = 360,
    ring_id: str = "ring",
    kind: ShapeKind = ShapeKind.ANNUAL,
    closed: bool = True,
    year_label=None,
) -> RingBoundary:
    t = 2 * np.pi * np.arange(n) / n
    pts = tuple(
        Point2(center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)) for a in t
    )
    return RingBoundary(
        id=ring_id, points=pts, closed=closed, kind=kind, node_budget=n, year_label=year_label
    )


def square_boundary(half: float, center=(0.0, 0.0), ring_id: str = "sq",
                    kind: ShapeKind = ShapeKind.ANNUAL) -> RingBoundary:
    cx, cy = center
    pts = (
        Point2(cx - half, cy - half),
        Point2(cx + half, cy - half),
        Point2(cx + half, cy + half),
        Point2(cx - half, cy + half),
    )
    return RingBoundary(id=ring_id, points=pts, closed=True, kind=kind, node_budget=len(pts))


def make_document(
    radii=(10.0, 20.0, 30.0),
    center=(100.0, 100.0),
    pixels_per_mm: float = 10.0,
    harvest_year=None,
    extra_shapes=(),
    n: int = 360,
) -> AnnotationDocument:
    shapes = [
        circle_boundary(r, center=center, n=n, ring_id=f"ring_{i:02d}")
        for i, r in enumerate(sorted(radii))
    ]
    return AnnotationDocument(
        image_path="sample.png",
        image_size=(int(center[0] * 2), int(center[1] * 2)),
        scale=ScaleCalibration(pixels_per_mm=pixels_per_mm, source=ScaleSource.METADATA),
        pith=Pith(center=Point2(*center), method=PithMethod.MANUAL),
        harvest_year=harvest_year,
        shapes=tuple(shapes) + tuple(extra_shapes),
        provenance={"sample": "fixture"},
    )


@pytest.fixture
def three_ring_doc() -> AnnotationDocument:
    return make_document()


@pytest.fixture(scope="session")
def small_target():
    """Small, fast synthetic ring target used by CLI/service tests."""
    from synth import render_target

    img, gt, center = render_target(
        size=360, n_rings=4, period=18.0, contrast=0.6, noise_sigma=0.03, seed=11
    )
    return img, gt, center
