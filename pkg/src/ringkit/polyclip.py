"""Exact polygon boolean areas for defect exclusion.

Computes area(region ∩ union(defects)) without rasterizing, so results
are resolution independent. The approach follows the classic clipping
pipeline: every edge of every polygon is subdivided at its pairwise
intersections, then each boundary fragment is classified by containment
of its midpoint and the included fragments are integrated with Green's
theorem. This yields the same integral the polygon traversal phase would
produce while tolerating multi-component and hole-forming results.

Degenerate configurations (vertex-on-edge, collinear overlapping edges,
identical polygons) are detected by fragment midpoints falling onto
another boundary; the clip polygons are then nudged by a deterministic
sub-tolerance offset and the computation retried.
"""

from __future__ import annotations

import math

import numpy as np

from . import primitives
from .errors import DegeneratePolygon

_MAX_ATTEMPTS = 6
# Midpoint-to-boundary distances below _DEGENERACY_REL * scale trigger a
# perturbation retry; the perturbation itself is a few orders larger so
# one nudge resolves the configuration.
_DEGENERACY_REL = 1e-11
_PERTURB_REL = 3e-7


def _oriented(poly: np.ndarray) -> np.ndarray:
    pts = primitives.as_xy(poly)
    if primitives.signed_area(pts) < 0:
        pts = pts[::-1].copy()
    return pts


def _bbox_overlaps(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(
        (a[:, 0].min() <= b[:, 0].max())
        and (b[:, 0].min() <= a[:, 0].max())
        and (a[:, 1].min() <= b[:, 1].max())
        and (b[:, 1].min() <= a[:, 1].max())
    )


def _segment_cuts(polys: list[np.ndarray]) -> list[list[np.ndarray]]:
    """Pairwise edge intersections; returns per-polygon, per-segment cut params."""
    segs = [(p, np.roll(p, -1, axis=0)) for p in polys]
    cuts: list[list[np.ndarray]] = [
        [np.empty(0) for _ in range(len(p))] for p in polys
    ]
    for i in range(len(polys)):
        a0, a1 = segs[i]
        e = a1 - a0
        for j in range(i + 1, len(polys)):
            if not _bbox_overlaps(polys[i], polys[j]):
                continue
            b0, b1 = segs[j]
            f = b1 - b0
            denom = e[:, None, 0] * f[None, :, 1] - e[:, None, 1] * f[None, :, 0]
            diff = b0[None, :, :] - a0[:, None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (diff[:, :, 0] * f[None, :, 1] - diff[:, :, 1] * f[None, :, 0]) / denom
                u = (diff[:, :, 0] * e[:, None, 1] - diff[:, :, 1] * e[:, None, 0]) / denom
            ok = np.abs(denom) > 1e-14
            on_a = ok & (t > 1e-12) & (t < 1 - 1e-12) & (u >= -1e-12) & (u <= 1 + 1e-12)
            on_b = ok & (u > 1e-12) & (u < 1 - 1e-12) & (t >= -1e-12) & (t <= 1 + 1e-12)
            for si in np.nonzero(on_a.any(axis=1))[0]:
                cuts[i][si] = np.concatenate([cuts[i][si], t[si][on_a[si]]])
            for sj in np.nonzero(on_b.any(axis=0))[0]:
                cuts[j][sj] = np.concatenate([cuts[j][sj], u[:, sj][on_b[:, sj]]])
    return cuts


def _fragments(poly: np.ndarray, seg_cuts: list[np.ndarray]):
    """Split edges at cut parameters; yields (start, end, midpoint) arrays."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    starts, ends = [], []
    for si in range(len(poly)):
        ts = np.unique(np.concatenate([[0.0], np.sort(seg_cuts[si]), [1.0]]))
        pts = a[si] + ts[:, None] * (b[si] - a[si])
        starts.append(pts[:-1])
        ends.append(pts[1:])
    s = np.vstack(starts)
    e = np.vstack(ends)
    mid = 0.5 * (s + e)
    return s, e, mid


def _min_boundary_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    return primitives.point_to_segments_distance(points, poly, np.roll(poly, -1, axis=0))


class _Degenerate(Exception):
    pass


def _attempt_area(region: np.ndarray, clips: list[np.ndarray], tol: float) -> float:
    polys = [region] + clips
    cuts = _segment_cuts(polys)
    frags = [_fragments(p, c) for p, c in zip(polys, cuts)]

    total = 0.0
    for idx, (s, e, mid) in enumerate(frags):
        others = [k for k in range(len(polys)) if k != idx]
        # A midpoint sitting on another boundary means the classification
        # is ambiguous: bail out to the perturbation path.
        for k in others:
            if not _bbox_overlaps(polys[idx], polys[k]):
                continue
            if (_min_boundary_distance(mid, polys[k]) < tol).any():
                raise _Degenerate
        if idx == 0:
            include = np.zeros(len(mid), dtype=bool)
            for k in others:
                include |= primitives.points_in_polygon(mid, polys[k])
        else:
            include = primitives.points_in_polygon(mid, polys[0])
            for k in others:
                if k == 0:
                    continue
                include &= ~primitives.points_in_polygon(mid, polys[k])
        if include.any():
            cross = s[include, 0] * e[include, 1] - e[include, 0] * s[include, 1]
            total += 0.5 * float(cross.sum())
    return total


def union_intersection_area(region, clips) -> float:
    """Area of region ∩ (clip_1 ∪ ... ∪ clip_n), in the input squared units.

    ``region`` and every clip are simple closed polygons as (N, 2) point
    arrays; clips may overlap each other and the region arbitrarily.
    """
    reg = _oriented(region)
    if primitives.polygon_area(reg) < 1e-12:
        raise DegeneratePolygon("region polygon is degenerate")
    kept = []
    for c in clips:
        pts = primitives.as_xy(c)
        if len(pts) < 3 or primitives.polygon_area(pts) < 1e-12:
            continue
        if _bbox_overlaps(reg, pts):
            kept.append(_oriented(pts))
    if not kept:
        return 0.0

    span = max(
        float(np.ptp(reg[:, 0])),
        float(np.ptp(reg[:, 1])),
        max(max(float(np.ptp(c[:, 0])), float(np.ptp(c[:, 1]))) for c in kept),
        1.0,
    )
    tol = _DEGENERACY_REL * span
    for attempt in range(_MAX_ATTEMPTS):
        try:
            if attempt == 0:
                return _attempt_area(reg, kept, tol)
            mag = _PERTURB_REL * span * attempt
            moved = []
            for k, c in enumerate(kept):
                # Deterministic pseudo-random direction per (polygon, attempt).
                phi = 2 * math.pi * math.modf(0.6180339887498949 * (13 * k + 7 * attempt + 1))[0]
                moved.append(c + mag * np.array([math.cos(phi), math.sin(phi)]))
            return _attempt_area(reg, moved, tol)
        except _Degenerate:
            continue
    raise DegeneratePolygon("polygon clipping failed: degenerate after perturbation retries")
