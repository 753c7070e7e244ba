"""Array-level polygon and segment primitives.

Everything here operates on plain ``(N, 2)`` float arrays in pixel
coordinates (x right, y down) and knows nothing about the annotation
model. The higher-level modules wrap these with units and domain errors.
"""

from __future__ import annotations

import numpy as np

# Collinearity epsilon for segment-pair tests, in px^2 of cross product
# per unit of segment scale. Touching configurations below this are not
# reported as crossings.
COLLINEAR_EPS = 1e-9


def as_xy(points) -> np.ndarray:
    """Coerce a point sequence (Point2 tuples, lists, arrays) to (N, 2) float64."""
    a = np.asarray(points, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected (N, 2) point array, got shape {a.shape}")
    return a


def signed_area(pts: np.ndarray) -> float:
    """Shoelace signed area of a closed polygon (CCW positive in x-right/y-up)."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(pts: np.ndarray) -> float:
    return abs(signed_area(pts))


def polyline_length(pts: np.ndarray, closed: bool) -> float:
    d = np.diff(pts, axis=0)
    total = float(np.hypot(d[:, 0], d[:, 1]).sum())
    if closed and len(pts) > 1:
        total += float(np.hypot(*(pts[0] - pts[-1])))
    return total


def polygon_centroid(pts: np.ndarray) -> tuple[float, float]:
    """First-moment centroid of a simple polygon; vertex mean if degenerate."""
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(cross.sum())
    if abs(a) < 1e-12:
        return float(x.mean()), float(y.mean())
    cx = float(((x + xn) * cross).sum()) / (6.0 * a)
    cy = float(((y + yn) * cross).sum()) / (6.0 * a)
    return cx, cy


def points_in_polygon(query: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Crossing-number containment test for many query points at once.

    Boundary points are classified arbitrarily (callers needing boundary
    awareness must test distance separately). Chunked over query points to
    bound the (M, E) broadcast.
    """
    q = np.atleast_2d(np.asarray(query, dtype=np.float64))
    ax, ay = poly[:, 0][None, :], poly[:, 1][None, :]
    bx, by = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    out = np.empty(len(q), dtype=bool)
    chunk = max(1, int(4_000_000 / max(1, len(poly))))
    for lo in range(0, len(q), chunk):
        x = q[lo : lo + chunk, 0][:, None]
        y = q[lo : lo + chunk, 1][:, None]
        straddles = (ay <= y) != (by <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at_y = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings = (straddles & (x < x_at_y)).sum(axis=1)
        out[lo : lo + chunk] = (crossings % 2) == 1
    return out


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    return bool(points_in_polygon(np.array([[x, y]]), poly)[0])


def _segment_arrays(pts: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    if closed:
        return pts, np.roll(pts, -1, axis=0)
    return pts[:-1], pts[1:]


def segments_properly_intersect(a0, a1, b0, b1, eps: float = COLLINEAR_EPS) -> np.ndarray:
    """Vectorized proper-crossing test for segment batches.

    Inputs broadcast to a common shape (..., 2). A crossing is *proper*
    when the segments cross transversally at interior points; touching at
    endpoints or collinear overlap is allowed and reported as False.
    """
    a0, a1 = np.asarray(a0, float), np.asarray(a1, float)
    b0, b1 = np.asarray(b0, float), np.asarray(b1, float)

    def cross(o, p, q):
        return (p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) - (
            p[..., 1] - o[..., 1]
        ) * (q[..., 0] - o[..., 0])

    d1 = cross(a0, a1, b0)
    d2 = cross(a0, a1, b1)
    d3 = cross(b0, b1, a0)
    d4 = cross(b0, b1, a1)
    # Scale-aware epsilon so touching vertices on large coordinates are
    # still treated as touching.
    scale = (
        np.abs(a1 - a0).sum(axis=-1) * np.abs(b1 - b0).sum(axis=-1)
    ) + 1.0
    tol = eps * scale
    return (
        ((d1 > tol) & (d2 < -tol) | (d1 < -tol) & (d2 > tol))
        & ((d3 > tol) & (d4 < -tol) | (d3 < -tol) & (d4 > tol))
    )


def polyline_self_intersects(pts: np.ndarray, closed: bool) -> bool:
    """Any proper crossing between non-adjacent segments of one polyline."""
    a, b = _segment_arrays(pts, closed)
    n = len(a)
    if n < 3:
        return False
    i, j = np.triu_indices(n, k=2)
    if closed:
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
    if len(i) == 0:
        return False
    hits = segments_properly_intersect(a[i], b[i], a[j], b[j])
    return bool(hits.any())


def polylines_cross(pa: np.ndarray, closed_a: bool, pb: np.ndarray, closed_b: bool) -> bool:
    """Any proper crossing between the segments of two polylines."""
    a0, a1 = _segment_arrays(pa, closed_a)
    b0, b1 = _segment_arrays(pb, closed_b)
    if len(a0) == 0 or len(b0) == 0:
        return False
    hits = segments_properly_intersect(
        a0[:, None, :], a1[:, None, :], b0[None, :, :], b1[None, :, :]
    )
    return bool(hits.any())


def polygon_contains_polygon(outer: np.ndarray, inner: np.ndarray) -> bool:
    """True when ``inner`` is nested inside ``outer`` (no proper crossing)."""
    if polylines_cross(outer, True, inner, True):
        return False
    return bool(points_in_polygon(inner, outer).all())


def resample_polyline(pts: np.ndarray, n: int, closed: bool) -> np.ndarray:
    """Resample to n points equally spaced by arc length.

    Closed polylines keep point 0 and wrap (spacing L/n); open polylines
    keep both endpoints (spacing L/(n-1)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    path = np.vstack([pts, pts[:1]]) if closed else pts
    seg = np.hypot(*np.diff(path, axis=0).T)
    keep = seg > 0
    if not keep.any():
        raise ValueError("zero-length polyline")
    # Drop zero-length segments so the arc-length parameter is strictly increasing.
    path = np.vstack([path[:1], path[1:][keep]])
    arc = np.concatenate([[0.0], np.cumsum(seg[keep])])
    total = arc[-1]
    if closed:
        t = total * np.arange(n) / n
    else:
        t = total * np.arange(n) / (n - 1) if n > 1 else np.array([0.0])
    x = np.interp(t, arc, path[:, 0])
    y = np.interp(t, arc, path[:, 1])
    return np.column_stack([x, y])


def point_to_segments_distance(query: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each query point to its nearest point on any segment.

    query: (M, 2); a, b: (S, 2) segment endpoints. Returns (M,) minima.
    Memory-bounded by chunking over query points.
    """
    q = np.atleast_2d(np.asarray(query, float))
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    denom[denom == 0] = 1.0
    out = np.empty(len(q))
    chunk = max(1, int(4_000_000 / max(1, len(a))))
    for lo in range(0, len(q), chunk):
        qc = q[lo : lo + chunk]
        ap = qc[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.hypot(qc[:, None, 0] - proj[:, :, 0], qc[:, None, 1] - proj[:, :, 1])
        out[lo : lo + chunk] = d.min(axis=1)
    return out


def ray_polyline_first_hit(
    origin: np.ndarray,
    direction: np.ndarray,
    pts: np.ndarray,
    closed: bool,
    max_t: float | None = None,
) -> tuple[float, np.ndarray] | None:
    """Nearest forward intersection of a ray with a polyline.

    Returns (t, point) with t the distance along the unit ``direction``,
    or None when the ray misses every segment.
    """
    a, b = _segment_arrays(pts, closed)
    if len(a) == 0:
        return None
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    e = b - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    ao = a - o
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[:, 0] * e[:, 1] - ao[:, 1] * e[:, 0]) / denom
        u = (ao[:, 0] * d[1] - ao[:, 1] * d[0]) / -denom
    valid = (np.abs(denom) > 1e-14) & (t > 1e-9) & (u >= -1e-12) & (u <= 1 + 1e-12)
    if max_t is not None:
        valid &= t <= max_t
    if not valid.any():
        return None
    t_hit = float(t[valid].min())
    return t_hit, o + t_hit * d
