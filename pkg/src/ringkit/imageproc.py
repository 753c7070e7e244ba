"""Classical preprocessing and the baseline automatic ring detector.

The detector works in polar space: intensity profiles are sampled along
rays cast from the pith, candidate edges are picked from the smoothed
radial derivative with a per-ray adaptive threshold, and candidates are
linked across adjacent rays into closed chains by dynamic programming
that minimizes the radial jump and must wrap around consistently after
360°. The contract is output-level (closed, non-crossing, pith-sorted
boundaries), so the whole detector is swappable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyForeground, PithOutsideMask, ZeroDimension
from .model import Pith, PithMethod, Point2, RingBoundary, ShapeKind, resample_boundary

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """Row-major intensity grid with values in [0, 1]."""

    samples: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D intensity grid, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("image contains non-finite samples")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ForegroundMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool).copy()
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def area(self) -> int:
        return int(self.bits.sum())


class EdgePolarity(str, Enum):
    DARK_TO_LIGHT = "dark_to_light"
    LIGHT_TO_DARK = "light_to_dark"
    BOTH = "both"


@dataclass(frozen=True)
class DetectorConfig:
    num_rays: int = 360
    node_budget: int = 360
    smoothing_sigma: float = 2.0
    min_ring_gap: float = 4.0
    edge_polarity: EdgePolarity = EdgePolarity.BOTH
    resize_max_width: int = 10000

    def __post_init__(self):
        if self.num_rays < 8:
            raise ValueError("num_rays must be >= 8")
        if self.min_ring_gap < 1:
            raise ValueError("min_ring_gap must be >= 1")
        if self.node_budget < 3:
            raise ValueError("node_budget must be >= 3")


def load_image(path) -> GrayImage:
    """Read an 8/16-bit grayscale or RGB image (PNG/JPEG) as luma in [0, 1]."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("RGB", "RGBA"):
            arr = np.asarray(im, dtype=np.float64)[:, :, :3] / 255.0
            r, g, b = LUMA_WEIGHTS
            return GrayImage(arr[:, :, 0] * r + arr[:, :, 1] * g + arr[:, :, 2] * b)
        if mode == "L":
            return GrayImage(np.asarray(im, dtype=np.float64) / 255.0)
        if mode in ("I", "I;16"):
            return GrayImage(np.asarray(im, dtype=np.float64) / 65535.0)
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        r, g, b = LUMA_WEIGHTS
        return GrayImage(arr[:, :, 0] * r + arr[:, :, 1] * g + arr[:, :, 2] * b)


def _lanczos3(x: np.ndarray) -> np.ndarray:
    out = np.sinc(x) * np.sinc(x / 3.0)
    return np.where(np.abs(x) < 3.0, out, 0.0)


def _axis_weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and normalized weights for one separable resize axis.

    Output sample d maps to source coordinate d*src/dst (corner aligned,
    so features scale about the origin). When minifying, the kernel is
    widened by the scale factor for antialiasing.
    """
    scale = src / dst
    fscale = max(1.0, scale)
    support = 3.0 * fscale
    centers = np.arange(dst, dtype=np.float64) * scale
    lo = np.ceil(centers - support)
    n_taps = int(math.ceil(2.0 * support)) + 1
    idx = lo[:, None] + np.arange(n_taps)[None, :]
    w = _lanczos3((idx - centers[:, None]) / fscale)
    w /= w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, src - 1).astype(np.int64)
    return idx, w


def _resize_axis0(arr: np.ndarray, dst: int) -> np.ndarray:
    idx, w = _axis_weights(arr.shape[0], dst)
    out = np.zeros((dst,) + arr.shape[1:], dtype=np.float64)
    for k in range(idx.shape[1]):
        tap_w = w[:, k].reshape((-1,) + (1,) * (arr.ndim - 1))
        out += arr[idx[:, k]] * tap_w
    return out


def resize_lanczos(img, new_width: int, new_height: int):
    """Separable Lanczos-3 resampling with per-pixel weight normalization.

    Accepts a GrayImage or a raw float array (2-D or HxWxC); returns the
    same kind. Output is clamped to [0, 1].
    """
    if new_width < 1 or new_height < 1:
        raise ZeroDimension(f"target size {new_width}x{new_height} is invalid")
    arr = img.samples if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    out = _resize_axis0(arr, new_height)
    out = np.swapaxes(_resize_axis0(np.swapaxes(out, 0, 1), new_width), 0, 1)
    out = np.clip(out, 0.0, 1.0)
    return GrayImage(out) if isinstance(img, GrayImage) else out


def otsu_threshold(samples: np.ndarray) -> float:
    """Histogram-based Otsu threshold for intensities in [0, 1].

    Returns the upper edge of the argmax bin, so ``samples < threshold``
    selects exactly the low class of the optimal split.
    """
    hist, edges = np.histogram(samples, bins=256, range=(0.0, 1.0))
    p = hist.astype(np.float64) / max(1, hist.sum())
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_t * w0 - mu) ** 2 / (w0 * (1.0 - w0))
    between[~np.isfinite(between)] = -1.0
    return float(edges[int(np.argmax(between)) + 1])


def remove_background(img: GrayImage) -> ForegroundMask:
    """Otsu threshold + border flood fill + largest component + hole fill.

    Only *border-connected* pixels of the background class are removed, so
    a sample touching one border survives. Raises EmptyForeground when the
    largest component covers less than 1% of the image.
    """
    samples = img.samples
    h, w = samples.shape
    thr = otsu_threshold(samples)
    dark = samples < thr

    border = np.zeros_like(dark)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    dark_border_frac = float(dark[border].mean()) if border.any() else 0.0
    bg_class = dark if dark_border_frac >= 0.5 else ~dark

    labels, _ = ndimage.label(bg_class)
    border_labels = np.unique(labels[border])
    border_labels = border_labels[border_labels != 0]
    background = np.isin(labels, border_labels)

    fg = ~background
    fg_labels, n = ndimage.label(fg)
    if n == 0:
        raise EmptyForeground("no foreground component found")
    counts = np.bincount(fg_labels.ravel())
    counts[0] = 0
    best = int(np.argmax(counts))
    mask = ndimage.binary_fill_holes(fg_labels == best)
    if mask.sum() < 0.01 * h * w:
        raise EmptyForeground(
            f"largest foreground component covers {mask.sum()} px (< 1% of image)"
        )
    return ForegroundMask(mask)


def estimate_pith(mask: ForegroundMask) -> Pith:
    """Foreground centroid; a heuristic that can differ from the biological
    pith for strongly eccentric samples."""
    ys, xs = np.nonzero(mask.bits)
    if len(xs) == 0:
        raise EmptyForeground("mask is empty")
    return Pith(
        center=Point2(float(xs.mean()), float(ys.mean())),
        method=PithMethod.FOREGROUND_CENTROID,
    )


# Detector internals. Edges weaker than this absolute derivative floor are
# never candidates, so a blank (ring-free) disc yields no detections even
# though the median+MAD threshold adapts all the way down to noise level.
_MIN_EDGE_STRENGTH = 0.01
_MISS_PENALTY = 3.0
_MAX_MEAN_COST = 2.5
_MIN_COVERAGE = 0.90
_MAX_CANDIDATES_PER_RAY = 32
_MAX_STARTS = 48
_MAX_SPAN = 12  # max rays bridged by one DP transition (span-1 rays skipped)
_MAX_ROUNDS = 16


def _ray_angles(num_rays: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(num_rays) / num_rays


def _sample_polar(img: GrayImage, mask: ForegroundMask, pith: Point2, num_rays: int):
    """Bilinear intensity profiles along rays, clipped at the mask border."""
    h, w = img.samples.shape
    px, py = pith
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], float)
    rmax = int(np.ceil(np.hypot(corners[:, 0] - px, corners[:, 1] - py).max())) + 1
    radii = np.arange(1, rmax + 1, dtype=np.float64)
    theta = _ray_angles(num_rays)
    xs = px + np.cos(theta)[:, None] * radii[None, :]
    ys = py - np.sin(theta)[:, None] * radii[None, :]

    xi = np.clip(np.round(xs).astype(np.int64), 0, w - 1)
    yi = np.clip(np.round(ys).astype(np.int64), 0, h - 1)
    in_img = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    in_mask = in_img & mask.bits[yi, xi]
    # First step outside the mask ends the ray.
    off = ~in_mask
    ray_len = np.where(off.any(axis=1), np.argmax(off, axis=1), in_mask.shape[1])

    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 2)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    s = img.samples
    prof = (
        s[y0, x0] * (1 - fx) * (1 - fy)
        + s[y0, x0 + 1] * fx * (1 - fy)
        + s[y0 + 1, x0] * (1 - fx) * fy
        + s[y0 + 1, x0 + 1] * fx * fy
    )
    return radii, prof, ray_len


def _ray_candidates(prof: np.ndarray, ray_len: np.ndarray, cfg: DetectorConfig):
    """Per-ray candidate edge radii and strengths from the smoothed derivative."""
    num_rays, nr = prof.shape
    # Replicate the last in-mask sample outward so smoothing near the rim
    # does not drag in garbage.
    col = np.arange(nr)[None, :]
    fill_idx = np.minimum(col, np.maximum(ray_len - 1, 0)[:, None])
    filled = np.take_along_axis(prof, fill_idx, axis=1)
    smoothed = ndimage.gaussian_filter1d(filled, sigma=cfg.smoothing_sigma, axis=1, mode="nearest")
    deriv = np.gradient(smoothed, axis=1)

    start_guard = max(3, int(round(2 * cfg.smoothing_sigma)))
    end_guard = max(2, int(round(2 * cfg.smoothing_sigma)))
    radii_out, strength_out = [], []
    for j in range(num_rays):
        n = int(ray_len[j])
        if n - end_guard <= start_guard + 1:
            radii_out.append(np.empty(0))
            strength_out.append(np.empty(0))
            continue
        d = deriv[j, : n - end_guard]
        a = np.abs(d)
        med = float(np.median(a))
        mad = float(np.median(np.abs(a - med)))
        # The MAD estimate assumes edges are sparse along the ray; when
        # rings are so dense the profile is one continuous oscillation the
        # median rises above the peaks, so cap at half the strongest edge.
        thr = max(min(med + 2.0 * mad, 0.5 * float(a.max(initial=0.0))), _MIN_EDGE_STRENGTH)
        i = np.arange(start_guard + 1, len(a) - 1)
        peak = (a[i] > a[i - 1]) & (a[i] >= a[i + 1]) & (a[i] > thr)
        if cfg.edge_polarity is EdgePolarity.DARK_TO_LIGHT:
            peak &= d[i] > 0
        elif cfg.edge_polarity is EdgePolarity.LIGHT_TO_DARK:
            peak &= d[i] < 0
        idx = i[peak]
        if len(idx) == 0:
            radii_out.append(np.empty(0))
            strength_out.append(np.empty(0))
            continue
        denom = a[idx - 1] - 2 * a[idx] + a[idx + 1]
        delta = np.where(np.abs(denom) > 1e-12, 0.5 * (a[idx - 1] - a[idx + 1]) / denom, 0.0)
        delta = np.clip(delta, -1.0, 1.0)
        r = (idx + 1) + delta  # radii grid starts at 1 px
        s = a[idx]
        if len(r) > _MAX_CANDIDATES_PER_RAY:
            keep = np.argsort(s)[::-1][:_MAX_CANDIDATES_PER_RAY]
            keep.sort()
            r, s = r[keep], s[keep]
        radii_out.append(r)
        strength_out.append(s)
    return radii_out, strength_out


def _dp_cycles(cand_radii: list[np.ndarray], cand_strength, start_ray: int, cfg: DetectorConfig):
    """Closed min-jump chains through the candidate graph, one per start
    candidate on ``start_ray``. Returns (per-ray radii, coverage, mean cost)."""
    num_rays = len(cand_radii)
    cap = cfg.min_ring_gap * 4.0
    wrap_tol = cfg.min_ring_gap

    order = [(start_ray + p) % num_rays for p in range(num_rays)]
    radii = [cand_radii[j] for j in order]
    starts = radii[0]
    if len(starts) == 0:
        return []
    if len(starts) > _MAX_STARTS:
        keep = np.sort(np.argsort(cand_strength[start_ray])[::-1][:_MAX_STARTS])
        starts = starts[keep]
    S = len(starts)

    INF = np.inf
    # dp[p] has shape (S, C_p): best cost reaching candidate c of position p
    # on the cycle that started at starts[s]. Position num_rays is a virtual
    # end node back at the start radius (wrap-around constraint).
    dp: list[np.ndarray] = [np.zeros((S, 1))] + [
        np.full((S, len(radii[p])), INF) for p in range(1, num_rays)
    ] + [np.full((S, 1), INF)]
    par_span = [np.zeros(d.shape, np.int32) for d in dp]
    par_cand = [np.zeros(d.shape, np.int32) for d in dp]

    for p in range(1, num_rays + 1):
        at_end = p == num_rays
        C = 1 if at_end else len(radii[p])
        if C == 0:
            continue
        best = dp[p]
        b_span, b_cand = par_span[p], par_cand[p]
        for span in range(1, min(_MAX_SPAN, p) + 1):
            q = p - span
            prev = dp[q]
            if prev.shape[1] == 0 or not np.isfinite(prev).any():
                continue
            miss = _MISS_PENALTY * (span - 1)
            if q == 0:
                # Transitions out of the start: each cycle s leaves from its
                # own start radius.
                target = starts[:, None] if at_end else radii[p][None, :]
                limit = wrap_tol if at_end else cap * span
                jump = np.abs(target - starts[:, None])
                jump = np.where(jump <= limit, jump, INF)
                c_val = prev[:, 0][:, None] + jump + miss  # (S, C)
                improve = c_val < best
                best[improve] = c_val[improve]
                b_span[improve] = span
                b_cand[improve] = 0
            elif at_end:
                jump = np.abs(starts[:, None] - radii[q][None, :])  # (S, C_prev)
                jump = np.where(jump <= wrap_tol, jump, INF)
                cand_cost = prev + jump + miss
                c_idx = np.argmin(cand_cost, axis=1)
                c_val = cand_cost[np.arange(S), c_idx][:, None]
                improve = c_val < best
                best[improve] = c_val[improve]
                b_span[improve[:, 0], 0] = span
                b_cand[improve[:, 0], 0] = c_idx[improve[:, 0]]
            else:
                jump = np.abs(radii[p][None, :] - radii[q][:, None])  # (C_prev, C)
                jump = np.where(jump <= cap * span, jump, INF)
                cand_cost = prev[:, :, None] + jump[None, :, :] + miss  # (S, C_prev, C)
                c_idx = np.argmin(cand_cost, axis=1)  # (S, C)
                c_val = np.take_along_axis(cand_cost, c_idx[:, None, :], axis=1)[:, 0, :]
                improve = c_val < best
                best[improve] = c_val[improve]
                b_span[improve] = span
                b_cand[improve] = c_idx[improve]

    results = []
    for s in range(S):
        total = dp[num_rays][s, 0]
        if not np.isfinite(total):
            continue
        visited: dict[int, float] = {}
        p, c = num_rays, 0
        ok = True
        while p > 0:
            span = int(par_span[p][s, c])
            if span == 0:
                ok = False
                break
            c_prev = int(par_cand[p][s, c])
            p -= span
            c = c_prev
            if p > 0:
                visited[p] = float(radii[p][c])
        if not ok:
            continue
        visited[0] = float(starts[s])
        coverage = len(visited) / num_rays

        # Fill skipped positions by linear interpolation in position space,
        # wrapping back to the start radius at position num_rays.
        ps = np.array(sorted(visited), dtype=float)
        rs = np.array([visited[int(k)] for k in ps])
        filled = np.interp(
            np.arange(num_rays, dtype=float),
            np.concatenate([ps, [float(num_rays)]]),
            np.concatenate([rs, [rs[0]]]),
        )
        per_ray = np.empty(num_rays)
        per_ray[np.array(order)] = filled
        results.append((per_ray, coverage, float(total) / num_rays))
    return results


def detect_rings(
    img: GrayImage, pith: Pith, mask: ForegroundMask, cfg: DetectorConfig | None = None
) -> list[RingBoundary]:
    """Detect ring boundaries; output is closed, non-crossing and sorted
    pith-outward, so it always passes the document validator."""
    cfg = cfg or DetectorConfig()
    h, w = img.samples.shape
    px, py = pith.center
    xi, yi = int(round(px)), int(round(py))
    if not (0 <= xi < w and 0 <= yi < h) or not mask.bits[yi, xi]:
        raise PithOutsideMask(f"pith ({px:.1f}, {py:.1f}) is outside the foreground mask")

    radii, prof, ray_len = _sample_polar(img, mask, pith.center, cfg.num_rays)
    cand_radii, cand_strength = _ray_candidates(prof, ray_len, cfg)

    accepted: list[tuple[np.ndarray, float]] = []  # (per-ray radii, mean cost)
    alive = [r.copy() for r in cand_radii]
    alive_strength = [s.copy() for s in cand_strength]
    for _ in range(_MAX_ROUNDS):
        counts = [len(r) for r in alive]
        if max(counts) == 0:
            break
        start_ray = int(np.argmax(counts))
        cycles = _dp_cycles(alive, alive_strength, start_ray, cfg)
        cycles = [c for c in cycles if c[1] >= _MIN_COVERAGE and c[2] <= _MAX_MEAN_COST]
        cycles.sort(key=lambda c: c[2])
        took = 0
        for per_ray, coverage, mean_cost in cycles:
            dup = any(
                float(np.mean(np.abs(per_ray - prev) < cfg.min_ring_gap)) > 0.5
                for prev, _ in accepted
            )
            if dup:
                continue
            accepted.append((per_ray, mean_cost))
            took += 1
            for j in range(cfg.num_rays):
                keep = np.abs(alive[j] - per_ray[j]) >= cfg.min_ring_gap
                alive[j] = alive[j][keep]
                alive_strength[j] = alive_strength[j][keep]
        if took == 0:
            break

    theta = _ray_angles(cfg.num_rays)
    boundaries: list[tuple[RingBoundary, float]] = []
    for k, (per_ray, mean_cost) in enumerate(accepted):
        xs = px + per_ray * np.cos(theta)
        ys = py - per_ray * np.sin(theta)
        b = RingBoundary(
            id=f"ring_{k:02d}",
            points=tuple(Point2(float(x), float(y)) for x, y in zip(xs, ys)),
            closed=True,
            kind=ShapeKind.ANNUAL,
            node_budget=cfg.node_budget,
        )
        boundaries.append((resample_boundary(b, cfg.node_budget), mean_cost))

    # Safety net: drop chains that cross a better one or lost the pith.
    from . import primitives

    boundaries.sort(key=lambda bc: bc[1])
    kept: list[tuple[RingBoundary, float]] = []
    for b, cost in boundaries:
        pts = b.as_array()
        if not primitives.point_in_polygon(px, py, pts):
            continue
        if any(primitives.polylines_cross(pts, True, k.as_array(), True) for k, _ in kept):
            continue
        kept.append((b, cost))

    kept.sort(key=lambda bc: bc[0].enclosed_area_px2())
    return [
        RingBoundary(
            id=f"ring_{i:02d}",
            points=b.points,
            closed=True,
            kind=ShapeKind.ANNUAL,
            node_budget=b.node_budget,
        )
        for i, (b, _) in enumerate(kept)
    ]
