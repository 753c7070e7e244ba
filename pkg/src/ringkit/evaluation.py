"""Detection-vs-ground-truth matching and the precision/recall/F harness.

A detection is assigned to a ground-truth ring when more than a fixed
fraction (default 0.90) of its nodes fall inside that ring's area of
influence — the set of points closer to it than to any other GT boundary
(nearest-boundary partition; ties go to the lower ring index).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import primitives
from .errors import MissingPair, NoGroundTruth
from .model import AnnotationDocument, Point2, RingBoundary, resample_boundary, sort_rings

DEFAULT_NODE_FRACTION = 0.90


def _segments(ring: RingBoundary) -> tuple[np.ndarray, np.ndarray]:
    pts = ring.as_array()
    if ring.closed:
        return pts, np.roll(pts, -1, axis=0)
    return pts[:-1], pts[1:]


def _distances_to_rings(nodes: np.ndarray, rings: list[RingBoundary]) -> np.ndarray:
    """(n_rings, n_nodes) point-to-polyline distances."""
    out = np.empty((len(rings), len(nodes)))
    for g, ring in enumerate(rings):
        a, b = _segments(ring)
        out[g] = primitives.point_to_segments_distance(nodes, a, b)
    return out


def nearest_gt(point: Point2, gt_rings) -> tuple[int, float]:
    """Index and distance of the GT boundary nearest to a point."""
    rings = list(gt_rings)
    if not rings:
        raise NoGroundTruth("no ground-truth rings")
    d = _distances_to_rings(np.array([[point.x, point.y]]), rings)[:, 0]
    idx = int(np.argmin(d))  # argmin takes the first minimum: lower index wins ties
    return idx, float(d[idx])


@dataclass(frozen=True)
class Assignment:
    gt_ring_id: int
    dt_ring_id: int
    fraction_in_band: float
    mean_distance: float


@dataclass(frozen=True)
class MatchReport:
    assignments: tuple[Assignment, ...]
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    fscore: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, assignments=()) -> "MatchReport":
        p = 100.0 * tp / (tp + fp) if (tp + fp) > 0 else 0.0
        r = 100.0 * tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
        return cls(tuple(assignments), tp, fp, fn, p, r, f)


def match_detections(
    gt, dt, threshold: float = DEFAULT_NODE_FRACTION
) -> MatchReport:
    """One-to-one greedy assignment of detections to ground-truth rings.

    For each detection every node is classified by its nearest GT
    boundary; the detection qualifies for ring g when strictly more than
    ``threshold`` of its nodes have g as nearest. Qualifying pairs are
    assigned globally by increasing mean node-to-boundary distance, each
    detection and each GT ring at most once. Leftover detections are FP,
    unmatched GT rings FN.
    """
    gt_rings = list(gt)
    dt_rings = list(dt)
    if not dt_rings:
        return MatchReport.from_counts(0, 0, len(gt_rings))
    if not gt_rings:
        return MatchReport.from_counts(0, len(dt_rings), 0)

    candidates = []  # (mean_distance, dt_index, gt_index, fraction)
    for d_idx, det in enumerate(dt_rings):
        nodes = det.as_array()
        dist = _distances_to_rings(nodes, gt_rings)
        nearest = np.argmin(dist, axis=0)
        counts = np.bincount(nearest, minlength=len(gt_rings))
        fractions = counts / len(nodes)
        for g_idx in np.nonzero(fractions > threshold)[0]:
            candidates.append(
                (float(dist[g_idx].mean()), d_idx, int(g_idx), float(fractions[g_idx]))
            )

    candidates.sort()
    used_dt: set[int] = set()
    used_gt: set[int] = set()
    assignments = []
    for mean_d, d_idx, g_idx, frac in candidates:
        if d_idx in used_dt or g_idx in used_gt:
            continue
        used_dt.add(d_idx)
        used_gt.add(g_idx)
        assignments.append(Assignment(g_idx, d_idx, frac, mean_d))

    tp = len(assignments)
    return MatchReport.from_counts(
        tp, len(dt_rings) - tp, len(gt_rings) - tp, assignments=assignments
    )


def _prepared_rings(doc: AnnotationDocument) -> list[RingBoundary]:
    rings = []
    for ring in sort_rings(doc).annual_rings():
        if len(ring.points) != ring.node_budget:
            ring = resample_boundary(ring, ring.node_budget)
        rings.append(ring)
    return rings


@dataclass(frozen=True)
class FolderReport:
    samples: tuple[tuple[str, MatchReport], ...]
    mean_precision: float
    mean_recall: float
    mean_fscore: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["Sample", "P", "R", "F"])
        for name, rep in self.samples:
            w.writerow([name, f"{rep.precision:.1f}", f"{rep.recall:.1f}", f"{rep.fscore:.1f}"])
        w.writerow(
            [
                "Average",
                f"{self.mean_precision:.1f}",
                f"{self.mean_recall:.1f}",
                f"{self.mean_fscore:.1f}",
            ]
        )
        return buf.getvalue()


def evaluate_folder(
    gt_dir, dt_dir, threshold: float = DEFAULT_NODE_FRACTION
) -> FolderReport:
    """Match every sample in two annotation folders by filename.

    The final row of the CSV rendering is the unweighted column mean.
    Raises MissingPair when a sample exists in only one directory.
    """
    from .io_formats import read_annotation

    gt_files = {p.stem: p for p in sorted(Path(gt_dir).glob("*.json"))}
    dt_files = {p.stem: p for p in sorted(Path(dt_dir).glob("*.json"))}
    only_gt = sorted(set(gt_files) - set(dt_files))
    only_dt = sorted(set(dt_files) - set(gt_files))
    if only_gt or only_dt:
        missing = (only_gt + only_dt)[0]
        raise MissingPair(f"sample {missing!r} present in only one directory")

    samples = []
    for name in sorted(gt_files):
        gt_doc = read_annotation(gt_files[name])
        dt_doc = read_annotation(dt_files[name])
        samples.append(
            (name, match_detections(_prepared_rings(gt_doc), _prepared_rings(dt_doc), threshold))
        )
    if samples:
        mp = float(np.mean([r.precision for _, r in samples]))
        mr = float(np.mean([r.recall for _, r in samples]))
        mf = float(np.mean([r.fscore for _, r in samples]))
    else:
        mp = mr = mf = 0.0
    return FolderReport(tuple(samples), mp, mr, mf)
