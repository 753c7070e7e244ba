"""Bit-exact serialization: annotation JSON, pos export, metrics CSV and
the YAML batch configuration.

All writers are deterministic — fixed key order, fixed float formatting —
so identical inputs produce byte-identical outputs. Numbers in annotation
files are limited to 6 fractional digits; unknown keys survive a
parse/serialize round-trip.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .errors import (
    ConfigError,
    EmptySeries,
    ParseError,
    SchemaError,
    VersionError,
)
from .geometry import RingMetricsRow
from .imageproc import DetectorConfig, EdgePolarity
from .measurement import RayHit, RaySeries, RaySpec, RingWidth
from .model import (
    AnnotationDocument,
    Pith,
    PithMethod,
    Point2,
    RingBoundary,
    ScaleCalibration,
    ScaleSource,
    ShapeKind,
)

ANNOTATION_VERSION = 1

_DOC_KEYS = {
    "version",
    "imagePath",
    "imageWidth",
    "imageHeight",
    "scale",
    "pith",
    "harvestYear",
    "provenance",
    "shapes",
}
_SHAPE_KEYS = {"id", "label", "kind", "shapeType", "points", "yearLabel", "nodeBudget"}


def _round6(x: float) -> float:
    return round(float(x), 6)


def _shape_label(s: RingBoundary) -> str:
    if s.year_label is not None:
        return f"{s.kind.value}_{s.year_label}"
    return s.kind.value


def _shape_to_json(s: RingBoundary) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": s.id,
        "label": _shape_label(s),
        "kind": s.kind.value,
        "shapeType": "polygon" if s.closed else "linestrip",
        "points": [[_round6(p.x), _round6(p.y)] for p in s.points],
        "yearLabel": s.year_label,
        "nodeBudget": s.node_budget,
    }
    for k in sorted(s.extras):
        out[k] = s.extras[k]
    return out


def write_annotation(doc: AnnotationDocument) -> str:
    obj: dict[str, Any] = {
        "version": ANNOTATION_VERSION,
        "imagePath": doc.image_path,
        "imageWidth": doc.image_size[0],
        "imageHeight": doc.image_size[1],
        "scale": None
        if doc.scale is None
        else {"pixelsPerMm": _round6(doc.scale.pixels_per_mm), "source": doc.scale.source.value},
        "pith": None
        if doc.pith is None
        else {
            "x": _round6(doc.pith.center.x),
            "y": _round6(doc.pith.center.y),
            "method": doc.pith.method.value,
        },
        "harvestYear": doc.harvest_year,
        "provenance": {k: doc.provenance[k] for k in sorted(doc.provenance)},
        "shapes": [_shape_to_json(s) for s in doc.shapes],
    }
    for k in sorted(doc.extras):
        obj[k] = doc.extras[k]
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def save_annotation(doc: AnnotationDocument, path) -> None:
    Path(path).write_text(write_annotation(doc), encoding="utf-8")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required key")
    return obj[key]


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(path, "non-finite number")
    return float(value)


def _parse_shape(obj: Any, idx: int) -> RingBoundary:
    path = f"shapes[{idx}]"
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    sid = _require(obj, "id", path)
    kind_raw = _require(obj, "kind", path)
    try:
        kind = ShapeKind(kind_raw)
    except ValueError:
        raise SchemaError(f"{path}.kind", f"unknown kind {kind_raw!r}") from None
    shape_type = _require(obj, "shapeType", path)
    if shape_type not in ("polygon", "linestrip"):
        raise SchemaError(f"{path}.shapeType", f"unknown shape type {shape_type!r}")
    raw_points = _require(obj, "points", path)
    if not isinstance(raw_points, list) or len(raw_points) < 2:
        raise SchemaError(f"{path}.points", "expected a list of at least 2 [x, y] pairs")
    pts = []
    for i, p in enumerate(raw_points):
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise SchemaError(f"{path}.points[{i}]", "expected an [x, y] pair")
        pts.append(
            Point2(_as_number(p[0], f"{path}.points[{i}][0]"), _as_number(p[1], f"{path}.points[{i}][1]"))
        )
    year = obj.get("yearLabel")
    if year is not None and not isinstance(year, int):
        raise SchemaError(f"{path}.yearLabel", "expected an integer or null")
    budget = obj.get("nodeBudget", 360)
    if not isinstance(budget, int) or budget < 1:
        raise SchemaError(f"{path}.nodeBudget", "expected a positive integer")
    extras = {k: v for k, v in obj.items() if k not in _SHAPE_KEYS}
    return RingBoundary(
        id=str(sid),
        points=tuple(pts),
        closed=shape_type == "polygon",
        kind=kind,
        year_label=year,
        node_budget=budget,
        extras=extras,
    )


def parse_annotation(text: str) -> AnnotationDocument:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(obj, dict):
        raise SchemaError("", "top-level value must be an object")
    version = _require(obj, "version", "")
    if version != ANNOTATION_VERSION:
        raise VersionError(f"unsupported annotation version {version!r} (expected 1)")

    image_path = str(_require(obj, "imagePath", ""))
    width = _require(obj, "imageWidth", "")
    height = _require(obj, "imageHeight", "")
    if not isinstance(width, int) or not isinstance(height, int):
        raise SchemaError("imageWidth", "image dimensions must be integers")

    scale = None
    if obj.get("scale") is not None:
        s = obj["scale"]
        if not isinstance(s, dict):
            raise SchemaError("scale", "expected an object")
        ppm = _as_number(_require(s, "pixelsPerMm", "scale"), "scale.pixelsPerMm")
        if ppm <= 0:
            raise SchemaError("scale.pixelsPerMm", "must be positive")
        try:
            source = ScaleSource(s.get("source", "metadata"))
        except ValueError:
            raise SchemaError("scale.source", f"unknown source {s.get('source')!r}") from None
        scale = ScaleCalibration(pixels_per_mm=ppm, source=source)

    pith = None
    if obj.get("pith") is not None:
        p = obj["pith"]
        if not isinstance(p, dict):
            raise SchemaError("pith", "expected an object")
        try:
            method = PithMethod(p.get("method", "manual"))
        except ValueError:
            raise SchemaError("pith.method", f"unknown method {p.get('method')!r}") from None
        pith = Pith(
            center=Point2(
                _as_number(_require(p, "x", "pith"), "pith.x"),
                _as_number(_require(p, "y", "pith"), "pith.y"),
            ),
            method=method,
        )

    harvest = obj.get("harvestYear")
    if harvest is not None and not isinstance(harvest, int):
        raise SchemaError("harvestYear", "expected an integer or null")

    provenance = obj.get("provenance", {})
    if not isinstance(provenance, dict):
        raise SchemaError("provenance", "expected an object")

    raw_shapes = _require(obj, "shapes", "")
    if not isinstance(raw_shapes, list):
        raise SchemaError("shapes", "expected a list")
    shapes = tuple(_parse_shape(s, i) for i, s in enumerate(raw_shapes))

    extras = {k: v for k, v in obj.items() if k not in _DOC_KEYS}
    return AnnotationDocument(
        image_path=image_path,
        image_size=(width, height),
        scale=scale,
        pith=pith,
        harvest_year=harvest,
        shapes=shapes,
        provenance={str(k): str(v) for k, v in provenance.items()},
        extras=extras,
    )


def read_annotation(path) -> AnnotationDocument:
    return parse_annotation(Path(path).read_text(encoding="utf-8"))


# --- pos export -------------------------------------------------------------

def write_pos(
    series: RaySeries,
    sample_id: str,
    pixels_per_mm: float,
    date: str | None = None,
) -> str:
    """Point-file export for one measurement ray.

    Coordinates are emitted in a ray-local frame (distance along the ray
    in mm, lateral 0); the origin and angle recorded in the header map
    them back to image space. Ring indices ride along in header comments
    so a parse reproduces the exact width series.
    """
    if not series.hits:
        raise EmptySeries("cannot export a ray series with no hits")
    lines = [
        f"#sample: {sample_id}",
        f"#scale_mm_per_px: {1.0 / pixels_per_mm:.6f}",
    ]
    if date is not None:
        lines.append(f"#date: {date}")
    lines.append(f"#origin_px: {series.origin.x:.6f},{series.origin.y:.6f}")
    lines.append(f"#angle_deg: {series.ray.angle_deg:.6f}")
    lines.append("#rings: " + ",".join(str(h.ring_index) for h in series.hits))
    lines.append("#skipped: " + ",".join(str(i) for i in series.skipped))
    prev = 0.0
    for h in series.hits:
        if prev > 0.0 and h.distance_mm <= prev:
            raise ValueError(f"hit distances not strictly monotone at ring {h.ring_index}")
        prev = h.distance_mm
        lines.append(f"{h.distance_mm:.4f},0.0000")
    return "\n".join(lines) + "\n"


def parse_pos(text: str) -> RaySeries:
    """Rebuild a RaySeries from a pos file (inverse of write_pos)."""
    header: dict[str, str] = {}
    distances: list[float] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if ":" in line:
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'x,y' coordinates, got {line!r}", ln, 1)
        try:
            distances.append(float(parts[0]))
        except ValueError:
            raise ParseError(f"bad coordinate {parts[0]!r}", ln, 1) from None
    if not distances:
        raise EmptySeries("pos file contains no coordinate lines")

    def _ints(key: str) -> list[int]:
        raw = header.get(key, "")
        return [int(v) for v in raw.split(",") if v.strip() != ""]

    rings = _ints("rings")
    if len(rings) != len(distances):
        rings = list(range(len(distances)))
    skipped = _ints("skipped")
    ox, oy = 0.0, 0.0
    if "origin_px" in header:
        ox, oy = (float(v) for v in header["origin_px"].split(","))
    angle = float(header.get("angle_deg", 0.0))
    spec = RaySpec(angle_deg=angle, origin=Point2(ox, oy))
    dx, dy = spec.direction()
    ppm = None
    if "scale_mm_per_px" in header:
        mmpp = float(header["scale_mm_per_px"])
        if mmpp > 0:
            ppm = 1.0 / mmpp
    hits = []
    for ring_idx, dist in zip(rings, distances):
        t_px = dist * ppm if ppm else dist
        hits.append(RayHit(ring_idx, dist, Point2(ox + t_px * dx, oy + t_px * dy)))
    widths = []
    prev = 0.0
    for h in hits:
        widths.append(RingWidth(h.ring_index, h.distance_mm - prev))
        prev = h.distance_mm
    return RaySeries(
        ray=spec,
        origin=Point2(ox, oy),
        hits=tuple(hits),
        widths=tuple(widths),
        skipped=tuple(skipped),
    )


# --- metrics CSV ------------------------------------------------------------

METRICS_CSV_HEADER = [
    "Ring",
    "Area (mm2)",
    "Cumulative area (mm2)",
    "Perimeter (mm)",
    "Equivalent ring width (mm)",
    "Similarity factor",
    "Eccentricity module (mm)",
    "Eccentricity phase (deg)",
    "EW area (mm2)",
    "LW area (mm2)",
    "Excluded area (mm2)",
]


def _mm(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def write_metrics_csv(rows: list[RingMetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(METRICS_CSV_HEADER)
    for r in rows:
        w.writerow(
            [
                r.ring_index,
                _mm(r.annulus_area),
                _mm(r.cumulative_area),
                _mm(r.perimeter),
                _mm(r.equivalent_ring_width),
                f"{r.similarity_factor:.4f}",
                _mm(r.eccentricity_module),
                f"{r.eccentricity_phase:.2f}",
                _mm(r.ew_area),
                _mm(r.lw_area),
                _mm(r.excluded_area),
            ]
        )
    return buf.getvalue()


def parse_metrics_csv(text: str) -> list[dict[str, float | None]]:
    """Numeric rows keyed by header column (None for empty cells)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    out = []
    for row in reader:
        rec: dict[str, float | None] = {}
        for key, cell in zip(header, row):
            rec[key] = None if cell == "" else float(cell)
        out.append(rec)
    return out


# --- service wire formats ---------------------------------------------------

def metrics_rows_to_json(rows: list[RingMetricsRow]) -> str:
    """Deterministic JSON array used by POST /api/metrics."""
    payload = [
        {
            "ringIndex": r.ring_index,
            "annulusArea": _round6(r.annulus_area),
            "cumulativeArea": _round6(r.cumulative_area),
            "perimeter": _round6(r.perimeter),
            "equivalentRingWidth": _round6(r.equivalent_ring_width),
            "similarityFactor": _round6(r.similarity_factor),
            "eccentricityModule": _round6(r.eccentricity_module),
            "eccentricityPhase": _round6(r.eccentricity_phase),
            "ewArea": None if r.ew_area is None else _round6(r.ew_area),
            "lwArea": None if r.lw_area is None else _round6(r.lw_area),
            "cumulativeEwArea": None if r.cumulative_ew_area is None else _round6(r.cumulative_ew_area),
            "excludedArea": _round6(r.excluded_area),
            "yearLabel": r.year_label,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def ray_series_to_json(series: RaySeries) -> str:
    """Deterministic JSON object used by POST /api/measure."""
    payload = {
        "ray": {
            "angleDeg": _round6(series.ray.angle_deg),
            "origin": [_round6(series.origin.x), _round6(series.origin.y)],
        },
        "hits": [
            {
                "ringIndex": h.ring_index,
                "distanceMm": _round6(h.distance_mm),
                "point": [_round6(h.point.x), _round6(h.point.y)],
            }
            for h in series.hits
        ],
        "widths": [
            {"ringIndex": w.ring_index, "widthMm": _round6(w.width_mm)} for w in series.widths
        ],
        "skipped": list(series.skipped),
    }
    return json.dumps(payload, indent=2) + "\n"


# --- batch configuration ----------------------------------------------------

_CONFIG_SCHEMA: dict[str, set[str]] = {
    "": {"scale", "preprocess", "detector", "outputs", "rays", "harvest_year", "concurrency"},
    "scale": {"pixels_per_mm"},
    "preprocess": {"remove_background", "resize_max_width"},
    "detector": {"num_rays", "node_budget", "smoothing_sigma", "min_ring_gap", "edge_polarity"},
}

_OUTPUT_FORMATS = ("json", "csv", "pos", "report")


@dataclass(frozen=True)
class BatchConfig:
    """Validated YAML batch configuration (unknown keys are rejected)."""

    pixels_per_mm: float | None = None
    remove_background: bool = True
    resize_max_width: int = 10000
    detector: DetectorConfig = DetectorConfig()
    outputs: tuple[str, ...] = ("json", "csv", "report")
    ray_angles: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0)
    harvest_year: int | None = None
    concurrency: int | None = None


def _check_keys(obj: dict, section: str) -> None:
    allowed = _CONFIG_SCHEMA[section]
    for key in obj:
        if key not in allowed:
            where = f"{section}.{key}" if section else str(key)
            raise ConfigError(f"unknown key: {where}")


def parse_batch_config(text: str) -> BatchConfig:
    try:
        obj = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML: {e}") from None
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise ConfigError("top-level configuration must be a mapping")
    _check_keys(obj, "")

    ppm = None
    if "scale" in obj and obj["scale"] is not None:
        scale = obj["scale"]
        if not isinstance(scale, dict):
            raise ConfigError("scale: must be a mapping")
        _check_keys(scale, "scale")
        if "pixels_per_mm" in scale:
            ppm = float(scale["pixels_per_mm"])
            if ppm <= 0:
                raise ConfigError("scale.pixels_per_mm: must be positive")

    remove_bg, resize_max = True, 10000
    if "preprocess" in obj and obj["preprocess"] is not None:
        pre = obj["preprocess"]
        if not isinstance(pre, dict):
            raise ConfigError("preprocess: must be a mapping")
        _check_keys(pre, "preprocess")
        remove_bg = bool(pre.get("remove_background", True))
        resize_max = int(pre.get("resize_max_width", 10000))
        if resize_max < 1:
            raise ConfigError("preprocess.resize_max_width: must be positive")

    det = DetectorConfig(resize_max_width=resize_max)
    if "detector" in obj and obj["detector"] is not None:
        d = obj["detector"]
        if not isinstance(d, dict):
            raise ConfigError("detector: must be a mapping")
        _check_keys(d, "detector")
        polarity = d.get("edge_polarity", EdgePolarity.BOTH.value)
        try:
            polarity = EdgePolarity(polarity)
        except ValueError:
            raise ConfigError(f"detector.edge_polarity: unknown value {polarity!r}") from None
        try:
            det = DetectorConfig(
                num_rays=int(d.get("num_rays", 360)),
                node_budget=int(d.get("node_budget", 360)),
                smoothing_sigma=float(d.get("smoothing_sigma", 2.0)),
                min_ring_gap=float(d.get("min_ring_gap", 4.0)),
                edge_polarity=polarity,
                resize_max_width=resize_max,
            )
        except ValueError as e:
            raise ConfigError(f"detector: {e}") from None

    outputs = obj.get("outputs", ["json", "csv", "report"])
    if not isinstance(outputs, list) or not outputs:
        raise ConfigError("outputs: must be a non-empty list")
    for fmt in outputs:
        if fmt not in _OUTPUT_FORMATS:
            raise ConfigError(f"outputs: unknown format {fmt!r}")

    rays = obj.get("rays", [0.0, 90.0, 180.0, 270.0])
    if not isinstance(rays, list):
        raise ConfigError("rays: must be a list of angles in degrees")
    ray_angles = tuple(float(a) for a in rays)

    harvest = obj.get("harvest_year")
    if harvest is not None and not isinstance(harvest, int):
        raise ConfigError("harvest_year: must be an integer")

    concurrency = obj.get("concurrency")
    if concurrency is not None:
        concurrency = int(concurrency)
        if concurrency < 1:
            raise ConfigError("concurrency: must be >= 1")

    return BatchConfig(
        pixels_per_mm=ppm,
        remove_background=remove_bg,
        resize_max_width=resize_max,
        detector=det,
        outputs=tuple(outputs),
        ray_angles=ray_angles,
        harvest_year=harvest,
        concurrency=concurrency,
    )


def load_batch_config(path) -> BatchConfig:
    return parse_batch_config(Path(path).read_text(encoding="utf-8"))
