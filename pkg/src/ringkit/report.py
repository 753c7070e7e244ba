"""SVG overlay and HTML summary report.

The overlay embeds the original raster (base64, no re-encoding), one
<polyline> per shape colored by ring index, the measurement ray and a
pith marker. The HTML report inlines the overlay, the metrics table and
simple SVG charts of annual area, cumulative area and year-to-year
growth change; chart data points carry their value in a ``data-value``
attribute with the same precision as the CSV export.
"""

from __future__ import annotations

import base64
import html
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingImage
from .geometry import RingMetricsRow
from .io_formats import METRICS_CSV_HEADER
from .measurement import RaySeries
from .model import AnnotationDocument, ShapeKind

# Okabe-Ito colorblind-safe cycle.
PALETTE = (
    "#e69f00",
    "#56b4e9",
    "#009e73",
    "#f0e442",
    "#0072b2",
    "#d55e00",
    "#cc79a7",
    "#000000",
)

_KIND_CLASS = {
    ShapeKind.ANNUAL: "ring",
    ShapeKind.EARLYWOOD_LATEWOOD: "earlywood",
    ShapeKind.DEFECT: "defect",
    ShapeKind.REGION_OF_INTEREST: "roi",
}

_MIME = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


@dataclass(frozen=True)
class ReportBundle:
    svg: str
    html: str


def _load_image_data_uri(path: Path) -> str:
    if not path.is_file():
        raise MissingImage(f"cannot read raster image {str(path)!r}")
    mime = _MIME.get(path.suffix.lower(), "application/octet-stream")
    data = base64.b64encode(path.read_bytes()).decode("ascii")
    return f"data:{mime};base64,{data}"


def _points_attr(shape) -> str:
    pts = [f"{p.x:.2f},{p.y:.2f}" for p in shape.points]
    if shape.closed and shape.points:
        pts.append(f"{shape.points[0].x:.2f},{shape.points[0].y:.2f}")
    return " ".join(pts)


def render_overlay_svg(
    doc: AnnotationDocument,
    series: RaySeries | None = None,
    image_file=None,
) -> str:
    """Ring boundaries, ray and pith marker on top of the raster image."""
    w, h = doc.image_size
    image_path = Path(image_file) if image_file is not None else Path(doc.image_path)
    uri = _load_image_data_uri(image_path)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<image href="{uri}" x="0" y="0" width="{w}" height="{h}"/>',
    ]
    ring_idx = 0
    for shape in doc.shapes:
        if shape.kind is ShapeKind.ANNUAL:
            color = PALETTE[ring_idx % len(PALETTE)]
            ring_idx += 1
        else:
            color = "#d62728" if shape.kind is not ShapeKind.EARLYWOOD_LATEWOOD else "#7f7f7f"
        parts.append(
            f'<polyline class="{_KIND_CLASS[shape.kind]}" data-shape-id="{html.escape(shape.id)}" '
            f'points="{_points_attr(shape)}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
    if series is not None and series.hits:
        ox, oy = series.origin
        end = max(h.distance_mm for h in series.hits)
        scale_px = 1.0
        if doc.scale is not None:
            scale_px = doc.scale.pixels_per_mm
        t = end * scale_px * 1.05
        rad = math.radians(series.ray.angle_deg)
        ex, ey = ox + t * math.cos(rad), oy - t * math.sin(rad)
        parts.append(
            f'<line class="measure-ray" x1="{ox:.2f}" y1="{oy:.2f}" '
            f'x2="{ex:.2f}" y2="{ey:.2f}" stroke="#ff00ff" stroke-width="2"/>'
        )
    if doc.pith is not None:
        parts.append(
            f'<circle class="pith" cx="{doc.pith.center.x:.2f}" cy="{doc.pith.center.y:.2f}" '
            f'r="5" fill="#ff0000"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _chart_svg(values: list[float], title: str, css_class: str) -> str:
    """Minimal line chart; one circle per data point with data-value."""
    width, height, pad = 420, 180, 32
    n = len(values)
    if n == 0:
        return f'<svg class="{css_class}" width="{width}" height="{height}"></svg>'
    vmin = min(0.0, min(values))
    vmax = max(values) if max(values) > vmin else vmin + 1.0
    span = vmax - vmin

    def sx(i: int) -> float:
        return pad + (width - 2 * pad) * (i / max(1, n - 1))

    def sy(v: float) -> float:
        return height - pad - (height - 2 * pad) * ((v - vmin) / span)

    pts = " ".join(f"{sx(i):.1f},{sy(v):.1f}" for i, v in enumerate(values))
    circles = "".join(
        f'<circle class="datapoint" cx="{sx(i):.1f}" cy="{sy(v):.1f}" r="3" '
        f'data-index="{i}" data-value="{v:.2f}"/>'
        for i, v in enumerate(values)
    )
    return (
        f'<svg class="{css_class}" width="{width}" height="{height}" role="img">'
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-size="12">{html.escape(title)}</text>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#888"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#888"/>'
        f'<polyline points="{pts}" fill="none" stroke="#0072b2" stroke-width="1.5"/>'
        f"{circles}</svg>"
    )


def _metrics_table(rows: list[RingMetricsRow]) -> str:
    def cell(v, fmt="{:.2f}"):
        return "" if v is None else fmt.format(v)

    head = "".join(f"<th>{html.escape(c)}</th>" for c in METRICS_CSV_HEADER)
    body = []
    for r in rows:
        body.append(
            "<tr>"
            f"<td>{r.ring_index}</td>"
            f"<td>{cell(r.annulus_area)}</td>"
            f"<td>{cell(r.cumulative_area)}</td>"
            f"<td>{cell(r.perimeter)}</td>"
            f"<td>{cell(r.equivalent_ring_width)}</td>"
            f"<td>{r.similarity_factor:.4f}</td>"
            f"<td>{cell(r.eccentricity_module)}</td>"
            f"<td>{r.eccentricity_phase:.2f}</td>"
            f"<td>{cell(r.ew_area)}</td>"
            f"<td>{cell(r.lw_area)}</td>"
            f"<td>{cell(r.excluded_area)}</td>"
            "</tr>"
        )
    return f'<table class="metrics"><thead><tr>{head}</tr></thead><tbody>{"".join(body)}</tbody></table>'


def render_report(
    doc: AnnotationDocument,
    rows: list[RingMetricsRow],
    series: RaySeries | None = None,
    image_file=None,
) -> ReportBundle:
    """Build the SVG overlay and the self-contained HTML summary."""
    svg = render_overlay_svg(doc, series=series, image_file=image_file)
    annual = [r.annulus_area for r in rows]
    cumulative = [r.cumulative_area for r in rows]
    growth_change = [annual[i] - annual[i - 1] for i in range(1, len(annual))]

    sample = doc.provenance.get("sample", Path(doc.image_path).stem)
    widths_html = ""
    if series is not None and series.widths:
        items = "".join(
            f"<li>ring {w.ring_index}: {w.width_mm:.2f} mm</li>" for w in series.widths
        )
        widths_html = (
            f"<h2>Ray widths ({series.ray.angle_deg:.1f}&deg;)</h2><ul class='widths'>{items}</ul>"
        )

    html_doc = f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8"/>
<title>Ring report: {html.escape(sample)}</title>
<style>
body {{ font-family: sans-serif; margin: 1.5em; color: #222; }}
table.metrics {{ border-collapse: collapse; font-size: 13px; }}
table.metrics th, table.metrics td {{ border: 1px solid #bbb; padding: 3px 8px; text-align: right; }}
.overlay svg {{ max-width: 100%; height: auto; }}
.charts {{ display: flex; flex-wrap: wrap; gap: 12px; }}
</style>
</head>
<body>
<h1>Ring report: {html.escape(sample)}</h1>
<div class="overlay">
{svg}
</div>
<h2>Metrics</h2>
{_metrics_table(rows)}
{widths_html}
<h2>Growth plots</h2>
<div class="charts">
{_chart_svg(annual, "Annual ring area (mm²)", "chart-annual")}
{_chart_svg(cumulative, "Cumulative ring area (mm²)", "chart-cumulative")}
{_chart_svg(growth_change, "Year-to-year growth change (mm²)", "chart-growth-change")}
</div>
</body>
</html>
"""
    return ReportBundle(svg=svg, html=html_doc)
