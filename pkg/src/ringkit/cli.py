"""Command-line entry points: detect, metrics, measure, eval, convert,
batch, serve.

Exit codes: 0 success (including a batch with per-image failures),
2 usage/configuration/unreadable-input errors, 3 processing errors in
single-image mode. Log level comes from the RINGKIT_LOG environment
variable.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import logging
import os
import sys
import time
from pathlib import Path

from . import io_formats, report
from .errors import ConfigError, MissingPair, RingkitError
from .geometry import compute_ring_metrics
from .io_formats import BatchConfig
from .measurement import RaySpec, measure_ray
from .model import Point2, ScaleCalibration, ScaleSource, sort_rings
from .pipeline import DetectSettings, run_detection
from .service import create_app, default_provenance

log = logging.getLogger("ringkit")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _parse_pith(text: str) -> Point2:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return Point2(x, y)


def _detect_settings(args, config: BatchConfig | None) -> DetectSettings:
    cfg = config or BatchConfig()
    detector = cfg.detector
    overrides = {}
    if args.rays is not None:
        overrides["num_rays"] = args.rays
    if args.nodes is not None:
        overrides["node_budget"] = args.nodes
    if args.resize_max_width is not None:
        overrides["resize_max_width"] = args.resize_max_width
    if overrides:
        import dataclasses

        detector = dataclasses.replace(detector, **overrides)

    scale = None
    ppm = args.scale if args.scale is not None else cfg.pixels_per_mm
    if ppm is not None:
        scale = ScaleCalibration(pixels_per_mm=ppm, source=ScaleSource.METADATA)

    remove_bg = cfg.remove_background
    if args.no_background_removal:
        remove_bg = False

    return DetectSettings(
        detector=detector,
        scale=scale,
        pith_override=args.pith,
        harvest_year=args.harvest_year if args.harvest_year is not None else cfg.harvest_year,
        remove_background=remove_bg,
        provenance=default_provenance(args.image),
    )


def cmd_detect(args) -> int:
    image = Path(args.image)
    if not image.is_file():
        print(f"error: cannot read image {str(image)!r}", file=sys.stderr)
        return 2
    config = None
    if args.config:
        try:
            config = io_formats.load_batch_config(args.config)
        except (ConfigError, OSError) as e:
            print(f"error: config: {e}", file=sys.stderr)
            return 2
    try:
        outcome = run_detection(str(image), _detect_settings(args, config))
    except RingkitError as e:
        print(f"error: detect: {e}", file=sys.stderr)
        return 3
    out = Path(args.output) if args.output else image.with_suffix(".json")
    io_formats.save_annotation(outcome.document, out)
    log.info("detected %d rings -> %s", len(outcome.document.annual_rings()), out)
    print(f"{out}: {len(outcome.document.annual_rings())} rings")
    return 0


def _load_sorted(path: Path):
    doc = io_formats.read_annotation(path)
    return sort_rings(doc)


def cmd_metrics(args) -> int:
    path = Path(args.annotation)
    if not path.is_file():
        print(f"error: cannot read annotation {str(path)!r}", file=sys.stderr)
        return 2
    try:
        rows = compute_ring_metrics(_load_sorted(path))
    except RingkitError as e:
        print(f"error: metrics: {e}", file=sys.stderr)
        return 3
    text = io_formats.write_metrics_csv(rows)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_measure(args) -> int:
    path = Path(args.annotation)
    if not path.is_file():
        print(f"error: cannot read annotation {str(path)!r}", file=sys.stderr)
        return 2
    try:
        doc = _load_sorted(path)
        spec = RaySpec(angle_deg=args.angle, origin=args.origin)
        series = measure_ray(doc, spec)
        if args.format == "pos":
            sample = doc.provenance.get("sample", Path(doc.image_path).stem)
            text = io_formats.write_pos(series, sample, doc.scale.pixels_per_mm, date=args.date)
        else:
            import io as _io

            buf = _io.StringIO()
            w = csv.writer(buf)
            w.writerow(["Ring", "Distance (mm)", "Width (mm)"])
            for hit, width in zip(series.hits, series.widths):
                w.writerow([hit.ring_index, f"{hit.distance_mm:.4f}", f"{width.width_mm:.4f}"])
            text = buf.getvalue()
    except RingkitError as e:
        print(f"error: measure: {e}", file=sys.stderr)
        return 3
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    from .evaluation import evaluate_folder

    try:
        folder = evaluate_folder(args.gt_dir, args.dt_dir, threshold=args.threshold)
    except MissingPair as e:
        print(f"error: eval: {e}", file=sys.stderr)
        return 2
    except RingkitError as e:
        print(f"error: eval: {e}", file=sys.stderr)
        return 3
    text = folder.to_csv()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_convert(args) -> int:
    path = Path(args.annotation)
    if not path.is_file():
        print(f"error: cannot read annotation {str(path)!r}", file=sys.stderr)
        return 2
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    unknown = [f for f in formats if f not in ("csv", "pos", "report")]
    if unknown:
        print(f"error: unknown format(s): {', '.join(unknown)}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir) if args.out_dir else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        doc = _load_sorted(path)
        stem = path.stem
        sample = doc.provenance.get("sample", stem)
        series = None
        if "pos" in formats or "report" in formats:
            series = measure_ray(doc, RaySpec(angle_deg=args.angle))
        if "csv" in formats:
            rows = compute_ring_metrics(doc)
            (out_dir / f"{stem}_metrics.csv").write_text(
                io_formats.write_metrics_csv(rows), encoding="utf-8"
            )
        if "pos" in formats:
            (out_dir / f"{stem}.pos").write_text(
                io_formats.write_pos(series, sample, doc.scale.pixels_per_mm, date=args.date),
                encoding="utf-8",
            )
        if "report" in formats:
            rows = compute_ring_metrics(doc)
            image_file = Path(doc.image_path)
            if not image_file.is_absolute():
                image_file = path.parent / image_file
            bundle = report.render_report(doc, rows, series=series, image_file=image_file)
            (out_dir / f"{stem}_report.html").write_text(bundle.html, encoding="utf-8")
            (out_dir / f"{stem}_overlay.svg").write_text(bundle.svg, encoding="utf-8")
    except RingkitError as e:
        print(f"error: convert: {e}", file=sys.stderr)
        return 3
    return 0


def _process_batch_image(image_path: str, out_dir: str, config: BatchConfig) -> dict:
    """One batch work item; returns a status record (never raises)."""
    t_start = time.perf_counter()
    image = Path(image_path)
    out = Path(out_dir)
    record = {
        "image": image.name,
        "status": "ok",
        "message": "",
        "outputs": [],
        "stage_seconds": {},
        "total_seconds": 0.0,
    }
    try:
        scale = (
            ScaleCalibration(config.pixels_per_mm, ScaleSource.METADATA)
            if config.pixels_per_mm is not None
            else None
        )
        settings = DetectSettings(
            detector=config.detector,
            scale=scale,
            harvest_year=config.harvest_year,
            remove_background=config.remove_background,
            provenance=default_provenance(image),
        )
        outcome = run_detection(str(image), settings)
        doc = outcome.document
        record["stage_seconds"] = outcome.stage_seconds
        stem = image.stem
        if "json" in config.outputs:
            p = out / f"{stem}.json"
            io_formats.save_annotation(doc, p)
            record["outputs"].append(str(p))
        series = None
        if ("pos" in config.outputs or "report" in config.outputs) and config.ray_angles:
            series = measure_ray(doc, RaySpec(angle_deg=config.ray_angles[0]))
        if "csv" in config.outputs:
            rows = compute_ring_metrics(doc)
            p = out / f"{stem}_metrics.csv"
            p.write_text(io_formats.write_metrics_csv(rows), encoding="utf-8")
            record["outputs"].append(str(p))
        if "pos" in config.outputs:
            for angle in config.ray_angles:
                s = measure_ray(doc, RaySpec(angle_deg=angle))
                p = out / f"{stem}_{int(round(angle)):03d}.pos"
                p.write_text(
                    io_formats.write_pos(s, stem, doc.scale.pixels_per_mm), encoding="utf-8"
                )
                record["outputs"].append(str(p))
        if "report" in config.outputs:
            rows = compute_ring_metrics(doc)
            bundle = report.render_report(doc, rows, series=series, image_file=image)
            p = out / f"{stem}_report.html"
            p.write_text(bundle.html, encoding="utf-8")
            record["outputs"].append(str(p))
    except (RingkitError, OSError, ValueError) as e:
        record["status"] = "error"
        record["message"] = f"{type(e).__name__}: {e}"
    record["total_seconds"] = time.perf_counter() - t_start
    return record


def cmd_batch(args) -> int:
    folder = Path(args.folder)
    if not folder.is_dir():
        print(f"error: not a directory: {str(folder)!r}", file=sys.stderr)
        return 2
    try:
        config = io_formats.load_batch_config(args.config) if args.config else BatchConfig()
    except (ConfigError, OSError) as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2

    images = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    out_dir = Path(args.out_dir) if args.out_dir else folder / "ringkit_out"
    out_dir.mkdir(parents=True, exist_ok=True)

    workers = args.concurrency or config.concurrency or os.cpu_count() or 1
    if workers <= 1 or len(images) <= 1:
        records = [_process_batch_image(str(p), str(out_dir), config) for p in images]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(
                    _process_batch_image,
                    [str(p) for p in images],
                    [str(out_dir)] * len(images),
                    [config] * len(images),
                )
            )

    records.sort(key=lambda r: r["image"])
    summary = out_dir / "batch_summary.csv"
    with summary.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["Image", "Status", "Message", "LoadS", "ResizeS", "BackgroundS", "PithS", "DetectS", "TotalS"]
        )
        for r in records:
            st = r["stage_seconds"]
            w.writerow(
                [
                    r["image"],
                    r["status"],
                    r["message"],
                    f"{st.get('load', 0.0):.3f}",
                    f"{st.get('resize', 0.0):.3f}",
                    f"{st.get('background', 0.0):.3f}",
                    f"{st.get('pith', 0.0):.3f}",
                    f"{st.get('detect', 0.0):.3f}",
                    f"{r['total_seconds']:.3f}",
                ]
            )
    n_err = sum(1 for r in records if r["status"] == "error")
    print(f"{len(records) - n_err} ok, {n_err} failed; summary: {summary}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    docroot = Path(args.docroot)
    if not docroot.is_dir():
        print(f"error: not a directory: {str(docroot)!r}", file=sys.stderr)
        return 2

    doc_path = None
    if args.doc:
        doc_path = docroot / args.doc if not Path(args.doc).is_absolute() else Path(args.doc)
    else:
        candidates = sorted(docroot.glob("*.json"))
        if len(candidates) == 1:
            doc_path = candidates[0]

    if doc_path is not None and doc_path.is_file():
        doc = io_formats.read_annotation(doc_path)
    elif args.image:
        from .imageproc import load_image
        from .model import AnnotationDocument

        image = docroot / args.image if not Path(args.image).is_absolute() else Path(args.image)
        if not image.is_file():
            print(f"error: cannot read image {str(image)!r}", file=sys.stderr)
            return 2
        img = load_image(image)
        doc = AnnotationDocument(
            image_path=str(image),
            image_size=(img.width, img.height),
            provenance=default_provenance(image),
        )
        doc_path = doc_path or image.with_suffix(".json")
    else:
        print(
            "error: no annotation found; pass --doc FILE or --image FILE to start fresh",
            file=sys.stderr,
        )
        return 2

    app = create_app(docroot, doc_path, doc, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringkit", description="Tree-ring analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect rings in a cross-section image")
    p.add_argument("image")
    p.add_argument("-o", "--output", help="annotation JSON output path")
    p.add_argument("--pith", type=_parse_pith, help="manual pith override as X,Y")
    p.add_argument("--scale", type=float, help="pixels per millimeter")
    p.add_argument("--rays", type=int, help="number of radial sampling rays")
    p.add_argument("--nodes", type=int, help="node budget per ring")
    p.add_argument("--no-background-removal", action="store_true")
    p.add_argument("--resize-max-width", type=int, help="resize trigger width in px")
    p.add_argument("--harvest-year", type=int)
    p.add_argument("--config", help="YAML configuration file")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("metrics", help="compute the ring metrics CSV")
    p.add_argument("annotation")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("measure", help="measure ring widths along a ray")
    p.add_argument("annotation")
    p.add_argument("--angle", type=float, default=0.0, help="degrees CCW from +x (90 = up)")
    p.add_argument("--origin", type=_parse_pith, help="ray origin X,Y (defaults to pith)")
    p.add_argument("--format", choices=("pos", "csv"), default="pos")
    p.add_argument("--date", help="measurement date recorded in pos header")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("eval", help="compare detections against ground truth")
    p.add_argument("gt_dir")
    p.add_argument("dt_dir")
    p.add_argument("--threshold", type=float, default=0.90)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convert", help="export csv/pos/report from an annotation")
    p.add_argument("annotation")
    p.add_argument("--formats", default="csv,report")
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--date")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("batch", help="process every image in a folder")
    p.add_argument("folder")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out-dir")
    p.add_argument("--concurrency", type=int)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("serve", help="run the local annotation service")
    p.add_argument("docroot")
    p.add_argument("--port", type=int, default=8734)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--doc", help="annotation file within the docroot")
    p.add_argument("--image", help="image to start a fresh document from")
    p.add_argument("--ui-dir", help="directory with the built editor UI")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RINGKIT_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
