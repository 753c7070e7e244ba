"""Acceptance suite.

One test per criterion; each prints a single PASS/FAIL line (visible with
``pytest -s`` or in failure output) and enforces its stated tolerance and
runtime budget.
"""

import json
import math
import time

import numpy as np
from PIL import Image

from conftest import circle_boundary, make_document
from oracles import monte_carlo_area, random_star_polygon, rasterized_area_excluding
from synth import radial_errors, render_target
from ringkit import primitives
from ringkit.cli import main as cli_main
from ringkit.evaluation import MatchReport, match_detections
from ringkit.geometry import area_excluding, circle_similarity, polygon_area_perimeter
from ringkit.imageproc import (
    DetectorConfig,
    GrayImage,
    detect_rings,
    estimate_pith,
    remove_background,
    resize_lanczos,
)
from ringkit.io_formats import (
    parse_annotation,
    parse_metrics_csv,
    parse_pos,
    write_annotation,
    write_metrics_csv,
    write_pos,
)
from ringkit.measurement import RaySpec, measure_ray
from ringkit.model import Point2

TABLE_ANNULUS = [43.07, 851.53, 5392.93, 7093.76, 6264.83, 5476.85]
TABLE_CUMULATIVE = [43.07, 894.60, 6287.53, 13381.28, 19646.11, 25122.97]


def _report(n: int, name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {n} ({name}): {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {n} ({name}) failed: {detail}"


def test_criterion_1_table_arithmetic():
    t0 = time.perf_counter()
    cum = 0.0
    rebuilt = []
    for annulus in TABLE_ANNULUS:
        cum += annulus
        rebuilt.append(cum)
    diffs = [abs(a - b) for a, b in zip(rebuilt, TABLE_CUMULATIVE)]

    # cross-check through the polygon path: regular 4096-gons sized so the
    # polygon area matches each cumulative value exactly
    n = 4096
    doc_radii_mm = [math.sqrt(2 * a / (n * math.sin(2 * math.pi / n))) for a in TABLE_CUMULATIVE]
    ppm = 10.0
    shapes = tuple(
        circle_boundary(r * ppm, center=(3000.0, 3000.0), n=n, ring_id=f"r{i}")
        for i, r in enumerate(doc_radii_mm)
    )
    doc = make_document(radii=(), center=(3000.0, 3000.0), pixels_per_mm=ppm).replace(
        shapes=shapes
    )
    from ringkit.geometry import enclosed_areas

    pairs = enclosed_areas(doc)
    geo_diffs = [abs(c - want) for (c, _), want in zip(pairs, TABLE_CUMULATIVE)]
    elapsed = time.perf_counter() - t0

    ok = max(diffs) <= 0.01 + 1e-9 and max(geo_diffs) <= 0.011 and elapsed < 1.0
    _report(
        1,
        "table arithmetic",
        ok,
        f"max |cum - table| = {max(diffs):.4f} mm^2 (identity), "
        f"{max(geo_diffs):.4f} mm^2 (polygon path), {elapsed:.2f}s",
    )


def test_criterion_2_prf_formula():
    t0 = time.perf_counter()
    rep = MatchReport.from_counts(tp=18, fp=1, fn=5)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(rep.precision - 94.7) <= 0.1
        and abs(rep.recall - 78.3) <= 0.1
        and abs(rep.fscore - 85.7) <= 0.1
        and elapsed < 1.0
    )
    _report(
        2,
        "P/R/F reproduction",
        ok,
        f"P={rep.precision:.2f} R={rep.recall:.2f} F={rep.fscore:.2f}, {elapsed:.3f}s",
    )


def _run_detection_trial(ellipse_ratio: float):
    img, gt, center = render_target(
        size=2000,
        n_rings=10,
        period=20.0,
        contrast=0.6,
        noise_sigma=0.05,
        ellipse_ratio=ellipse_ratio,
        seed=42,
    )
    t0 = time.perf_counter()
    mask = remove_background(img)
    pith = estimate_pith(mask)
    det = detect_rings(img, pith, mask, DetectorConfig())
    elapsed = time.perf_counter() - t0
    report = match_detections(gt, det, threshold=0.90)
    max_err = 0.0
    for a in report.assignments:
        errs = radial_errors(
            det[a.dt_ring_id], a.gt_ring_id + 1, 20.0, center, ellipse_ratio=ellipse_ratio
        )
        max_err = max(max_err, float(errs.max()))
    return report, max_err, elapsed


def test_criterion_3_synthetic_detection():
    rep_c, err_c, t_c = _run_detection_trial(1.0)
    rep_e, err_e, t_e = _run_detection_trial(1.5)
    ok = (
        rep_c.fscore >= 90.0
        and err_c < 2.0
        and t_c < 10.0
        and rep_e.fscore >= 90.0
        and err_e < 3.0
        and t_e < 10.0
    )
    _report(
        3,
        "synthetic detection",
        ok,
        f"concentric F={rep_c.fscore:.1f} err={err_c:.2f}px {t_c:.1f}s; "
        f"ellipse F={rep_e.fscore:.1f} err={err_e:.2f}px {t_e:.1f}s",
    )


def test_criterion_4_geometry_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)

    worst_mc = 0.0
    worst_sf = 0.0
    for k in range(100):
        poly = random_star_polygon(rng, int(rng.integers(20, 201)))
        stats = polygon_area_perimeter(poly)
        mc = monte_carlo_area(poly, 10_000_000, seed=1000 + k)
        worst_mc = max(worst_mc, abs(stats.area_px2 - mc) / stats.area_px2)
        sf = circle_similarity(stats.area_px2, stats.perimeter_px)
        worst_sf = max(worst_sf, sf)

    worst_excl = 0.0
    for k in range(8):
        region = random_star_polygon(rng, int(rng.integers(24, 64)), r_min=25, r_max=55)
        defects = [
            random_star_polygon(
                rng,
                int(rng.integers(8, 20)),
                r_min=3,
                r_max=14,
                cx=float(rng.uniform(-30, 30)),
                cy=float(rng.uniform(-30, 30)),
            )
            for _ in range(int(rng.integers(1, 4)))
        ]
        exact = area_excluding(region, defects)
        oracle = rasterized_area_excluding(region, defects, n=4096)
        worst_excl = max(
            worst_excl, abs(exact - oracle) / primitives.polygon_area(region)
        )

    sf_square = circle_similarity(1.0, 4.0)
    elapsed = time.perf_counter() - t0
    ok = (
        worst_mc <= 0.005
        and worst_excl <= 0.001
        and worst_sf <= 1.0
        and abs(sf_square - 0.8862) <= 1e-4
        and elapsed < 300.0
    )
    _report(
        4,
        "geometry oracle suite",
        ok,
        f"MC max rel err {worst_mc:.5f}, exclusion vs raster {worst_excl:.5f}, "
        f"max SF {worst_sf:.6f}, square SF {sf_square:.5f}, {elapsed:.0f}s",
    )


def test_criterion_5_ray_self_consistency():
    t0 = time.perf_counter()
    doc = make_document(radii=(10.0, 20.0, 30.0), pixels_per_mm=10.0)
    worst = 0.0
    for angle in range(360):
        series = measure_ray(doc, RaySpec(angle_deg=float(angle)))
        for w in series.widths:
            worst = max(worst, abs(w.width_mm - 1.0))

    from oracles import ellipse_radius_at
    from ringkit.model import RingBoundary, ShapeKind

    t = 2 * np.pi * np.arange(720) / 720
    pts = tuple(
        Point2(100.0 + 20.0 * math.cos(v), 100.0 + 10.0 * math.sin(v)) for v in t
    )
    ell = RingBoundary(id="e", points=pts, closed=True, kind=ShapeKind.ANNUAL)
    edoc = make_document(radii=()).replace(shapes=(ell,))
    worst_px = 0.0
    for angle in range(360):
        got_px = measure_ray(edoc, RaySpec(angle_deg=float(angle))).hits[0].distance_mm * 10.0
        want_px = ellipse_radius_at(20.0, 10.0, math.radians(angle))
        worst_px = max(worst_px, abs(got_px - want_px))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.005 and worst_px <= 0.5 and elapsed < 10.0
    _report(
        5,
        "ray self-consistency",
        ok,
        f"widths max dev {worst * 1000:.2f} um, ellipse max dev {worst_px:.3f} px, {elapsed:.1f}s",
    )


def test_criterion_6_matching_properties():
    t0 = time.perf_counter()
    gt = [
        circle_boundary(float(r), center=(200.0, 200.0), ring_id=f"g{r}")
        for r in range(10, 101, 10)
    ]
    perfect = match_detections(gt, list(gt))
    ok_perfect = (perfect.precision, perfect.recall, perfect.fscore) == (100.0, 100.0, 100.0)

    def displace(ring, dr):
        import dataclasses

        pts = ring.as_array()
        d = pts - np.array([200.0, 200.0])
        r = np.hypot(d[:, 0], d[:, 1])
        moved = np.array([200.0, 200.0]) + d * ((r + dr) / r)[:, None]
        return dataclasses.replace(
            ring, points=tuple(Point2(float(x), float(y)) for x, y in moved)
        )

    # perturbation sweep on the r=50 ring: TP while inside the influence
    # band (shift < 5 px), FP/FN once across the midpoint
    flips = []
    for shift in range(0, 11):
        dt = list(gt)
        dt[4] = displace(gt[4], float(shift))
        rep = match_detections(gt, dt)
        flips.append((shift, rep.tp, rep.fp, rep.fn))
    ok_sweep = all(tp == 10 for s, tp, fp, fn in flips if s < 5) and all(
        (tp, fp, fn) == (9, 1, 1) for s, tp, fp, fn in flips if s > 5
    )

    rng = np.random.default_rng(77)
    noisy = [displace(g, float(rng.uniform(0, 6))) for g in gt]
    tps = [match_detections(gt, noisy, threshold=thr).tp for thr in (0.5, 0.7, 0.9, 0.99)]
    ok_thr = tps == sorted(tps, reverse=True)

    elapsed = time.perf_counter() - t0
    ok = ok_perfect and ok_sweep and ok_thr and elapsed < 30.0
    _report(
        6,
        "matching properties",
        ok,
        f"gt-vs-gt 100/100/100: {ok_perfect}; flip sweep {flips[4][1:]}->{flips[6][1:]}: "
        f"{ok_sweep}; threshold TPs {tps}: {ok_thr}; {elapsed:.0f}s",
    )


def test_criterion_7_round_trips():
    t0 = time.perf_counter()
    from test_io_formats import _random_doc

    rng = np.random.default_rng(31)
    all_equal = True
    deterministic = True
    for _ in range(200):
        doc = _random_doc(rng)
        text = write_annotation(doc)
        if parse_annotation(text) != doc:
            all_equal = False
            break
        if write_annotation(parse_annotation(text)) != text:
            deterministic = False
            break

    doc = make_document(radii=(10.0, 20.0, 30.0))
    series = measure_ray(doc, RaySpec(angle_deg=25.0))
    pos_ok = True
    back = parse_pos(write_pos(series, "s", 10.0))
    for a, b in zip(series.widths, back.widths):
        pos_ok &= abs(a.width_mm - b.width_mm) <= 0.001
    pos_ok &= write_pos(series, "s", 10.0) == write_pos(series, "s", 10.0)

    from ringkit.geometry import compute_ring_metrics

    rows = compute_ring_metrics(doc)
    text = write_metrics_csv(rows)
    csv_ok = text == write_metrics_csv(rows)
    for rec, row in zip(parse_metrics_csv(text), rows):
        csv_ok &= abs(rec["Area (mm2)"] - row.annulus_area) <= 0.005
        csv_ok &= abs(rec["Similarity factor"] - row.similarity_factor) <= 5e-5

    elapsed = time.perf_counter() - t0
    ok = all_equal and deterministic and pos_ok and csv_ok and elapsed < 30.0
    _report(
        7,
        "round-trip suite",
        ok,
        f"200 docs field-equal: {all_equal}; byte-deterministic: {deterministic}; "
        f"pos: {pos_ok}; csv: {csv_ok}; {elapsed:.0f}s",
    )


def test_criterion_8_lanczos():
    t0 = time.perf_counter()
    img = GrayImage(np.full((64, 48), 0.5))
    dc_ok = True
    for w, h in ((12, 16), (24, 32), (96, 128)):
        out = resize_lanczos(img, w, h)
        dc_ok &= float(np.max(np.abs(out.samples - 0.5))) < 1.0 / 255.0

    def kernel(x):
        if abs(x) >= 3:
            return 0.0
        if x == 0:
            return 1.0
        return (
            math.sin(math.pi * x) / (math.pi * x)
            * math.sin(math.pi * x / 3) / (math.pi * x / 3)
        )

    # impulse on a mid-gray pedestal so the negative kernel lobes stay in
    # the clamped [0, 1] range: response = 0.5 + 0.25 * normalized kernel
    n = 32
    ped, amp = 0.5, 0.25
    row = np.full((1, n), ped)
    row[0, n // 2] += amp
    up = resize_lanczos(row, 2 * n, 1)[0]
    raw = [kernel(d) for d in (-2.5, -1.5, -0.5, 0.5, 1.5, 2.5)]
    norm = sum(raw)
    center = 2 * (n // 2)
    taps = {0: 1.0, 1: raw[3] / norm, -1: raw[2] / norm, 3: raw[4] / norm, 5: raw[5] / norm}
    tap_err = max(
        abs((up[center + off] - ped) / amp - want) for off, want in taps.items()
    )

    big = GrayImage(np.zeros((400, 600)))
    dims_ok = (
        resize_lanczos(big, 150, 100).samples.shape == (100, 150)
        and resize_lanczos(big, 300, 200).samples.shape == (200, 300)
        and resize_lanczos(big, 1200, 800).samples.shape == (800, 1200)
    )
    elapsed = time.perf_counter() - t0
    ok = dc_ok and tap_err <= 1e-6 and dims_ok and elapsed < 10.0
    _report(
        8,
        "lanczos checks",
        ok,
        f"DC: {dc_ok}; impulse tap err {tap_err:.2e}; dims 1/4,1/2,2x: {dims_ok}; {elapsed:.1f}s",
    )


def test_criterion_9_cli_service_parity(tmp_path):
    t0 = time.perf_counter()
    img, gt, center = render_target(
        size=360, n_rings=4, period=18.0, contrast=0.6, noise_sigma=0.03, seed=11
    )
    arr = (np.clip(img.samples, 0, 1) * 255).round().astype(np.uint8)
    image_path = tmp_path / "parity.png"
    Image.fromarray(arr, mode="L").save(image_path)

    out = tmp_path / "cli.json"
    rc = cli_main(["detect", str(image_path), "-o", str(out), "--scale", "10"])
    assert rc == 0
    cli_bytes = out.read_bytes()

    from fastapi.testclient import TestClient
    from ringkit.io_formats import save_annotation
    from ringkit.model import AnnotationDocument
    from ringkit.service import create_app, default_provenance

    doc0 = AnnotationDocument(
        image_path=str(image_path),
        image_size=(360, 360),
        provenance=default_provenance(image_path),
    )
    doc_path = tmp_path / "serve.json"
    save_annotation(doc0, doc_path)
    client = TestClient(create_app(tmp_path, doc_path, doc0))
    resp = client.post(
        "/api/detect", content=json.dumps({"scale": {"pixels_per_mm": 10.0}})
    )
    assert resp.status_code == 200
    parity = resp.content == cli_bytes

    # batch determinism, concurrency 1 vs 3
    folder = tmp_path / "imgs"
    folder.mkdir()
    for i, seed in enumerate((21, 22, 23)):
        timg, _, _ = render_target(
            size=280, n_rings=3, period=16.0, contrast=0.6, noise_sigma=0.03, seed=seed
        )
        Image.fromarray(
            (np.clip(timg.samples, 0, 1) * 255).round().astype(np.uint8), mode="L"
        ).save(folder / f"d{i}.png")
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("scale:\n  pixels_per_mm: 10.0\n")
    out1, out2 = tmp_path / "b1", tmp_path / "b2"
    assert cli_main(["batch", str(folder), "--config", str(cfg), "--out-dir", str(out1),
                     "--concurrency", "1"]) == 0
    assert cli_main(["batch", str(folder), "--config", str(cfg), "--out-dir", str(out2),
                     "--concurrency", "3"]) == 0
    batch_ok = True
    for p1 in sorted(out1.iterdir()):
        if p1.name == "batch_summary.csv":
            continue
        batch_ok &= p1.read_bytes() == (out2 / p1.name).read_bytes()

    elapsed = time.perf_counter() - t0
    ok = parity and batch_ok and elapsed < 60.0
    _report(
        9,
        "CLI/service parity",
        ok,
        f"detect byte-identical: {parity}; batch deterministic: {batch_ok}; {elapsed:.0f}s",
    )
