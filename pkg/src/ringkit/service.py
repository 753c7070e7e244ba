"""Local HTTP+JSON service driven by the browser editor.

State model: the server owns one annotation document, held as canonical
serialized text (io_formats.write_annotation), so GET /api/doc and the
undo/redo history are byte-stable. Every mutation goes through PUT/POST,
is validated against the document invariants (422 with the violation
list on failure) and is written through to the annotation file on disk.

A single active editor is enforced with a session token: POST
/api/session yields the token; once a session is active, mutating
requests carrying a different token (or none) are rejected with 409.
Requests without any active session are allowed for headless use.
"""

from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse

from . import io_formats, report
from .errors import (
    ConfigError,
    MissingImage,
    ParseError,
    RingkitError,
    SchemaError,
    VersionError,
)
from .geometry import compute_ring_metrics
from .measurement import RaySpec, measure_ray
from .model import AnnotationDocument, Point2, ScaleCalibration, ScaleSource, validate
from .pipeline import DetectSettings, run_detection

HISTORY_DEPTH = 200

_MIME = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


class ServiceState:
    def __init__(self, docroot: Path, doc_path: Path, doc: AnnotationDocument):
        self.docroot = docroot
        self.doc_path = doc_path
        self.text = io_formats.write_annotation(doc)
        self.undo: list[str] = []
        self.redo: list[str] = []
        self.session_token: str | None = None
        self.lock = threading.Lock()

    @property
    def document(self) -> AnnotationDocument:
        return io_formats.parse_annotation(self.text)

    def image_file(self) -> Path:
        p = Path(self.document.image_path)
        return p if p.is_absolute() else self.docroot / p

    def persist(self) -> None:
        tmp = self.doc_path.with_suffix(self.doc_path.suffix + ".tmp")
        tmp.write_text(self.text, encoding="utf-8")
        tmp.replace(self.doc_path)

    def push(self, new_text: str) -> None:
        self.undo.append(self.text)
        if len(self.undo) > HISTORY_DEPTH:
            self.undo.pop(0)
        self.redo.clear()
        self.text = new_text
        self.persist()


def _error(status: int, code: str, detail: str, **extra):
    return JSONResponse(status_code=status, content={"error": code, "detail": detail, **extra})


def _violations_response(violations):
    return JSONResponse(
        status_code=422,
        content={
            "error": "invariant_violations",
            "detail": "document violates invariants",
            "violations": [
                {"code": v.code.value, "shapeId": v.shape_id, "message": v.message}
                for v in violations
            ],
        },
    )


def _doc_response(text: str) -> Response:
    return Response(content=text.encode("utf-8"), media_type="application/json")


def _parse_detect_request(body: dict, current: AnnotationDocument, image_file: Path):
    """Build DetectSettings from the request body, defaulting metadata
    (scale, pith, harvest year) from the current document."""
    allowed = {"detector", "preprocess", "scale", "pith", "harvest_year"}
    for key in body:
        if key not in allowed:
            raise ConfigError(f"unknown key: {key}")

    cfg_yaml = {k: v for k, v in body.items() if k in ("detector", "preprocess", "scale")}
    batch = io_formats.parse_batch_config(json.dumps(cfg_yaml))

    scale = current.scale
    if batch.pixels_per_mm is not None:
        scale = ScaleCalibration(batch.pixels_per_mm, ScaleSource.METADATA)

    pith_override = None
    if "pith" in body:
        p = body["pith"]
        if not (isinstance(p, list) and len(p) == 2):
            raise ConfigError("pith: expected [x, y]")
        pith_override = Point2(float(p[0]), float(p[1]))
    elif current.pith is not None:
        pith_override = current.pith.center

    harvest = body.get("harvest_year", current.harvest_year)
    if harvest is not None and not isinstance(harvest, int):
        raise ConfigError("harvest_year: must be an integer")

    return DetectSettings(
        detector=batch.detector,
        scale=scale,
        pith_override=pith_override,
        harvest_year=harvest,
        remove_background=batch.remove_background,
        provenance=default_provenance(image_file),
    )


def default_provenance(image_path) -> dict[str, str]:
    return {"generator": "ringkit", "sample": Path(image_path).stem}


def create_app(docroot, doc_path, doc: AnnotationDocument, ui_dir=None) -> FastAPI:
    state = ServiceState(Path(docroot), Path(doc_path), doc)
    app = FastAPI(title="ringkit service", docs_url=None, redoc_url=None)
    app.state.ring_state = state

    def _session_conflict(request: Request):
        token = request.headers.get("X-Session-Token")
        if state.session_token is not None and token != state.session_token:
            return _error(409, "session_conflict", "another editor holds the session")
        return None

    @app.post("/api/session")
    async def acquire_session(request: Request):
        body = {}
        raw = await request.body()
        if raw:
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                return _error(400, "malformed_body", "request body is not valid JSON")
        with state.lock:
            if state.session_token is not None and not body.get("takeover", False):
                return _error(409, "session_conflict", "a session is already active")
            state.session_token = secrets.token_hex(16)
            return JSONResponse({"token": state.session_token})

    @app.delete("/api/session")
    async def release_session(request: Request):
        with state.lock:
            conflict = _session_conflict(request)
            if conflict is not None:
                return conflict
            state.session_token = None
            return JSONResponse({"ok": True})

    @app.get("/api/doc")
    async def get_doc():
        with state.lock:
            return _doc_response(state.text)

    @app.put("/api/doc")
    async def put_doc(request: Request):
        raw = await request.body()
        with state.lock:
            conflict = _session_conflict(request)
            if conflict is not None:
                return conflict
            try:
                parsed = io_formats.parse_annotation(raw.decode("utf-8"))
            except (ParseError, SchemaError, VersionError, UnicodeDecodeError) as e:
                return _error(400, "malformed_body", str(e))
            violations = validate(parsed)
            if violations:
                return _violations_response(violations)
            state.push(io_formats.write_annotation(parsed))
            return _doc_response(state.text)

    @app.post("/api/detect")
    async def detect(request: Request):
        raw = await request.body()
        body = {}
        if raw:
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                return _error(400, "malformed_body", "request body is not valid JSON")
            if not isinstance(body, dict):
                return _error(400, "malformed_body", "request body must be an object")
        with state.lock:
            conflict = _session_conflict(request)
            if conflict is not None:
                return conflict
            image_file = state.image_file()
            if not image_file.is_file():
                return _error(422, "missing_image", f"image {str(image_file)!r} not found")
            try:
                settings = _parse_detect_request(body, state.document, image_file)
            except ConfigError as e:
                return _error(400, "config_error", str(e))
            try:
                outcome = run_detection(str(image_file), settings)
            except RingkitError as e:
                return _error(422, type(e).__name__, str(e))
            new_doc = outcome.document.replace(image_path=state.document.image_path)
            state.push(io_formats.write_annotation(new_doc))
            return _doc_response(state.text)

    @app.post("/api/metrics")
    async def metrics():
        with state.lock:
            try:
                rows = compute_ring_metrics(state.document)
            except RingkitError as e:
                return _error(422, type(e).__name__, str(e))
            return Response(
                content=io_formats.metrics_rows_to_json(rows).encode(),
                media_type="application/json",
            )

    @app.post("/api/measure")
    async def measure(request: Request):
        raw = await request.body()
        try:
            body = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            return _error(400, "malformed_body", "request body is not valid JSON")
        if "angleDeg" not in body:
            return _error(400, "malformed_body", "missing angleDeg")
        origin = None
        if body.get("origin") is not None:
            o = body["origin"]
            if not (isinstance(o, list) and len(o) == 2):
                return _error(400, "malformed_body", "origin must be [x, y]")
            origin = Point2(float(o[0]), float(o[1]))
        spec = RaySpec(
            angle_deg=float(body["angleDeg"]),
            origin=origin,
            max_length_px=body.get("maxLengthPx"),
        )
        with state.lock:
            try:
                series = measure_ray(state.document, spec)
            except RingkitError as e:
                return _error(422, type(e).__name__, str(e))
            return Response(
                content=io_formats.ray_series_to_json(series).encode(),
                media_type="application/json",
            )

    @app.get("/api/image")
    async def image():
        with state.lock:
            path = state.image_file()
        if not path.is_file():
            return _error(404, "missing_image", f"image {str(path)!r} not found")
        return FileResponse(path, media_type=_MIME.get(path.suffix.lower(), "application/octet-stream"))

    @app.get("/api/export/csv")
    async def export_csv():
        with state.lock:
            try:
                rows = compute_ring_metrics(state.document)
            except RingkitError as e:
                return _error(422, type(e).__name__, str(e))
            return Response(content=io_formats.write_metrics_csv(rows).encode(), media_type="text/csv")

    @app.get("/api/export/pos")
    async def export_pos(angle: float = 0.0):
        with state.lock:
            doc = state.document
            try:
                series = measure_ray(doc, RaySpec(angle_deg=angle))
                text = io_formats.write_pos(
                    series,
                    sample_id=doc.provenance.get("sample", Path(doc.image_path).stem),
                    pixels_per_mm=doc.scale.pixels_per_mm,
                )
            except RingkitError as e:
                return _error(422, type(e).__name__, str(e))
            return Response(content=text.encode(), media_type="text/plain")

    @app.get("/api/export/report")
    async def export_report(angle: float | None = None):
        with state.lock:
            doc = state.document
            try:
                rows = compute_ring_metrics(doc)
                series = measure_ray(doc, RaySpec(angle_deg=angle)) if angle is not None else None
                bundle = report.render_report(doc, rows, series=series, image_file=state.image_file())
            except (RingkitError, MissingImage) as e:
                return _error(422, type(e).__name__, str(e))
            return Response(content=bundle.html.encode(), media_type="text/html")

    @app.post("/api/undo")
    async def undo(request: Request):
        with state.lock:
            conflict = _session_conflict(request)
            if conflict is not None:
                return conflict
            if not state.undo:
                return _error(400, "history_empty", "nothing to undo")
            state.redo.append(state.text)
            state.text = state.undo.pop()
            state.persist()
            return _doc_response(state.text)

    @app.post("/api/redo")
    async def redo(request: Request):
        with state.lock:
            conflict = _session_conflict(request)
            if conflict is not None:
                return conflict
            if not state.redo:
                return _error(400, "history_empty", "nothing to redo")
            state.undo.append(state.text)
            state.text = state.redo.pop()
            state.persist()
            return _doc_response(state.text)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
