"""HTTP layer over the annotation store.

All responses are JSON except clip bytes. Clips are sliced out of the
original recordings by byte range computed from the utterance's time span
and the corpus audio parameters; nothing is re-encoded.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from .annotate import AnnotationError, AnnotationRecord, AnnotationStore

# Recordings are headerless PCM; sample width is fixed at 16 bits.
_BYTES_PER_SAMPLE = 2


def clip_byte_span(
    store: AnnotationStore, utterance_id: str
) -> tuple[Path, int, int, int]:
    """(path, start_byte, end_byte, file_size) for an utterance's clip.

    Utterances without a time span map to the whole file. Spans are clamped
    to the file, so a manifest whose times overrun the recording still
    serves what exists.
    """
    utt = store.utterance(utterance_id)
    path = Path(utt.audio.path)
    if not path.is_file():
        raise FileNotFoundError(f"clip file {path} not found")
    size = path.stat().st_size
    if utt.audio.start_sec is None:
        return path, 0, size, size
    meta = store.corpus.meta
    rate = meta.sample_rate_hz * meta.channels * _BYTES_PER_SAMPLE
    start = min(size, int(utt.audio.start_sec * rate))
    end = min(size, int(utt.audio.end_sec * rate))
    return path, start, max(start, end), size


def create_app(
    store: AnnotationStore, static_dir: Optional[str | Path] = None
) -> FastAPI:
    app = FastAPI(title="annotation service")

    @app.exception_handler(AnnotationError)
    def annotation_error(_request: Request, exc: AnnotationError) -> JSONResponse:
        status = 404 if str(exc).startswith("unknown") else 400
        return JSONResponse({"error": str(exc)}, status_code=status)

    @app.get("/api/annotators/{annotator_id}/next")
    def next_task(annotator_id: str) -> dict:
        task = store.next_task(annotator_id)
        return {"task": asdict(task) if task else None}

    @app.get("/api/clips/{utterance_id}")
    def clip(utterance_id: str) -> Response:
        try:
            path, start, end, size = clip_byte_span(store, utterance_id)
        except FileNotFoundError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        with path.open("rb") as handle:
            handle.seek(start)
            data = handle.read(end - start)
        partial = size > 0 and (start > 0 or end < size)
        headers = {"Accept-Ranges": "bytes"}
        if partial:
            headers["Content-Range"] = f"bytes {start}-{end - 1}/{size}"
        return Response(
            content=data,
            media_type="application/octet-stream",
            status_code=206 if partial else 200,
            headers=headers,
        )

    @app.post("/api/annotations")
    async def submit(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise AnnotationError("request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise AnnotationError("request body must be a JSON object")
        body.setdefault("timestamp", time.time())
        return store.submit(AnnotationRecord.from_json(body))

    @app.get("/api/agreement")
    def agreement(a: str, b: str, field: str = "emotion") -> dict:
        kappa, n_overlap = store.agreement(a, b, field)
        return {"a": a, "b": b, "field": field, "kappa": kappa, "n_overlap": n_overlap}

    @app.get("/api/progress")
    def progress() -> dict:
        return store.progress()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/")
        def index() -> PlainTextResponse:
            return PlainTextResponse(
                "annotation service is running; no UI bundle is installed\n"
            )

    return app
