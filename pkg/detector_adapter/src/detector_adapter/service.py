"""HTTP side of the detect wire contract.

``POST /detect`` takes a raw image body and replies with
``{width, height, boxes: [{x, y, w, h, conf}]}`` in pixel units, boxes
sorted by confidence descending and capped at ``max_detections``.
``GET /healthz`` is the liveness probe.
"""

from __future__ import annotations

import io
import logging

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from PIL import Image, UnidentifiedImageError

from .backend import load_backend, run_inference
from .config import AdapterConfig

log = logging.getLogger(__name__)


def decode_image(data: bytes) -> np.ndarray:
    if not data:
        raise ValueError("empty request body")
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))


def create_app(cfg: AdapterConfig) -> FastAPI:
    backend = load_backend(cfg)
    app = FastAPI(title="detector-adapter")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/detect")
    async def detect(request: Request):
        body = await request.body()
        try:
            image = decode_image(body)
        except (UnidentifiedImageError, ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=f"undecodable image: {exc}")
        try:
            boxes = run_inference(backend, image, cfg)
        except Exception as exc:  # backend blew up: report, don't crash the worker
            log.exception("inference failed")
            raise HTTPException(status_code=500, detail=f"inference failed: {exc}")
        height, width = image.shape[:2]
        return {
            "width": width,
            "height": height,
            "boxes": [
                {"x": x, "y": y, "w": w, "h": h, "conf": conf}
                for x, y, w, h, conf in boxes
            ],
        }

    return app
